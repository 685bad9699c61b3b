"""Diffusions, special functions and integrable flows on the cone of positive definite matrices."""

__version__ = "0.1.0"
