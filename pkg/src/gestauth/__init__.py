"""Smartwatch payment-gesture authentication and synthetic gesture generation."""

__version__ = "0.1.0"
