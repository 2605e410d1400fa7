"""Exact asymptotic comparison for terms built from exp, log and a transexponential E."""

__version__ = "0.1.0"
