"""Geometric Hamilton-Jacobi checks on cotangent bundles."""
__version__ = "0.1.0"
