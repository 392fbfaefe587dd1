"""Causal B-spline interpolation filters designed against a worst-case error norm."""
