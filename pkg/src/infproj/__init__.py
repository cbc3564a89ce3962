"""Stochastic solvers for non-convex inf-projection minimization."""
