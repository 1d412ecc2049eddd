"""Rational Krylov approximation of parametric fractional matrix functions."""
