"""Orthogonal-Padé activation units."""
