"""Geometric and interaction extraction of physical and functional properties."""
