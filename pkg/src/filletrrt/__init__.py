"""Fillet-based RRT* motion planning."""
