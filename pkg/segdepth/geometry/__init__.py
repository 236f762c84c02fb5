"""Pinhole camera, point clouds and 3-D Chamfer distance."""
