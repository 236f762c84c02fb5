"""Segment-hierarchy depth estimation.

Encoder pools superpixel tokens into a segment hierarchy, the decoder
reverses the hierarchy to produce depth maps that follow the segments.
"""
import sys

assert sys.version_info >= (3, 10), "Python 3.10 version minimum to run segdepth"
