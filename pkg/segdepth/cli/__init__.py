"""Command-line interface.

Needs the `cli` extra: `pip install "segment-depth[cli]"`.
"""
