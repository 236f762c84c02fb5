"""Synthetic scenes, augmentation, storage and datasets."""
