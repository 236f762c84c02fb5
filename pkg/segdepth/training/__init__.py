"""Optimisation, training loop, evaluation runs and the decoder ablation."""
