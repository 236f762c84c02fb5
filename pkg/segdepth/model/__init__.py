"""The segment-hierarchy network: configuration, layers, forward pass, checkpoints."""
