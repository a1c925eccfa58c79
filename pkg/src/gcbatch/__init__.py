"""Goal-conditioned batch RL with rotation augmentation and a Siamese equivalence encoder."""

__version__ = "0.1.0"
