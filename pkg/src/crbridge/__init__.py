"""Common camera/LiDAR representations learned with Double Siamese and Common Edges training."""

__version__ = "0.1.0"
