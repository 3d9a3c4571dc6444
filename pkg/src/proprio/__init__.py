"""Proprioceptive contact detection and odometry toolkit for legged robots."""

__version__ = "0.1.0"
