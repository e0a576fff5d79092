"""Physics-consistent humanoid morphology randomization toolkit."""

__version__ = "0.1.0"
