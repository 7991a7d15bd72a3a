"""Bootstrap MMD test for comparing the navigation behaviour of two agents."""

__version__ = "0.1.0"
