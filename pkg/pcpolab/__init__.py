"""pcpolab package: parallel constrained policy optimization for driving tasks."""
__version__ = "0.1.0"
