"""Multi-agent instance-based learning in a cooperative transport gridworld."""

__version__ = "0.1.0"
