"""pfagent: an interactive, self-evolving power-flow study agent."""

__version__ = "0.1.0"
