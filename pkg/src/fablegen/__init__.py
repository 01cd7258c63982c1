"""Question-answer generation pipeline and interactive storyteller for storybooks."""

__version__ = "0.1.0"
