"""Full-line code completion with token, BPE and ASDL-syntax language models."""

__version__ = "0.1.0"
