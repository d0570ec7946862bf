"""pcbr: private retrieval of a contiguous block of messages from replicated servers."""

__version__ = "0.1.0"
