"""M/G/1-type chain solver and LI-truncation verification toolkit"""

__version__ = "0.1.0"
