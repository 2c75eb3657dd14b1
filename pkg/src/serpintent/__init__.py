"""Query intent mining from search engine result pages."""

__version__ = "0.1.0"
