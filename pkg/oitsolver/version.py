__version__ = "1.0"
__release_date__ = "Oct 19, 2026"
