"""gfnoma - grant-free NOMA coding and simulation toolkit."""

__version__ = "0.1.0"
