"""Free-energy differences of driven spin chains from METTS pseudo-work ensembles."""

__version__ = "0.1.0"
