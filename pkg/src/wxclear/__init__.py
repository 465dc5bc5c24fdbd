"""All-in-one adverse-weather image restoration: spectral decomposition
prompts, mask-driven spatial grouping, and group-wise attention."""

__version__ = "0.1.0"
