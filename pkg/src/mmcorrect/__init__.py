"""Self-correcting reductions for matrix multiplication over finite fields."""

__version__ = "0.1.0"
