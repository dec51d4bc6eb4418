"""
Multi-Λ atoms in a two-mode quantized cavity: time-averaged effective
Hamiltonians, delta-pulse Raman beam splitters, and an exact-evolution oracle.
"""

__version__ = "0.1.1"

