"""Simulation laboratory for hybrid locked PUFs.

Emulates classical arbiter-based PUFs, wraps them in conjugate-coding (BB84)
or mutually-unbiased-basis encodings, runs the lock-gated authentication
protocol against pluggable channel adversaries, and checks the closed-form
security bounds against Monte Carlo estimates.
"""

__version__ = "0.1.0"
