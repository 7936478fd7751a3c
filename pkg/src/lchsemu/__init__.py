"""Gate-level emulator for the improved LCHS algorithm.

LCHS (linear combination of Hamiltonian simulations) writes the dissipative
propagator exp(-A t) as a kernel-weighted sum of unitaries. This package
builds the explicit LCU + QSP circuit, runs it on a statevector and compares
the result with dense classical oracles, using a periodic advection-diffusion
problem as reference.
"""

__version__ = "0.1.0"
