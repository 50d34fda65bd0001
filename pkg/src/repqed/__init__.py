"""Exact density-matrix simulation of bit-flip error detection on the
three-qubit repetition code, with two ancilla-mediated parity checks."""

__version__ = "0.1.0"
