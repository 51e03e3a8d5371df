"""Scheme kernels: factorizations, triangularization, rates, power allocation, lattice codec."""
