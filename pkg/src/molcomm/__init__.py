"""LDPC-coded molecular communication via diffusion."""
