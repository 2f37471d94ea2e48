"""Fourier analysis of dual-time stepping with p-multigrid for FR advection-diffusion."""
