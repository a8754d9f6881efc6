"""Toolchain and functional model for a 19x19 island-style FPGA with 64 six-input CLBs."""

__version__ = "0.1.0"
