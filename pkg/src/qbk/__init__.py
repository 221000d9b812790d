"""Constructive quasiconformal toolkit: Moebius normalizations, foldings and
winding maps, the ball-chain construction, and conformal modulus tools."""

__version__ = "0.1.0"
