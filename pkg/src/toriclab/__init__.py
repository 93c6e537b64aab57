"""Toric-code decoding laboratory: noise, MWPM, SU-Net decoders and experiment tooling."""

__version__ = "0.1.0"
