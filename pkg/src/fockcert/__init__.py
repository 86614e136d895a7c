"""Heralded Fock-state simulation and genuine n-photon non-Gaussianity certification."""

__version__ = "0.1.0"
