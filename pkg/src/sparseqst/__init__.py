"""K-sparse pure-state tomography via phase estimation on the U_phi unitary."""

__version__ = "0.1.0"
