"""Numerics for multi-Ooguri-Vafa type model hyper-Kahler geometries.

Modules
-------
lattice    integer symplectic lattices and Frobenius bases
modeldata  model data, central charges, assumption checks
specfun    Bessel functions and the potential lattice sums
forms      2-form coefficient calculus
semiflat   semi-flat twistor family
modelgeom  model twistor family, Gibbons-Hawking data, Taub-NUT charts
verify     certificates
cli        the ``gmn-forge`` command
"""
from . import forms, lattice, modeldata, modelgeom, semiflat, specfun, verify

__version__ = "0.1.0"

__all__ = ["forms", "lattice", "modeldata", "modelgeom", "semiflat", "specfun", "verify"]
