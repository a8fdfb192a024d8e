"""Cube combinatorics, Host-Kra cube groups and nilcycle experiments on measure-preserving systems."""

__version__ = "0.1.0"
