"""Desk-scale lab for network TMLE of quarantine policies on simulated epidemics."""

__version__ = "0.1.0"
