"""
Rejection Scheduling Simulator
Online non-preemptive scheduling with rejection on unrelated machines.

Engines for total flow time, weighted flow time plus energy and deadline energy
minimization, with dual-feasibility checkers, exact baselines and adversaries.
"""

__version__ = "1.0.0"
__author__ = "Rejection Scheduling Simulator"
