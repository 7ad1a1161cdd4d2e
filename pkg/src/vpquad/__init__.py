"""Variable-pitch quadrotor: rotor aerodynamics, fault-tolerant allocation, simulation."""

__version__ = "0.1.0"
