"""Multi-agent quadrotor testbed: rigid-body plants under cascaded PD inner
loops, driven by distributed double-integrator laws over a communication graph.
"""

__version__ = "0.1.0"
