"""
Network simulation package for the wpp-selfheal project.

This package contains the in-process replacement for the emulated
spine-leaf testbed:
- Topology generation, validation and redundant path inventories
- Fluid-flow traffic model (offered load, utilization, latency, loss)
- Lumped-capacity switch thermal model
- Observation, knowledge base and intent violation checks
- Flow-rule actuation with installation delay
- Dijkstra+ECMP baseline controller
- The tick-driven simulator tying the pieces together
"""

__version__ = "0.1.0"
