"""Stochastic bin-packing of phase-varying jobs.

Pipeline: enumerate server configurations, solve the request-policy LP,
turn the solution into a single-server request policy, verify it against
an exact Markov-chain oracle, and convert it into a token-based dispatch
policy for a large server fleet evaluated by discrete-event simulation.
"""

__version__ = "0.1.0"
