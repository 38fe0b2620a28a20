"""stratac: a dual-layer robot team simulator.

Deliberative agents (frames, ontology, scripts, agendas) drive reactive
behavior-tree controllers over a deterministic grid world, with a live
gateway for the operator console.
"""

__version__ = "0.1.0"
