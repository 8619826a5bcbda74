"""Surface-code simulation and decoding of transversal CNOTs, teleportation and lattice surgery."""

__version__ = "0.1.0"
