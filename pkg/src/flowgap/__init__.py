"""Hard instances and congestion-gap certificates for contraction-based flow sparsifiers."""

from .graph import CapacitatedGraph, ContractedGraph, Demand, Edge, FlowPath, GraphError, Partition, contract

__all__ = ["CapacitatedGraph", "ContractedGraph", "Demand", "Edge", "FlowPath", "GraphError", "Partition", "contract"]
