"""
Q4RPD Delivery Planner Modules

This package contains the problem model, the single routing problem and its
solvers, the iterative orchestrator and the benchmark tooling around them.
"""
