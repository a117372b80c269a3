"""Resilience planning for transmission grids under ice storms.

Submodules:
    hazard        ice accretion, fragility curves, repair-time sampling
    predictive    storm-awareness horizon split and time-varying shed penalty
    grid_model    network data model, JSON schema, validation, per-unit
    scenario      hazard-driven scenario sampling with decision-dependent damage
    milp_builder  two-stage stochastic MILP assembly, decode, and audits
    mps           MPS fixed-format export and parser
    solver        in-repo LP (revised simplex) and MILP (branch and bound) kernel
    pha           progressive hedging decomposition over scenarios
    report        strategy comparison, preparation-time sweeps, CSV/SVG output
    cli           command-line front end
"""

__version__ = "0.1.0"
