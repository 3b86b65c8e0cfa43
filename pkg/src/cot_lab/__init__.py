"""Distortion curves, capacity/OT solvers, and simulators for channel-aware
optimal transport with a perfect-realism (matched output marginal) constraint.

Submodules:
    numkit        scalar special functions, root finding, 1-D minimization
    infokit       discrete distributions, information measures, capacity, OT
    hybrid_bound  single-letter hybrid achievability evaluator
    binary_case   Bernoulli source over a binary symmetric channel, Hamming cost
    gaussian_case diagonal Gaussian source over AWGN(1), squared-error cost
    block_sim     Monte Carlo simulators and the block random-coding harness
    cli           command-line front end
"""

__version__ = "0.1.0"
