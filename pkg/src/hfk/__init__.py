"""hfk - H-infinity filtering kit for discrete-time stochastic systems.

Synthesis of full-order estimation filters for linear systems with
state- and disturbance-multiplicative noise, seeded Monte Carlo
verification of internal/external stability, and analytic checks of the
associated Hamilton-Jacobi and Riccati-type inequalities.
"""

__version__ = "0.1.0"
