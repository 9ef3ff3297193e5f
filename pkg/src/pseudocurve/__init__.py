"""Numerical tools for elliptic line congruences and pseudoholomorphic curves in R^4.

Submodules: ``grassmann`` (Klein coordinates of oriented 2-planes),
``congruence`` (line congruences, osculating structures, taming),
``chart`` (local charts ``w_zbar = Q``), ``solver`` (Cauchy-transform curve
solver), ``darboux`` (integrable charts and coframes), ``invariants``
(microlocal invariants) and ``cli``.
"""

__version__ = "0.1.0"
