"""
# liqtools

Solver and simulator for mean-field optimal portfolio liquidation under
transient price impact with semimartingale (block plus diffusive)
strategies.

## Packages

* model - parameters, standing assumptions, matrix-form dynamics, config
* riccati - backward coefficient systems and feedback coefficients
* wellposedness - shift-constant selection and PSD certification
* simulate - mean path, strategy and state path ensembles
* cost - Monte-Carlo cost ledger, value function, square decomposition
* oracle - discrete-time dynamic programming recursion
* commandline - the `liqtools` command

NOTE: You can import every package as 'from liqtools.name import *' and
get no name collisions between packages. That is intentional.
"""

__version__ = '0.2.0'
