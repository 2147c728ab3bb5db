"""anonplan: factored multiagent MDP planning with count-aggregator factors.

Core pieces: mixed-mode factor algebra with redundant count representations
(`factors`), variable elimination over them (`elimination`), factored MDP
models and basis back-projection (`fmmdp`), ALP constraint generation and LP
solving (`alp`), the SIS epidemic-control domain (`epidemics`), Monte Carlo
policy evaluation (`simulate`), and a command-line front end (`cli`).
"""

__version__ = "0.1.0"

from . import factors  # noqa: F401
