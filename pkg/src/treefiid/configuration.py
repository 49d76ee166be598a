"""Configuration constants for treefiid.

Tolerances, enumeration guards, retry budgets and defaults shared by the
library modules and the CLI. Entropies are always in nats; tolerances on
entropies are therefore in nats as well.
"""

# Smallest tree degree the inequalities are stated for
MIN_TREE_DEGREE = 3

# Markov chain validation
ROW_SUM_TOLERANCE = 1e-12  # rows of p must sum to 1
STATIONARY_TOLERANCE = 1e-10  # pi p = pi, and detailed balance
SPECTRAL_SLACK = 1e-12  # added to 1/sqrt(d-1) in the spectral test

# Exact and connected-set entropies must agree to this precision
ENTROPY_AGREEMENT_TOLERANCE = 1e-9

# Largest joint table |M|^n that markov enumerates exactly
EXACT_ENUMERATION_GUARD = 10**7

# Largest |M|^(n|V|) * (n!)^|E| the brute-force coloring oracle accepts
BRUTE_FORCE_GUARD = 10**8

# Number of re-draws before lift_base gives up on a connected lift
LIFT_RETRY_BUDGET = 100

# The entropy sampler makes at most this many attempts per requested sample
EMBEDDING_RETRY_FACTOR = 20

# Threshold scans evaluate the slack on this many grid points before bisecting
SCAN_GRID_POINTS = 65

# Defaults for randomized runs
DEFAULT_SEED = 20240101
DEFAULT_SAMPLES = 20000

# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN_ERROR = 2
