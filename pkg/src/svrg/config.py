from enum import Enum, unique


@unique
class Representation(Enum):
    """
    Enum naming the two alternating-series forms of the range density.

    ``series_a`` is the Gaussian-kernel form, monotone for large x = r²/σ²;
    ``series_b`` is the inverse-gamma-kernel form, monotone for small x.
    """

    series_a = "A"
    series_b = "B"


# range-dist
DEFAULT_C_TH = 2.0
MIN_C_TH = 4.0 / 3.0
MAX_SERIES_TERMS = 10_000
DEFAULT_TOLERANCE = 1e-12

# latent sigma² block, multiples of the squared true range
DEFAULT_LATENT_C_TH = 0.4
MAX_PROPOSAL_RETRIES = 1000

# truncated samplers
MIN_REGION_MASS = 1e-6
GIG_REJECTION_MASS = 0.05
MAX_REJECTION_TRIES = 100_000

# special functions
BESSEL_RTOL = 1e-10

# MCMC sizing
DEFAULT_BURNIN = 1000
DEFAULT_DRAWS = 10_000
ROLLING_BURNIN = 1000
ROLLING_DRAWS = 6000
NU_NEWTON_STEPS = 100
LOG_EVERY = 500

# initial state
INITIAL_PHI = 0.95
INITIAL_OMEGA_EN = 0.0
INITIAL_OMEGA_NN = 0.1

# priors
PRIOR_A_PHI = 20.0
PRIOR_B_PHI = 1.5
PRIOR_N0 = 1.0
PRIOR_S0 = 5.0
PRIOR_DELTA0 = 0.0
PRIOR_GAMMA0 = 10.0
PRIOR_ALPHA_NU = 16.0
PRIOR_BETA_NU = 0.8

# data
DEFAULT_TICK = 0.01
PERCENT = 100.0

# forecast evaluation
MIN_GW_LENGTH = 30
EWMA_DECAY = 0.94
