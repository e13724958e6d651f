import math
from typing import Any, Optional, Tuple

import attr
import numpy as np
from scipy import stats

from .config import (
    DEFAULT_BURNIN,
    DEFAULT_C_TH,
    DEFAULT_DRAWS,
    DEFAULT_LATENT_C_TH,
    LOG_EVERY,
    MAX_PROPOSAL_RETRIES,
    MIN_C_TH,
    PRIOR_A_PHI,
    PRIOR_ALPHA_NU,
    PRIOR_B_PHI,
    PRIOR_BETA_NU,
    PRIOR_DELTA0,
    PRIOR_GAMMA0,
    PRIOR_N0,
    PRIOR_S0,
    Representation,
)
from .errors import DomainError

LOG_2 = math.log(2.0)


def positive(instance: Any, attribute: "attr.Attribute[float]", value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{attribute.name} must be finite and > 0, got {value!r}")


def nonnegative(instance: Any, attribute: "attr.Attribute[float]", value: float) -> None:
    if not (math.isfinite(value) and value >= 0):
        raise DomainError(f"{attribute.name} must be finite and >= 0, got {value!r}")


def finite(instance: Any, attribute: "attr.Attribute[float]", value: float) -> None:
    if not math.isfinite(value):
        raise DomainError(f"{attribute.name} must be finite, got {value!r}")


def positive_int(instance: Any, attribute: "attr.Attribute[int]", value: int) -> None:
    if value < 1:
        raise DomainError(f"{attribute.name} must be >= 1, got {value!r}")


def as_array(value: Any) -> np.ndarray:
    return np.asarray(value, dtype=float)


@attr.s(frozen=True)
class RangeDensityEval:
    """
    Result of evaluating the range density with an alternating series.

    ``lower_bracket`` and ``upper_bracket`` are the last odd and even partial
    sums; ``value`` is their midpoint.
    """

    value: float = attr.ib(validator=nonnegative)
    lower_bracket: float = attr.ib()
    upper_bracket: float = attr.ib()
    terms_used: int = attr.ib()
    representation: Representation = attr.ib(
        validator=attr.validators.instance_of(Representation)
    )
    converged: bool = attr.ib(default=True)

    @property
    def log_value(self) -> float:
        return math.log(self.value) if self.value > 0 else -math.inf


@attr.s(frozen=True)
class NormalizedRangeSq:
    """A draw of x = r²/σ², the squared range of a unit-variance day."""

    x: float = attr.ib(converter=float, validator=positive)


@attr.s(frozen=True)
class GigParams:
    """
    Generalized inverse Gaussian with kernel x^(ν-1) exp{-(δ²/x + γ²x)/2}.
    """

    nu: float = attr.ib(converter=float, validator=finite)
    delta: float = attr.ib(converter=float, validator=nonnegative)
    gamma: float = attr.ib(converter=float, validator=nonnegative)

    def __attrs_post_init__(self) -> None:
        if self.delta == 0 and self.gamma == 0:
            raise DomainError("GIG delta and gamma cannot both be zero")
        if self.nu <= 0 and self.delta == 0:
            raise DomainError("GIG with nu <= 0 requires delta > 0")
        if self.nu >= 0 and self.gamma == 0:
            raise DomainError("GIG with nu >= 0 requires gamma > 0")


@attr.s(frozen=True)
class MomentMatch:
    """
    Inverse gamma or gamma law with the first two moments of LN(m, s).

    ``beta`` is the inverse-gamma scale or the gamma rate.
    """

    m: float = attr.ib(validator=finite)
    s: float = attr.ib(validator=positive)
    alpha: float = attr.ib(validator=positive)
    beta: float = attr.ib(validator=positive)


@attr.s(frozen=True)
class SvrgParams:
    """
    Parameters of the stochastic volatility model with range-based correction
    and leverage. ``omega_en`` is the covariance of the return and volatility
    shocks (the return shock has unit variance), ``omega_nn`` the variance of
    the volatility shock, and the bias scales follow G(nu1/2, nu2/2).
    """

    phi: float = attr.ib(converter=float)
    omega_en: float = attr.ib(converter=float, validator=finite)
    omega_nn: float = attr.ib(converter=float, validator=positive)
    nu1: float = attr.ib(converter=float, validator=positive)
    nu2: float = attr.ib(converter=float, validator=positive)

    @phi.validator
    def _check_phi(self, attribute: "attr.Attribute[float]", value: float) -> None:
        if not abs(value) < 1:
            raise DomainError(f"phi must satisfy |phi| < 1, got {value!r}")

    def __attrs_post_init__(self) -> None:
        if not self.conditional_variance > 0:
            raise DomainError(
                "Omega must be positive definite: "
                f"omega_nn={self.omega_nn!r} <= omega_en²={self.omega_en ** 2!r}"
            )

    @property
    def conditional_variance(self) -> float:
        """Variance of the volatility shock given the return shock."""
        return self.omega_nn - self.omega_en ** 2

    @property
    def precision_nn(self) -> float:
        return 1.0 / self.conditional_variance

    @property
    def precision_en(self) -> float:
        return -self.omega_en / self.conditional_variance

    @property
    def precision_ee(self) -> float:
        return 1.0 + self.precision_en ** 2 / self.precision_nn

    @property
    def stationary_variance(self) -> float:
        return self.omega_nn / (1.0 - self.phi ** 2)

    @property
    def correlation(self) -> float:
        return self.omega_en / math.sqrt(self.omega_nn)

    def evolve(self, **changes: float) -> "SvrgParams":
        return attr.evolve(self, **changes)

    @classmethod
    def from_precision(
        cls, phi: float, precision_en: float, precision_nn: float, nu1: float, nu2: float
    ) -> "SvrgParams":
        omega_en = -precision_en / precision_nn
        return cls(
            phi=phi,
            omega_en=omega_en,
            omega_nn=1.0 / precision_nn + omega_en ** 2,
            nu1=nu1,
            nu2=nu2,
        )


@attr.s(frozen=True)
class Priors:
    """
    Hyper-parameters: (phi+1)/2 ~ Be(a_phi, b_phi); the (ηη) precision entry
    ~ G(n0/2, 1/(2 s0)); the (εη) entry given it ~ N(precision·delta0,
    gamma0·precision); nu_i ~ G(alpha_nu_i/2, beta_nu_i/2).
    """

    a_phi: float = attr.ib(default=PRIOR_A_PHI, converter=float, validator=positive)
    b_phi: float = attr.ib(default=PRIOR_B_PHI, converter=float, validator=positive)
    n0: float = attr.ib(default=PRIOR_N0, converter=float, validator=positive)
    s0: float = attr.ib(default=PRIOR_S0, converter=float, validator=positive)
    delta0: float = attr.ib(default=PRIOR_DELTA0, converter=float, validator=finite)
    gamma0: float = attr.ib(default=PRIOR_GAMMA0, converter=float, validator=positive)
    alpha_nu1: float = attr.ib(default=PRIOR_ALPHA_NU, converter=float, validator=positive)
    beta_nu1: float = attr.ib(default=PRIOR_BETA_NU, converter=float, validator=positive)
    alpha_nu2: float = attr.ib(default=PRIOR_ALPHA_NU, converter=float, validator=positive)
    beta_nu2: float = attr.ib(default=PRIOR_BETA_NU, converter=float, validator=positive)

    @property
    def nu_means(self) -> Tuple[float, float]:
        return self.alpha_nu1 / self.beta_nu1, self.alpha_nu2 / self.beta_nu2

    def log_phi_density(self, phi: float) -> float:
        if not -1 < phi < 1:
            return -math.inf
        return float(stats.beta.logpdf((phi + 1.0) / 2.0, self.a_phi, self.b_phi)) - LOG_2

    def log_omega_density(self, omega_en: float, omega_nn: float) -> float:
        """
        Prior of (omega_en, omega_nn) induced by the one on the precision
        entries; the change of variables contributes (ω^(ηη))³.
        """
        det = omega_nn - omega_en ** 2
        if not det > 0:
            return -math.inf
        precision_nn = 1.0 / det
        precision_en = -omega_en / det
        return (
            float(stats.gamma.logpdf(precision_nn, self.n0 / 2.0, scale=2.0 * self.s0))
            + float(
                stats.norm.logpdf(
                    precision_en,
                    precision_nn * self.delta0,
                    math.sqrt(self.gamma0 * precision_nn),
                )
            )
            + 3.0 * math.log(precision_nn)
        )

    def log_nu_density(self, nu1: float, nu2: float) -> float:
        return float(
            stats.gamma.logpdf(nu1, self.alpha_nu1 / 2.0, scale=2.0 / self.beta_nu1)
            + stats.gamma.logpdf(nu2, self.alpha_nu2 / 2.0, scale=2.0 / self.beta_nu2)
        )

    def log_density(self, params: "SvrgParams") -> float:
        return (
            self.log_phi_density(params.phi)
            + self.log_omega_density(params.omega_en, params.omega_nn)
            + self.log_nu_density(params.nu1, params.nu2)
        )


@attr.s(frozen=True)
class McmcConfig:
    n_burnin: int = attr.ib(default=DEFAULT_BURNIN, converter=int)
    n_draws: int = attr.ib(default=DEFAULT_DRAWS, converter=int, validator=positive_int)
    seed: int = attr.ib(default=0, converter=int)
    c_th: float = attr.ib(default=DEFAULT_C_TH, converter=float)
    latent_c_th: float = attr.ib(default=DEFAULT_LATENT_C_TH, converter=float)
    max_retries: int = attr.ib(
        default=MAX_PROPOSAL_RETRIES, converter=int, validator=positive_int
    )
    thin: int = attr.ib(default=1, converter=int, validator=positive_int)
    keep_latent: bool = attr.ib(default=False)
    log_every: int = attr.ib(default=LOG_EVERY, converter=int)

    @n_burnin.validator
    def _check_burnin(self, attribute: "attr.Attribute[int]", value: int) -> None:
        if value < 0:
            raise DomainError(f"n_burnin must be >= 0, got {value!r}")

    @c_th.validator
    def _check_c_th(self, attribute: "attr.Attribute[float]", value: float) -> None:
        if not MIN_C_TH < value < math.pi ** 2:
            raise DomainError(f"c_th must lie in (4/3, π²), got {value!r}")

    @latent_c_th.validator
    def _check_latent_c_th(self, attribute: "attr.Attribute[float]", value: float) -> None:
        # multiple of the squared true range; both series must stay monotone
        if not 1.0 / math.pi ** 2 < value < 0.75:
            raise DomainError(f"latent_c_th must lie in (1/π², 3/4), got {value!r}")

    def evolve(self, **changes: Any) -> "McmcConfig":
        return attr.evolve(self, **changes)


@attr.s(frozen=True)
class RsvParams:
    """Parameters of the realized stochastic volatility benchmark."""

    mu: float = attr.ib(converter=float, validator=finite)
    phi: float = attr.ib(converter=float)
    xi: float = attr.ib(converter=float, validator=finite)
    omega_ww: float = attr.ib(converter=float, validator=positive)
    omega_en: float = attr.ib(converter=float, validator=finite)
    omega_nn: float = attr.ib(converter=float, validator=positive)

    @phi.validator
    def _check_phi(self, attribute: "attr.Attribute[float]", value: float) -> None:
        if not abs(value) < 1:
            raise DomainError(f"phi must satisfy |phi| < 1, got {value!r}")

    def __attrs_post_init__(self) -> None:
        if not self.conditional_variance > 0:
            raise DomainError("omega_nn must exceed omega_en²")

    @property
    def conditional_variance(self) -> float:
        return self.omega_nn - self.omega_en ** 2


@attr.s(eq=False)
class LatentState:
    """
    Daily variances σ²_t and bias scales λ_t owned by one chain.
    σ̃²_t = λ_t σ²_t is derived, so it is consistent after every update.
    """

    sigma2: np.ndarray = attr.ib(converter=as_array)
    lam: np.ndarray = attr.ib(converter=as_array)

    def __attrs_post_init__(self) -> None:
        if self.sigma2.shape != self.lam.shape or self.sigma2.ndim != 1:
            raise DomainError("sigma2 and lambda must be 1-d and of equal length")
        if not (np.all(self.sigma2 > 0) and np.all(self.lam > 0)):
            raise DomainError("latent variances and scales must be strictly positive")

    def __len__(self) -> int:
        return len(self.sigma2)

    @property
    def sigma2_tilde(self) -> np.ndarray:
        return self.lam * self.sigma2

    def copy(self) -> "LatentState":
        return LatentState(self.sigma2.copy(), self.lam.copy())


def _as_dates(value: Any) -> np.ndarray:
    return np.asarray(value, dtype="datetime64[D]")


def _optional_array(value: Any) -> Optional[np.ndarray]:
    return None if value is None else as_array(value)


@attr.s(eq=False)
class ReturnRangeSeries:
    """
    Daily returns y_t = 100·Δlog close and ranges r_t = 100·log(H/L), with an
    optional realized-variance proxy in the same percent² units.
    """

    dates: np.ndarray = attr.ib(converter=_as_dates)
    y: np.ndarray = attr.ib(converter=as_array)
    r: np.ndarray = attr.ib(converter=as_array)
    rv: Optional[np.ndarray] = attr.ib(default=None, converter=_optional_array)

    def __attrs_post_init__(self) -> None:
        n = len(self.y)
        if len(self.dates) != n or len(self.r) != n or (
            self.rv is not None and len(self.rv) != n
        ):
            raise DomainError("dates, y, r and rv must have equal lengths")
        if not np.all(np.isfinite(self.y)):
            raise DomainError("returns must be finite")
        if not np.all(self.r > 0):
            raise DomainError("ranges must be strictly positive")

    def __len__(self) -> int:
        return len(self.y)

    def window(self, start: int, stop: int) -> "ReturnRangeSeries":
        return ReturnRangeSeries(
            self.dates[start:stop],
            self.y[start:stop],
            self.r[start:stop],
            None if self.rv is None else self.rv[start:stop],
        )
