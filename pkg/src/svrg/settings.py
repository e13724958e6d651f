"""
Run configuration: a ``key = value`` text file (``#`` starts a comment)
patched by ``key=value`` command-line overrides.
"""
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

import attr

from .config import (
    DEFAULT_BURNIN,
    DEFAULT_C_TH,
    DEFAULT_DRAWS,
    DEFAULT_LATENT_C_TH,
    DEFAULT_TICK,
    EWMA_DECAY,
    LOG_EVERY,
    MAX_PROPOSAL_RETRIES,
    PRIOR_A_PHI,
    PRIOR_ALPHA_NU,
    PRIOR_B_PHI,
    PRIOR_BETA_NU,
    PRIOR_DELTA0,
    PRIOR_GAMMA0,
    PRIOR_N0,
    PRIOR_S0,
    ROLLING_BURNIN,
    ROLLING_DRAWS,
)
from .errors import ConfigError, DomainError, ParseError
from .models import McmcConfig, Priors, SvrgParams, positive_int

logger = getLogger(__package__)

PathLike = Union[str, Path]
TRUE = {"1", "true", "yes", "on"}
FALSE = {"0", "false", "no", "off"}


def to_bool(value: Union[str, bool]) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in TRUE:
        return True
    if text in FALSE:
        return False
    raise DomainError(f"expected a boolean, got {value!r}")


def optional_path(value: Optional[str]) -> Optional[str]:
    return None if value in (None, "") else str(value)


def nonnegative_int(instance: Any, attribute: "attr.Attribute[int]", value: int) -> None:
    if value < 0:
        raise DomainError(f"{attribute.name} must be >= 0, got {value!r}")


@attr.s(frozen=True)
class RunConfig:
    """
    Everything a command needs. MCMC and prior fields feed ``McmcConfig`` and
    ``Priors``; ``phi`` to ``nu2`` and ``n`` describe the series ``simulate``
    draws; ``window`` and the ``rolling_*`` sizes drive rolling forecasts.
    """

    input: Optional[str] = attr.ib(default=None, converter=optional_path)
    output: str = attr.ib(default=".", converter=str)
    seed: int = attr.ib(default=0, converter=int)

    n_burnin: int = attr.ib(default=DEFAULT_BURNIN, converter=int, validator=nonnegative_int)
    n_draws: int = attr.ib(default=DEFAULT_DRAWS, converter=int, validator=positive_int)
    c_th: float = attr.ib(default=DEFAULT_C_TH, converter=float)
    latent_c_th: float = attr.ib(default=DEFAULT_LATENT_C_TH, converter=float)
    max_retries: int = attr.ib(
        default=MAX_PROPOSAL_RETRIES, converter=int, validator=positive_int
    )
    thin: int = attr.ib(default=1, converter=int, validator=positive_int)
    keep_latent: bool = attr.ib(default=False, converter=to_bool)
    log_every: int = attr.ib(default=LOG_EVERY, converter=int, validator=nonnegative_int)
    chains: int = attr.ib(default=1, converter=int, validator=positive_int)

    a_phi: float = attr.ib(default=PRIOR_A_PHI, converter=float)
    b_phi: float = attr.ib(default=PRIOR_B_PHI, converter=float)
    n0: float = attr.ib(default=PRIOR_N0, converter=float)
    s0: float = attr.ib(default=PRIOR_S0, converter=float)
    delta0: float = attr.ib(default=PRIOR_DELTA0, converter=float)
    gamma0: float = attr.ib(default=PRIOR_GAMMA0, converter=float)
    alpha_nu1: float = attr.ib(default=PRIOR_ALPHA_NU, converter=float)
    beta_nu1: float = attr.ib(default=PRIOR_BETA_NU, converter=float)
    alpha_nu2: float = attr.ib(default=PRIOR_ALPHA_NU, converter=float)
    beta_nu2: float = attr.ib(default=PRIOR_BETA_NU, converter=float)

    n: int = attr.ib(default=2000, converter=int, validator=positive_int)
    phi: float = attr.ib(default=0.95, converter=float)
    omega_en: float = attr.ib(default=-0.15, converter=float)
    omega_nn: float = attr.ib(default=0.15, converter=float)
    nu1: float = attr.ib(default=18.0, converter=float)
    nu2: float = attr.ib(default=28.0, converter=float)

    window: int = attr.ib(default=0, converter=int, validator=nonnegative_int)
    rolling_burnin: int = attr.ib(
        default=ROLLING_BURNIN, converter=int, validator=nonnegative_int
    )
    rolling_draws: int = attr.ib(default=ROLLING_DRAWS, converter=int, validator=positive_int)
    workers: int = attr.ib(default=1, converter=int, validator=positive_int)
    processes: bool = attr.ib(default=False, converter=to_bool)
    decay: float = attr.ib(default=EWMA_DECAY, converter=float)
    tick: float = attr.ib(default=DEFAULT_TICK, converter=float)

    @property
    def priors(self) -> Priors:
        return Priors(
            a_phi=self.a_phi,
            b_phi=self.b_phi,
            n0=self.n0,
            s0=self.s0,
            delta0=self.delta0,
            gamma0=self.gamma0,
            alpha_nu1=self.alpha_nu1,
            beta_nu1=self.beta_nu1,
            alpha_nu2=self.alpha_nu2,
            beta_nu2=self.beta_nu2,
        )

    @property
    def mcmc(self) -> McmcConfig:
        return McmcConfig(
            n_burnin=self.n_burnin,
            n_draws=self.n_draws,
            seed=self.seed,
            c_th=self.c_th,
            latent_c_th=self.latent_c_th,
            max_retries=self.max_retries,
            thin=self.thin,
            keep_latent=self.keep_latent,
            log_every=self.log_every,
        )

    @property
    def rolling_mcmc(self) -> McmcConfig:
        return self.mcmc.evolve(
            n_burnin=self.rolling_burnin,
            n_draws=self.rolling_draws,
            keep_latent=False,
            log_every=0,
        )

    @property
    def true_params(self) -> SvrgParams:
        return SvrgParams(self.phi, self.omega_en, self.omega_nn, self.nu1, self.nu2)

    def check(self) -> "RunConfig":
        """Build every derived object once so bad values fail at launch."""
        try:
            for derived in (self.priors, self.mcmc, self.rolling_mcmc):
                logger.debug("configured %r", derived)
        except DomainError as error:
            raise ConfigError(f"invalid configuration: {error}") from None
        if self.input is not None and not Path(self.input).is_file():
            raise ConfigError(f"input file {self.input!r} does not exist")
        if not Path(self.output).is_dir():
            raise ConfigError(f"output directory {self.output!r} does not exist")
        return self


FIELDS = frozenset(field.name for field in attr.fields(RunConfig))


def parse_assignment(text: str) -> Optional[Tuple[str, str]]:
    """Split ``key = value``; blank lines and comments give None."""
    text = text.split("#", 1)[0].strip()
    if not text:
        return None
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ValueError(f"expected key = value, got {text!r}")
    return key.strip().replace("-", "_"), value.strip()


def read_config_file(path: PathLike) -> Dict[str, str]:
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as error:
        raise ParseError(error.strerror or str(error), str(path)) from None
    for number, line in enumerate(lines, 1):
        try:
            assignment = parse_assignment(line)
        except ValueError as error:
            raise ParseError(str(error), str(path), number) from None
        if assignment is not None:
            key, value = assignment
            values[key] = value
    return values


def load_config(
    path: Optional[PathLike] = None, overrides: Iterable[str] = (), **values: Any
) -> RunConfig:
    """
    Merge, lowest precedence first: field defaults, the file at ``path``,
    keyword ``values``, then ``overrides``. Unknown keys are reported together.
    """
    merged: Dict[str, Any] = {}
    if path is not None:
        merged.update(read_config_file(path))
    merged.update(values)
    for override in overrides:
        try:
            assignment = parse_assignment(override)
        except ValueError as error:
            raise ConfigError(str(error)) from None
        if assignment is not None:
            merged[assignment[0]] = assignment[1]
    unknown = sorted(set(merged) - FIELDS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}", unknown)
    try:
        return RunConfig(**merged)
    except (TypeError, ValueError) as error:
        raise ConfigError(f"invalid configuration: {error}") from None
