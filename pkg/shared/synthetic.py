"""
Seeded synthetic ILI, search and revision data drawn from the linear-Gaussian model.
"""
from dataclasses import dataclass, field
from datetime import date
from typing import Any, Dict, Sequence

import numpy as np
import structlog
from scipy.linalg import LinAlgError, cholesky

from shared.data_model import (
    EpiWeek,
    PanelSource,
    RevisionRecord,
    SearchPanel,
    Unit,
    VintageSeries,
    WeeklySeries,
    week_range,
)
from shared.errors import ConfigError, NonPositiveDefiniteError
from shared.hmm import HmmParams
from shared.transforms import logit, logit_to_percent

logger = structlog.get_logger()

DEFAULT_START = EpiWeek(2004, 1, date(2004, 1, 10))
PLANTED_LAGS = (0.55, 0.2, 0.15)
STATIONARY_PROPORTION = 0.02
SEARCH_LEVEL = 2.5


def _vector(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    if array.ndim != 1:
        raise ConfigError(f"{name} must be a vector")
    array.setflags(write=False)
    return array


def is_stationary(alpha) -> bool:
    """True when every root of 1 - sum_j alpha_j z^j lies outside the unit circle."""
    alpha = np.asarray(alpha, dtype=float)
    if not np.any(alpha):
        return True
    roots = np.roots(np.r_[-alpha[::-1], 1.0])
    return bool(np.all(np.abs(roots) > 1.0))


@dataclass(frozen=True)
class SyntheticSpec:
    mu_y: float
    alpha: np.ndarray
    sigma2: float
    mu_x: np.ndarray
    beta: np.ndarray
    q: np.ndarray
    n_weeks: int = 400
    seed: int = 0
    start: EpiWeek = DEFAULT_START
    burn_in: int = 500
    delta: float = 0.5
    revision_lags: int = 0
    revision_sd: float = 0.0
    terms: Sequence[str] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "alpha", _vector(self.alpha, "alpha"))
        object.__setattr__(self, "mu_x", _vector(self.mu_x, "mu_x"))
        object.__setattr__(self, "beta", _vector(self.beta, "beta"))
        q = np.array(self.q, dtype=float, copy=True)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        k = self.mu_x.shape[0]
        if self.beta.shape[0] != k or q.shape != (k, k):
            raise ConfigError("mu_x, beta and Q must agree on the number of terms")
        if not self.sigma2 > 0:
            raise ConfigError("sigma2 must be positive")
        if not is_stationary(self.alpha):
            raise ConfigError("autoregressive coefficients are not stationary")
        if self.n_weeks < 1 or self.burn_in < 0:
            raise ConfigError("n_weeks must be positive and burn_in non-negative")
        if self.revision_lags < 0 or self.revision_sd < 0:
            raise ConfigError("revision settings must be non-negative")
        if not self.terms:
            object.__setattr__(self, "terms", tuple(f"term_{i + 1:03d}" for i in range(k)))
        elif len(self.terms) != k:
            raise ConfigError("terms must name every search column")
        else:
            object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def n_lags(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_terms(self) -> int:
        return self.mu_x.shape[0]

    @property
    def stationary_mean(self) -> float:
        return self.mu_y / (1.0 - float(np.sum(self.alpha)))

    def hmm_params(self) -> HmmParams:
        return HmmParams(self.mu_y, self.alpha, self.sigma2, self.mu_x, self.beta, self.q)

    @classmethod
    def planted(
        cls,
        n_lags: int = 52,
        n_terms: int = 100,
        informative_terms: int = 10,
        **overrides: Any,
    ) -> "SyntheticSpec":
        """
        Sparse ground truth: three non-zero lags (1, 2 and the last) and the first
        `informative_terms` search terms loading on ILI.
        """
        alpha = np.zeros(n_lags)
        positions = sorted(p for p in {0, 1, n_lags - 1} if 0 <= p < n_lags)
        for position, value in zip(positions, PLANTED_LAGS):
            alpha[position] = value
        mean = logit(STATIONARY_PROPORTION)
        informative = min(informative_terms, n_terms)
        beta = np.zeros(n_terms)
        beta[:informative] = np.linspace(1.0, 0.5, informative) if informative > 1 else 1.0
        params = dict(
            mu_y=mean * (1.0 - alpha.sum()),
            alpha=alpha,
            sigma2=0.04,
            mu_x=SEARCH_LEVEL - beta * mean,
            beta=beta,
            q=0.05 * np.eye(n_terms),
        )
        params.update(overrides)
        return cls(**params)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "SyntheticSpec":
        """
        Build from a JSON-style mapping. Shape keys (n_lags, n_terms,
        informative_terms) choose the planted defaults; any model parameter given
        explicitly replaces them.
        """
        payload = dict(payload)
        shape = {k: payload.pop(k) for k in ("n_lags", "n_terms", "informative_terms") if k in payload}
        if "start" in payload:
            start = payload.pop("start")
            try:
                payload["start"] = EpiWeek(int(start["year"]), int(start["week"]), date.fromisoformat(start["end_date"]))
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigError("start must give year, week and end_date") from e
        if "q_diag" in payload:
            payload["q"] = np.diag(np.asarray(payload.pop("q_diag"), dtype=float))
        known = set(cls.__dataclass_fields__)
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown synthetic settings: {', '.join(sorted(unknown))}")
        return cls.planted(**shape, **payload)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mu_y": self.mu_y,
            "alpha": self.alpha.tolist(),
            "sigma2": self.sigma2,
            "mu_x": self.mu_x.tolist(),
            "beta": self.beta.tolist(),
            "q": self.q.tolist(),
            "n_weeks": self.n_weeks,
            "seed": self.seed,
            "start": {"year": self.start.year, "week": self.start.week, "end_date": self.start.end_date.isoformat()},
            "burn_in": self.burn_in,
            "delta": self.delta,
            "revision_lags": self.revision_lags,
            "revision_sd": self.revision_sd,
            "terms": list(self.terms),
        }


@dataclass(frozen=True)
class SyntheticData:
    vintages: VintageSeries
    panel: SearchPanel
    latent: np.ndarray
    truth: Dict[str, Any]


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """
    Simulate the latent logit ILI path and search observations, then map them to
    percent ILI and raw search frequencies.

    Raw frequencies are exp(X) - delta clipped to [0, 100]; the number of clipped
    values is recorded in the truth record.
    """
    rng = np.random.default_rng(spec.seed)
    n_lags = spec.n_lags
    total = spec.burn_in + spec.n_weeks
    y = np.empty(total + n_lags)
    y[:n_lags] = spec.stationary_mean
    shocks = rng.normal(0.0, np.sqrt(spec.sigma2), size=total)
    for i in range(total):
        lags = y[i:i + n_lags][::-1]
        y[n_lags + i] = spec.mu_y + float(spec.alpha @ lags) + shocks[i]
    latent = y[n_lags + spec.burn_in:]

    try:
        factor = cholesky(spec.q, lower=True) if spec.n_terms else np.zeros((0, 0))
    except LinAlgError as e:
        raise NonPositiveDefiniteError("Q is not positive definite") from e
    noise = rng.standard_normal((spec.n_weeks, spec.n_terms)) @ factor.T
    observed = spec.mu_x + latent[:, None] * spec.beta + noise
    raw = np.exp(observed) - spec.delta
    clipped = int(np.count_nonzero((raw < 0) | (raw > 100)))
    raw = np.clip(raw, 0.0, 100.0)
    if clipped:
        logger.warning("Clipped synthetic search frequencies", count=clipped)

    percent = logit_to_percent(latent)
    finalized = WeeklySeries(spec.start, percent, Unit.PERCENT, "wili")
    records = _revisions(spec, percent, rng)
    vintages = VintageSeries(records, finalized)
    panel = SearchPanel(spec.start, spec.terms, raw, PanelSource.SCALED)

    truth = spec.to_dict()
    truth.update(
        generator="numpy.random.default_rng (PCG64)",
        clipped_values=clipped,
        stationary_mean=spec.stationary_mean,
        nonzero_lags=[int(j) + 1 for j in np.flatnonzero(spec.alpha)],
        informative_terms=[spec.terms[i] for i in np.flatnonzero(spec.beta)],
    )
    logger.info("Generated synthetic data", weeks=spec.n_weeks, terms=spec.n_terms, seed=spec.seed)
    return SyntheticData(vintages, panel, latent, truth)


def _revisions(spec: SyntheticSpec, percent: np.ndarray, rng: np.random.Generator):
    """
    Earlier publications of each week, multiplicatively perturbed; the perturbation
    shrinks to zero at the last revision, which equals the finalized value.
    """
    lags = spec.revision_lags
    if lags == 0:
        return ()
    calendar = week_range(spec.start, spec.n_weeks + lags)
    draws = rng.standard_normal((spec.n_weeks, lags))
    records = []
    for i, final in enumerate(percent):
        for k in range(1, lags + 1):
            shrink = (lags - k) / lags
            value = float(np.clip(final * np.exp(spec.revision_sd * shrink * draws[i, k - 1]), 1e-6, 99.0))
            records.append(RevisionRecord(calendar[i], calendar[i + k], value))
    return tuple(records)
