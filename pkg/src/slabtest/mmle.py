"""Marginal maximum likelihood calibration of the spike weight."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from slabtest import stdnorm
from slabtest.exceptions import DomainError
from slabtest.priors import parse_prior

BLOCK = 1_000_000
W_TOL = 1e-12
MAX_ITER = 120


@dataclass(frozen=True)
class ObservationBatch:
    """Observed vector X and, in simulations, the true mean vector."""

    x: np.ndarray
    truth: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        if x.size < 1:
            raise DomainError("an observation batch needs at least one value")
        if not np.all(np.isfinite(x)):
            raise DomainError("observations must be finite")
        object.__setattr__(self, "x", x)
        if self.truth is not None:
            truth = np.asarray(self.truth, dtype=float).ravel()
            if truth.shape != x.shape:
                raise DomainError(
                    f"truth has length {truth.size}, observations have {x.size}"
                )
            object.__setattr__(self, "truth", truth)

    @property
    def n(self):
        return self.x.size

    @property
    def sigma0(self):
        """Number of nonzero true means (None when truth is unknown)."""
        if self.truth is None:
            return None
        return int(np.count_nonzero(self.truth))


@dataclass(frozen=True)
class WeightEstimate:
    w_hat: float
    at_lower_boundary: bool
    at_upper_boundary: bool
    score_at_root: float
    lower: float


def log_density_ratios(prior, x):
    """log(g/phi) at every coordinate, computed in blocks to cap temporaries."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    flat_in, flat_out = x.ravel(), out.ravel()
    for start in range(0, flat_in.size, BLOCK):
        sl = slice(start, start + BLOCK)
        flat_out[sl] = prior.log_density_ratio(flat_in[sl])
    return out


def _beta_w_from_beta(beta, w):
    # beta / (1 + w beta) written as 1 / (1/beta + w): exact 0 at beta == 0 and
    # 1/w at beta == inf.  1/beta + w never vanishes because beta > -1.
    with np.errstate(divide="ignore", over="ignore"):
        return 1.0 / (1.0 / beta + w)


def beta_w(prior, x, w):
    """beta(x, w) = beta(x) / (1 + w beta(x))."""
    prior = parse_prior(prior)
    return _beta_w_from_beta(prior.beta(x), w)


class ScoreFunction:
    """Score S(w) and log-likelihood L(w) for a fixed batch.

    The per-coordinate beta values are computed once on construction and
    reused by every evaluation.
    """

    def __init__(self, prior, x):
        self.prior = parse_prior(prior)
        x = x.x if isinstance(x, ObservationBatch) else np.asarray(x, dtype=float)
        self.n = x.size
        self.log_ratio = log_density_ratios(self.prior, x)
        with np.errstate(over="ignore"):
            self.beta = np.expm1(self.log_ratio)
        self._sum_log_phi = float(np.sum(stdnorm.log_phi(x)))

    def score(self, w):
        return float(np.sum(_beta_w_from_beta(self.beta, w)))

    def log_marginal(self, w):
        if w == 0:
            return self._sum_log_phi
        # log(1 + w beta) = log((1 - w) + w g/phi), safe when g/phi overflows
        with np.errstate(divide="ignore"):
            terms = np.logaddexp(np.log1p(-w), np.log(w) + self.log_ratio)
        return self._sum_log_phi + float(np.sum(terms))

    def maximise(self, lower=None):
        """Maximiser of L over [lower, 1] (lower defaults to 1/n)."""
        if lower is None:
            lower = 1.0 / self.n
        if not (0 < lower < 1):
            raise DomainError(f"lower bound must be in (0, 1), got {lower!r}")
        s_lo = self.score(lower)
        if s_lo <= 0:
            return WeightEstimate(lower, True, False, s_lo, lower)
        s_hi = self.score(1.0)
        if s_hi >= 0:
            return WeightEstimate(1.0, False, True, s_hi, lower)
        lo, hi = lower, 1.0
        for _ in range(MAX_ITER):
            if hi - lo <= W_TOL:
                break
            mid = 0.5 * (lo + hi)
            if self.score(mid) > 0:
                lo = mid
            else:
                hi = mid
        w = 0.5 * (lo + hi)
        return WeightEstimate(w, False, False, self.score(w), lower)


def score(prior, batch, w):
    """S(w) = sum_i beta(X_i, w), the derivative of the log marginal likelihood."""
    return ScoreFunction(prior, batch).score(w)


def log_marginal(prior, batch, w):
    """L(w) = sum log phi(X_i) + sum log(1 + w beta(X_i))."""
    return ScoreFunction(prior, batch).log_marginal(w)


def estimate_weight(prior, batch, lower=None):
    """Marginal maximum likelihood estimate of the slab weight.

    Parameters
    ----------
    prior : SlabPrior or str
    batch : ObservationBatch or array_like
    lower : float, optional
        Lower end of the search interval; defaults to 1/n.

    Returns
    -------
    WeightEstimate
        Interior roots of the (decreasing) score are located by bisection to
        1e-12 in w; otherwise the relevant boundary is returned and flagged.
    """
    return ScoreFunction(prior, batch).maximise(lower)


def universal_lower_bound(prior, n):
    """The weight w with zeta(w) = sqrt(2 log n), i.e. 1/beta(sqrt(2 log n)).

    This is the lower end used by the classical EbayesThresh calibration,
    kept for comparison runs.
    """
    prior = parse_prior(prior)
    b = float(prior.beta(np.sqrt(2.0 * np.log(n))))
    if b <= 1:
        return 1.0
    return 1.0 / b
