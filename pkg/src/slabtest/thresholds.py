"""Pseudo-thresholds converting value rules into |X| thresholding rules.

For a slab prior with convolved density g:

* ``xi(u)``   solves phi(x)/g(x) = u        (l-value threshold)
* ``zeta(w)`` solves beta(x) = 1/w          (equals xi(w / (1 + w)))
* ``chi(u)``  solves Phibar(x)/Gbar(x) = u  (q-value threshold)

each on x >= 0, where the forward maps are monotone.  Roots are found by
bracketed bisection on the log of the forward map.
"""

import math

import numpy as np

from slabtest import stdnorm
from slabtest.exceptions import DomainError
from slabtest.priors import parse_prior

MAX_ITER = 200


def mixing_ratio(w, t):
    """r(w, t) = w t / ((1 - w)(1 - t)).

    >>> round(mixing_ratio(0.1, 0.2), 6)
    0.027778
    """
    w = np.asarray(w, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any((w < 0) | (w >= 1)) or np.any((t < 0) | (t >= 1)):
        raise DomainError("mixing_ratio requires w and t in [0, 1)")
    r = w * t / ((1.0 - w) * (1.0 - t))
    return r if r.ndim else float(r)


def invert_increasing(f, target, guess, xtol=1e-13):
    """Solve f(x) = target for x >= 0 with f increasing and f(0) <= target.

    The upper bracket starts at ``guess`` and doubles until it clears the
    target.  Plain bisection afterwards; no derivative is needed.
    """
    lo = 0.0
    hi = max(float(guess), 1.0)
    for _ in range(MAX_ITER):
        if f(hi) >= target:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise DomainError(f"could not bracket target {target!r}")
    for _ in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol * max(1.0, hi) or mid in (lo, hi):
            break
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _asymptotic_guess(u):
    return math.sqrt(2.0 * max(math.log(1.0 / u), 0.0)) + 5.0


class ThresholdContext:
    """Threshold functions xi, zeta and chi for one slab prior.

    Parameters
    ----------
    prior : SlabPrior or str
        The slab prior (or its identifier).
    cache : bool
        Memoise roots per (function, argument).  Results never depend on it.
    """

    def __init__(self, prior, cache=True):
        self.prior = parse_prior(prior)
        self._cache = {} if cache else None
        self.xi_upper = self.prior.phi_over_g_at_zero()

    def _lr(self, x):
        return float(self.prior.log_density_ratio(x))

    def _log_tail_ratio(self, x):
        # log(Gbar/Phibar)(x), increasing from 0
        return float(self.prior.log_slab_tail(x) - stdnorm.log_upper_tail(x))

    def _memo(self, key, compute):
        if self._cache is None:
            return compute()
        if key not in self._cache:
            self._cache[key] = compute()
        return self._cache[key]

    def xi(self, u):
        """Inverse of phi/g on [0, inf); defined for 0 < u <= (phi/g)(0)."""
        u = float(u)
        if not (u > 0) or u > self.xi_upper * (1 + 1e-12):
            raise DomainError(
                f"xi requires u in (0, {self.xi_upper!r}] = (0, (phi/g)(0)], got {u!r}"
            )
        if u >= self.xi_upper:
            return 0.0
        target = -math.log(u)
        return self._memo(
            ("xi", u), lambda: invert_increasing(self._lr, target, _asymptotic_guess(u))
        )

    def zeta(self, w):
        """beta^{-1}(1/w) for w in (0, 1]."""
        w = float(w)
        if not (0 < w <= 1):
            raise DomainError(f"zeta requires w in (0, 1], got {w!r}")
        target = math.log1p(1.0 / w)
        return self._memo(
            ("zeta", w), lambda: invert_increasing(self._lr, target, _asymptotic_guess(w))
        )

    def chi(self, u):
        """Inverse of Phibar/Gbar on [0, inf); defined for 0 < u <= 1."""
        u = float(u)
        if not (0 < u <= 1):
            raise DomainError(f"chi requires u in (0, 1], got {u!r}")
        if u == 1.0:
            return 0.0
        target = -math.log(u)
        return self._memo(
            ("chi", u),
            lambda: invert_increasing(self._log_tail_ratio, target, _asymptotic_guess(u)),
        )

    def l_threshold(self, w, t):
        """|X| cutoff equivalent to the rule l-value <= t at weight w.

        Returns 0.0 when every coordinate is rejected (r(w, t) beyond the xi
        domain, including w = 1).
        """
        if w >= 1:
            return 0.0
        r = mixing_ratio(w, t)
        if r >= self.xi_upper:
            return 0.0
        if r == 0:
            return math.inf
        return self.xi(r)

    def q_threshold(self, w, t):
        """|X| cutoff equivalent to the rule q-value <= t at weight w."""
        if w >= 1:
            return 0.0
        r = mixing_ratio(w, t)
        if r >= 1:
            return 0.0
        if r == 0:
            return math.inf
        return self.chi(r)
