"""Score moments, the strong-signal weight w* and the SC diagnostic f_n.

Definitions, for beta(t, w) = beta(t) / (1 + w beta(t)):

    m_tilde(w)  = -int beta(t, w) phi(t) dt
    m1(tau, w)  =  int beta(t, w) phi(t - tau) dt
    m2(tau, w)  =  int beta(t, w)^2 phi(t - tau) dt
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from slabtest import stdnorm
from slabtest.exceptions import DomainError
from slabtest.priors import parse_prior
from slabtest.thresholds import ThresholdContext, mixing_ratio

HALF_WIDTH = 40.0


@dataclass(frozen=True)
class WStar:
    w: float
    saturated: bool
    residual: float


class MomentContext:
    """Quadrature evaluation of the score moments for one prior.

    Parameters
    ----------
    prior : SlabPrior or str
    rtol : float
        Relative tolerance for every integral, in (0, 1e-3).
    """

    def __init__(self, prior, rtol=1e-9):
        if not (0 < rtol < 1e-3):
            raise DomainError(f"quadrature tolerance must be in (0, 1e-3), got {rtol!r}")
        self.prior = parse_prior(prior)
        self.rtol = rtol
        self.thresholds = ThresholdContext(self.prior)
        self._mt_cache = {}

    def beta_w(self, t, w):
        with np.errstate(divide="ignore", over="ignore"):
            b = np.expm1(self.prior.log_density_ratio(t))
            return 1.0 / (1.0 / b + w)

    def _integrate(self, f, lo, hi, breaks):
        pts = sorted({lo, hi, *(b for b in breaks if lo < b < hi)})
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=self.rtol, limit=200)
            total += val
        return total

    def _check_w(self, w):
        if not (0 < w <= 1):
            raise DomainError(f"w must be in (0, 1], got {w!r}")

    def _expect(self, tau, w, power):
        # E_tau[beta(X, w)^power] over [tau - 40, tau + 40]; outside, phi(t - tau)
        # is below double precision and beta(t, w) is bounded by 1/(w ^ c1)
        self._check_w(w)
        z = self.thresholds.zeta(w)
        f = lambda t: float(self.beta_w(t, w)) ** power * float(stdnorm.phi(t - tau))
        lo, hi = tau - HALF_WIDTH, tau + HALF_WIDTH
        body = self._integrate(f, lo, hi, [-z, 0.0, z, tau])
        tail = (float(self.beta_w(lo, w)) ** power + float(self.beta_w(hi, w)) ** power) * float(
            stdnorm.upper_tail(HALF_WIDTH)
        )
        return body + tail

    def m_tilde(self, w):
        """-E_0 beta(X, w): nonnegative and increasing in w."""
        w = float(w)
        if w not in self._mt_cache:
            self._mt_cache[w] = -self._expect(0.0, w, 1)
        return self._mt_cache[w]

    def m1(self, tau, w):
        return self._expect(float(tau), float(w), 1)

    def m2(self, tau, w):
        return self._expect(float(tau), float(w), 2)

    def solve_wstar(self, n, s):
        """Weight w* with (n - s) w m_tilde(w) = s.

        Bisection on log w over [s / ((n - s) m_tilde(1)), 1]; the map
        w -> w m_tilde(w) is increasing.  Returns w = 1 flagged as saturated
        when (n - s) m_tilde(1) < s.
        """
        n, s = int(n), int(s)
        if not (1 <= s < n):
            raise DomainError(f"solve_wstar needs 1 <= s < n, got s={s}, n={n}")
        target = s / (n - s)
        m_one = self.m_tilde(1.0)
        if m_one < target:
            return WStar(1.0, True, m_one / target - 1.0)
        lo, hi = math.log(target / m_one), 0.0
        h = lambda lw: math.exp(lw) * self.m_tilde(math.exp(lw)) / target - 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if hi - lo < 1e-13:
                break
            if h(mid) < 0:
                lo = mid
            else:
                hi = mid
        w = math.exp(0.5 * (lo + hi))
        return WStar(w, False, h(math.log(w)))

    def f_n(self, u, w):
        """E_0[l(X; w) 1{q(X; w) <= u}] / P_0(q(X; w) <= u).

        The integral runs over x >= chi(r(w, u)); the normal density is scaled
        by Phibar(chi) inside the integrand so the ratio keeps full precision
        far in the tail.
        """
        if not (0 < u < 1 and 0 < w < 1):
            raise DomainError("f_n requires u and w in (0, 1)")
        r = mixing_ratio(w, u)
        if r > 1:
            raise DomainError(f"r(w, u) = {r!r} > 1: chi is undefined")
        c = self.thresholds.chi(r)
        log_tail = float(stdnorm.log_upper_tail(c))
        logit_w = float(special.logit(w))

        def integrand(y):
            x = c + y
            ell = special.expit(-(logit_w + float(self.prior.log_density_ratio(x))))
            return ell * math.exp(float(stdnorm.log_phi(x)) - log_tail)

        return self._integrate(integrand, 0.0, HALF_WIDTH, [1.0, 3.0])

    def solve_u_star(self, t, w):
        """u in [t, 1 - w] with f_n(u) u = t."""
        if not (0 < t < 1):
            raise DomainError(f"t must be in (0, 1), got {t!r}")
        lo, hi = t, (1.0 - w) * (1.0 - 1e-12)
        g = lambda u: self.f_n(u, w) * u - t
        if g(hi) < 0:
            raise DomainError(f"f_n(u) u stays below t={t} on [t, 1 - w]")
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if hi - lo < 1e-10:
                break
            if g(mid) < 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def m_tilde(prior, w):
    return MomentContext(prior).m_tilde(w)


def m1(prior, tau, w):
    return MomentContext(prior).m1(tau, w)


def m2(prior, tau, w):
    return MomentContext(prior).m2(tau, w)


def solve_wstar(prior, n, s):
    return MomentContext(prior).solve_wstar(n, s)


def f_n(prior, u, w):
    return MomentContext(prior).f_n(u, w)
