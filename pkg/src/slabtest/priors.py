"""Slab priors for the spike-and-slab model.

A slab prior is described by its raw density ``gamma`` and the convolution
``g = gamma * phi``.  Every quantity the procedures need is exposed in a
vectorised, log-space friendly form:

========================  ==========================================
``slab_raw_density(u)``   gamma(u)
``slab_density(x)``       g(x)
``slab_tail(x)``          upper tail of g, Gbar(x) = int_x^inf g
``log_density_ratio(x)``  log(g(x) / phi(x))
``beta(x)``               g(x)/phi(x) - 1
``half_conv_neg(x)``      g_-(x) = int_{-inf}^0 phi(x - u) gamma(u) du
========================  ==========================================

Two closed-form priors are provided (:class:`QuasiCauchyPrior`,
:class:`LaplacePrior`) along with :class:`QuadraturePrior`, which evaluates
the same quantities by numerical integration of ``gamma`` and serves as an
independent check of the closed forms.
"""

from abc import ABC, abstractmethod

import numpy as np
from scipy import integrate

from slabtest import stdnorm
from slabtest.exceptions import DomainError

# phi(u) < 1e-347 beyond this, i.e. below double precision
TRUNCATION = 40.0

_SQRT_HALF_PI = np.sqrt(np.pi / 2.0)


def _as_float_array(x):
    return np.asarray(x, dtype=float)


def _finish(out):
    return out if out.ndim else out[()]


class SlabPrior(ABC):
    """Interface shared by all slab priors.

    Subclasses implement ``slab_raw_density``, ``log_density_ratio``,
    ``_log_tail_pos`` (log Gbar on x >= 0) and ``_half_conv_ratio_pos``
    (g_-/phi on x >= 0); everything else is derived here.
    """

    name = "abstract"
    #: Lipschitz constant of log gamma
    lipschitz = np.inf
    #: tail index: Gbar(y) ~ g(y) y^(kappa - 1)
    kappa = np.nan

    @property
    def parameters(self):
        return ()

    @property
    def id(self):
        """Canonical identifier, parseable by :func:`parse_prior`."""
        return self.name

    def __repr__(self):
        return f"{type(self).__name__}({self.id!r})"

    def __eq__(self, other):
        return isinstance(other, SlabPrior) and self.id == other.id

    def __hash__(self):
        return hash(self.id)

    @abstractmethod
    def slab_raw_density(self, u):
        """Raw slab density gamma(u)."""

    @abstractmethod
    def log_density_ratio(self, x):
        """log(g/phi)(x), accurate for all finite x."""

    @abstractmethod
    def _log_tail_pos(self, x):
        """log Gbar(x) for x >= 0."""

    @abstractmethod
    def _half_conv_ratio_pos(self, x):
        """g_-(x) / phi(x) for x >= 0."""

    def sample_slab(self, rng, size):
        """Draw ``size`` values from gamma using a numpy Generator."""
        raise NotImplementedError(f"{self.id} has no sampler")

    def log_slab_density(self, x):
        x = _as_float_array(x)
        return stdnorm.log_phi(x) + self.log_density_ratio(x)

    def slab_density(self, x):
        """Convolved slab density g(x)."""
        return np.exp(self.log_slab_density(x))

    def beta(self, x):
        """g(x)/phi(x) - 1, in (-1, inf)."""
        return np.expm1(self.log_density_ratio(x))

    def log_slab_tail(self, x):
        """log Gbar(x); negative arguments go through Gbar(x) = 1 - Gbar(-x)."""
        x = _as_float_array(x)
        out = np.empty(x.shape)
        pos = x >= 0
        out[pos] = self._log_tail_pos(x[pos])
        if np.any(~pos):
            out[~pos] = np.log1p(-np.exp(self._log_tail_pos(-x[~pos])))
        return _finish(out)

    def slab_tail(self, x):
        """Upper tail Gbar(x) = int_x^inf g."""
        return np.exp(self.log_slab_tail(x))

    def half_conv_ratio(self, x):
        """g_-(x) / phi(x); finite for all x >= 0 and bounded there."""
        x = _as_float_array(x)
        out = np.empty(x.shape)
        pos = x >= 0
        out[pos] = self._half_conv_ratio_pos(x[pos])
        if np.any(~pos):
            # g_-(x) = g(x) - g_-(-x); phi is even
            xn = x[~pos]
            out[~pos] = np.exp(self.log_density_ratio(xn)) - self._half_conv_ratio_pos(-xn)
        return _finish(out)

    def half_conv_neg(self, x):
        """g_-(x) = int_{-inf}^0 phi(x - u) gamma(u) du."""
        x = _as_float_array(x)
        return stdnorm.phi(x) * self.half_conv_ratio(x)

    def phi_over_g_at_zero(self):
        """(phi/g)(0), the upper end of the domain of the xi threshold."""
        return float(np.exp(-self.log_density_ratio(0.0)))


class QuasiCauchyPrior(SlabPrior):
    """The parameter-free quasi-Cauchy slab.

    ``gamma`` is the scale mixture theta | V ~ N(0, (1 - V)/V) with
    V ~ Beta(1/2, 1), which yields g(x) = phi(0) (1 - exp(-x^2/2)) / x^2.
    """

    name = "quasi-cauchy"
    lipschitz = 1.0
    kappa = 2.0

    # below this |x|, (1 - exp(-x^2/2)) / x^2 switches to its Taylor series
    _series_cut = 1e-3

    def slab_raw_density(self, u):
        u = np.abs(_as_float_array(u))
        flat = np.atleast_1d(u)
        out = 1.0 - flat * stdnorm.mills_ratio(flat)
        far = flat >= 3.0
        if np.any(far):
            # 1 - uR(u) cancels for large u; use R(u) = 1/(u + c) with c from
            # the continued fraction c = 1/(u + 2/(u + 3/(u + ...)))
            uf = flat[far]
            t = uf.copy()
            for k in range(80, 1, -1):
                t = uf + k / t
            c = 1.0 / t
            out[far] = c / (uf + c)
        return stdnorm.PHI0 * out.reshape(u.shape)[()]

    def slab_density(self, x):
        x = _as_float_array(x)
        x2 = x * x
        small = np.abs(x) < self._series_cut
        with np.errstate(divide="ignore", invalid="ignore"):
            core = np.where(small, 0.5 - x2 / 8.0 + x2 * x2 / 48.0, -np.expm1(-0.5 * x2) / x2)
        return stdnorm.PHI0 * core

    def log_slab_density(self, x):
        return np.log(self.slab_density(x))

    def log_density_ratio(self, x):
        x = _as_float_array(x)
        y = 0.5 * x * x
        small = np.abs(x) < self._series_cut
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            # expm1(y)/x^2 = 1/2 + x^2/8 + x^4/48 + ...
            series = np.log(0.5 + y / 4.0 + y * y / 12.0)
            big = y > 1.0
            log_expm1 = np.where(big, y + np.log1p(-np.exp(-y)), np.log(np.expm1(y)))
            out = np.where(small, series, log_expm1 - 2.0 * np.log(np.abs(x)))
        return _finish(np.asarray(out))

    def _log_tail_pos(self, x):
        # Gbar(x) = Phibar(x) + (phi(0) - phi(x)) / x; checked against quadrature in tests
        with np.errstate(divide="ignore", invalid="ignore"):
            second = np.where(x > 0, stdnorm.PHI0 * -np.expm1(-0.5 * x * x) / x, 0.0)
        return np.log(stdnorm.upper_tail(x) + second)

    def _half_conv_ratio_pos(self, x):
        # g_-/phi = phi(0) * (R(x) - R(0) + x) / x^2 with R the Mills ratio,
        # from R' = xR - 1 applied to the scale-mixture form of gamma
        c = _SQRT_HALF_PI
        small = x < 5e-3
        with np.errstate(divide="ignore", invalid="ignore"):
            direct = (stdnorm.mills_ratio(x) - c + x) / (x * x)
        series = c / 2.0 - x / 3.0 + c * x * x / 8.0 - x**3 / 15.0
        return stdnorm.PHI0 * np.where(small, series, direct)

    def sample_slab(self, rng, size):
        v = rng.random(size) ** 2  # Beta(1/2, 1)
        v = np.maximum(v, np.finfo(float).tiny)
        return rng.standard_normal(size) * np.sqrt((1.0 - v) / v)


class LaplacePrior(SlabPrior):
    """Laplace slab gamma(u) = (a/2) exp(-a|u|)."""

    name = "laplace"
    kappa = 1.0

    def __init__(self, a=0.5):
        a = float(a)
        if not (np.isfinite(a) and a > 0):
            raise DomainError(f"Laplace scale must be positive, got {a}")
        self.a = a

    @property
    def lipschitz(self):
        return self.a

    @property
    def parameters(self):
        return (self.a,)

    @property
    def id(self):
        return f"laplace:{self.a:g}"

    def slab_raw_density(self, u):
        u = _as_float_array(u)
        return 0.5 * self.a * np.exp(-self.a * np.abs(u))

    def log_density_ratio(self, x):
        x = _as_float_array(x)
        a = self.a
        out = np.log(0.5 * a) + np.logaddexp(
            stdnorm.log_mills_ratio(a - x), stdnorm.log_mills_ratio(a + x)
        )
        return _finish(np.asarray(out))

    def _log_tail_pos(self, x):
        a = self.a
        lead = 0.5 * a * a - a * x + stdnorm.log_upper_tail(a - x)
        trail = 0.5 * a * a + a * x + stdnorm.log_upper_tail(a + x)
        with np.errstate(divide="ignore"):
            mix = np.log(0.5) + lead + np.log1p(-np.exp(trail - lead))
        return np.logaddexp(mix, stdnorm.log_upper_tail(x))

    def _half_conv_ratio_pos(self, x):
        # g_-(x) = (a/2) e^{a^2/2} e^{ax} Phibar(x + a)
        return 0.5 * self.a * stdnorm.mills_ratio(x + self.a)

    def sample_slab(self, rng, size):
        mag = rng.exponential(1.0 / self.a, size)
        return np.where(rng.random(size) < 0.5, -mag, mag)


def cauchy_density(u):
    u = _as_float_array(u)
    return 1.0 / (np.pi * (1.0 + u * u))


class QuadraturePrior(SlabPrior):
    """Slab prior evaluated by adaptive quadrature of an arbitrary gamma.

    Slow (one QUADPACK call per point), meant for cross-checking closed forms
    and for slabs with no closed form such as the true Cauchy.

    Parameters
    ----------
    gamma_name : str
        Identifier of the raw slab: ``"cauchy"``, ``"quasi-cauchy"`` or
        ``"laplace:<a>"``.
    rtol : float
        Relative tolerance passed to the integrator.
    """

    def __init__(self, gamma_name, rtol=1e-11):
        self.gamma_name = gamma_name
        self.rtol = rtol
        if gamma_name == "cauchy":
            self._gamma = cauchy_density
            self.lipschitz, self.kappa = 1.0, 2.0
            self._sampler = lambda rng, size: rng.standard_cauchy(size)
        else:
            base = parse_prior(gamma_name)
            if isinstance(base, QuadraturePrior):
                raise DomainError("nested quadrature priors are not supported")
            self._gamma = base.slab_raw_density
            self.lipschitz, self.kappa = base.lipschitz, base.kappa
            self._sampler = base.sample_slab

    name = "quadrature"

    @property
    def id(self):
        return f"quadrature:{self.gamma_name}"

    def __getstate__(self):
        return {"gamma_name": self.gamma_name, "rtol": self.rtol}

    def __setstate__(self, state):
        self.__init__(state["gamma_name"], state["rtol"])

    def slab_raw_density(self, u):
        return self._gamma(u)

    def sample_slab(self, rng, size):
        return self._sampler(rng, size)

    def _quad(self, f, lo, hi, points=None):
        if points is not None:
            points = [p for p in points if lo < p < hi] or None
        val, _ = integrate.quad(
            f, lo, hi, points=points, epsabs=0.0, epsrel=self.rtol, limit=400
        )
        return val

    def _g_scalar(self, x):
        gam = self._gamma
        f = lambda u: gam(x - u) * stdnorm.phi(u)
        return self._quad(f, -TRUNCATION, TRUNCATION, points=[x, 0.0])

    def slab_density(self, x):
        return np.vectorize(self._g_scalar, otypes=[float])(x)

    def log_slab_density(self, x):
        return np.log(self.slab_density(x))

    def log_density_ratio(self, x):
        return self.log_slab_density(x) - stdnorm.log_phi(x)

    def _tail_scalar(self, x):
        # Gbar(x) = int Phibar(x - u) gamma(u) du; Phibar(x - u) == 1 to double
        # precision once u > x + 40, leaving the gamma tail itself
        gam = self._gamma
        f = lambda u: stdnorm.upper_tail(x - u) * gam(u)
        body = self._quad(f, x - TRUNCATION, x + TRUNCATION, points=[0.0, x])
        tail, _ = integrate.quad(gam, x + TRUNCATION, np.inf, epsabs=0.0, epsrel=self.rtol)
        return body + tail

    def _log_tail_pos(self, x):
        return np.log(np.vectorize(self._tail_scalar, otypes=[float])(x))

    def _half_conv_scalar(self, x):
        lo, hi = x - TRUNCATION, min(0.0, x + TRUNCATION)
        if lo >= hi:
            return 0.0
        gam = self._gamma
        f = lambda u: stdnorm.phi(x - u) * gam(u)
        return self._quad(f, lo, hi, points=[x])

    def half_conv_neg(self, x):
        return np.vectorize(self._half_conv_scalar, otypes=[float])(x)

    def _half_conv_ratio_pos(self, x):
        return self.half_conv_neg(x) / stdnorm.phi(x)

    def half_conv_ratio(self, x):
        x = _as_float_array(x)
        return self.half_conv_neg(x) / stdnorm.phi(x)


def parse_prior(spec):
    """Build a prior from its string identifier.

    Accepted forms: ``"quasi-cauchy"``, ``"laplace"`` (a = 0.5),
    ``"laplace:<a>"`` and ``"quadrature:<gamma>"``.

    >>> parse_prior("laplace:0.5").a
    0.5
    """
    if isinstance(spec, SlabPrior):
        return spec
    spec = str(spec).strip()
    if spec == "quasi-cauchy":
        return QuasiCauchyPrior()
    if spec == "laplace":
        return LaplacePrior(0.5)
    if spec.startswith("laplace:"):
        try:
            a = float(spec.split(":", 1)[1])
        except ValueError:
            raise DomainError(f"bad Laplace scale in prior {spec!r}") from None
        return LaplacePrior(a)
    if spec.startswith("quadrature:"):
        return QuadraturePrior(spec.split(":", 1)[1])
    raise DomainError(
        f"unknown prior {spec!r}; known priors: quasi-cauchy, laplace:<a>, "
        "quadrature:<cauchy|quasi-cauchy|laplace:<a>>"
    )


KNOWN_PRIORS = ("quasi-cauchy", "laplace:<a>", "quadrature:<gamma>")
