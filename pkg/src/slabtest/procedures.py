"""l-, q- and m-values and the multiple testing procedures built on them."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from slabtest import stdnorm
from slabtest.exceptions import DomainError
from slabtest.mmle import ObservationBatch, ScoreFunction, WeightEstimate
from slabtest.priors import parse_prior
from slabtest.thresholds import ThresholdContext, invert_increasing

PROCEDURES = (
    "ebayes-l",
    "ebayes-q",
    "ebayes-q0",
    "ebayes-hybrid",
    "sc",
    "mci",
    "bh",
    "bonferroni",
)


@dataclass
class TestOutcome:
    """Result of one procedure on one batch.

    ``values`` holds whatever was compared to ``t`` (l-, q-, m- or p-values).
    ``effective_abs_threshold`` is the equivalent |X| cutoff for pure
    thresholding rules and None for data-dependent step rules.
    """

    __test__ = False  # not a pytest class

    procedure_id: str
    t: float
    reject: np.ndarray
    values: np.ndarray
    w_used: Optional[float]
    effective_abs_threshold: Optional[float] = None
    estimate: Optional[WeightEstimate] = None
    omega_n: Optional[float] = None
    fallback: bool = False
    degenerate: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def rejections(self):
        return int(np.count_nonzero(self.reject))


def _x_of(batch):
    if isinstance(batch, ObservationBatch):
        return batch.x
    return ObservationBatch(batch).x


def _logit(w):
    with np.errstate(divide="ignore"):
        return float(special.logit(w))


def _check_w(w, upper_open=False):
    if not (0 <= w <= 1) or (upper_open and w == 1):
        bound = "[0, 1)" if upper_open else "[0, 1]"
        raise DomainError(f"w must be in {bound}, got {w!r}")


def _check_t(t, upper=1.0):
    if not (0 < t < upper):
        raise DomainError(f"t must be in (0, {upper:g}), got {t!r}")


def l_values(prior, batch, w, log_ratio=None):
    """Posterior null probabilities (1-w)phi / ((1-w)phi + w g) per coordinate."""
    _check_w(w)
    prior = parse_prior(prior)
    if log_ratio is None:
        log_ratio = prior.log_density_ratio(_x_of(batch))
    return special.expit(-(_logit(w) + log_ratio))


def q_values(prior, batch, w):
    """Posterior null probabilities given |X_i| >= |x_i|."""
    _check_w(w)
    prior = parse_prior(prior)
    ax = np.abs(_x_of(batch))
    log_tail_ratio = prior.log_slab_tail(ax) - stdnorm.log_upper_tail(ax)
    return special.expit(-(_logit(w) + log_tail_ratio))


def m_values(prior, batch, w, log_ratio=None):
    """m-values: the smaller posterior mass of {theta >= 0} and {theta <= 0}.

    Raises
    ------
    DomainError
        For w = 1, where the expression degenerates.
    """
    _check_w(w, upper_open=True)
    prior = parse_prior(prior)
    x = _x_of(batch)
    if log_ratio is None:
        log_ratio = prior.log_density_ratio(x)
    if w == 0:
        return np.ones_like(x)
    num = (1.0 - w) + w * prior.half_conv_ratio(np.abs(x))
    log_den = np.logaddexp(np.log1p(-w), np.log(w) + log_ratio)
    return np.minimum(np.exp(np.log(num) - log_den), 1.0)


def default_L(n):
    if n <= 2:
        raise DomainError(f"log log n is undefined or nonpositive for n = {n}")
    return math.log(math.log(n))


def omega_n(prior, n, L=None):
    """Minimal weight L_n / (n Gbar(sqrt(2.1 log n))) used by EBayesq.0."""
    if n <= 2:
        raise DomainError(f"omega_n needs n > 2, got {n}")
    if L is None:
        L = default_L(n)
    if not L > 0:
        raise DomainError(f"L must be positive, got {L!r}")
    prior = parse_prior(prior)
    return L / (n * float(prior.slab_tail(math.sqrt(2.1 * math.log(n)))))


class BatchAnalysis:
    """Shared state for running several procedures on one batch.

    The weight is the marginal maximum likelihood estimate unless ``w`` is
    given, in which case it is used as is.  log(g/phi) at every coordinate is
    computed once.

    Parameters
    ----------
    prior : SlabPrior or str
    batch : ObservationBatch or array_like
    w : float, optional
        Fixed weight; skips the estimation step.
    lower : float, optional
        Lower end of the MMLE search interval (default 1/n).
    context : ThresholdContext, optional
        Reused for |X| threshold bookkeeping.
    """

    def __init__(self, prior, batch, w=None, lower=None, context=None):
        self.prior = parse_prior(prior)
        self.batch = batch if isinstance(batch, ObservationBatch) else ObservationBatch(batch)
        self.x = self.batch.x
        self.n = self.x.size
        self.context = context if context is not None else ThresholdContext(self.prior)
        self._score = ScoreFunction(self.prior, self.x)
        if w is None:
            self.estimate = self._score.maximise(lower)
            self.w = self.estimate.w_hat
        else:
            _check_w(w)
            self.estimate = None
            self.w = float(w)
        self._l = None
        self._q = None

    @property
    def log_ratio(self):
        return self._score.log_ratio

    def l_values(self):
        if self._l is None:
            self._l = l_values(self.prior, self.batch, self.w, log_ratio=self.log_ratio)
        return self._l

    def q_values(self):
        if self._q is None:
            self._q = q_values(self.prior, self.batch, self.w)
        return self._q

    def m_values(self):
        return m_values(self.prior, self.batch, self.w, log_ratio=self.log_ratio)

    def _outcome(self, pid, t, reject, values, thr, **kw):
        return TestOutcome(
            procedure_id=pid,
            t=t,
            reject=reject,
            values=values,
            w_used=self.w,
            effective_abs_threshold=thr,
            estimate=self.estimate,
            degenerate=self.w >= 1,
            **kw,
        )

    def ebayes_l(self, t):
        _check_t(t)
        values = self.l_values()
        thr = self.context.l_threshold(self.w, t)
        return self._outcome("ebayes-l", t, values <= t, values, thr)

    def ebayes_q(self, t):
        _check_t(t)
        values = self.q_values()
        thr = self.context.q_threshold(self.w, t)
        return self._outcome("ebayes-q", t, values <= t, values, thr)

    def ebayes_q0(self, t, L=None):
        _check_t(t)
        om = omega_n(self.prior, self.n, L)
        out = self.ebayes_q(t)
        out.procedure_id = "ebayes-q0"
        out.omega_n = om
        if not self.w > om:
            out.reject = np.zeros(self.n, dtype=bool)
            out.effective_abs_threshold = math.inf
        return out

    def ebayes_hybrid(self, t, L=None):
        _check_t(t)
        om = omega_n(self.prior, self.n, L)
        if self.w > om:
            out = self.ebayes_q(t)
            out.procedure_id = "ebayes-hybrid"
            out.omega_n = om
            return out
        out = bonferroni_procedure(self.batch, t)
        out.procedure_id = "ebayes-hybrid"
        out.w_used = self.w
        out.estimate = self.estimate
        out.omega_n = om
        out.fallback = True
        return out

    def sc(self, t):
        _check_t(t)
        values = self.l_values()
        order = np.argsort(values, kind="stable")
        running = np.cumsum(values[order]) / np.arange(1, self.n + 1)
        ok = np.flatnonzero(running <= t)
        k_hat = int(ok[-1]) + 1 if ok.size else 0
        reject = np.zeros(self.n, dtype=bool)
        reject[order[:k_hat]] = True
        return self._outcome("sc", t, reject, values, None, extra={"k_hat": k_hat})

    def mci(self, t):
        if not (0 < t < 0.5):
            raise DomainError(f"MCI requires t in (0, 1/2), got {t!r}")
        values = self.m_values()
        return self._outcome("mci", t, values < t, values, self._mci_threshold(t))

    def _mci_threshold(self, t):
        # m is decreasing in |x|; find the |x| where it crosses t
        if self.w == 0:
            return math.inf
        prior, w = self.prior, self.w

        def neg_log_m(x):
            return -math.log(float(m_values(prior, np.array([x]), w)[0]) or 1e-320)

        if neg_log_m(0.0) > -math.log(t):
            return 0.0
        return invert_increasing(neg_log_m, -math.log(t), math.sqrt(2 * math.log(1 / w + 1)) + 5)

    def run(self, procedure_id, t, L=None):
        """Dispatch by procedure identifier."""
        if procedure_id == "ebayes-l":
            return self.ebayes_l(t)
        if procedure_id == "ebayes-q":
            return self.ebayes_q(t)
        if procedure_id == "ebayes-q0":
            return self.ebayes_q0(t, L)
        if procedure_id == "ebayes-hybrid":
            return self.ebayes_hybrid(t, L)
        if procedure_id == "sc":
            return self.sc(t)
        if procedure_id == "mci":
            return self.mci(t)
        if procedure_id == "bh":
            out = bh_procedure(self.batch, t)
        elif procedure_id == "bonferroni":
            out = bonferroni_procedure(self.batch, t)
        else:
            raise DomainError(
                f"unknown procedure {procedure_id!r}; known: {', '.join(PROCEDURES)}"
            )
        return out


def ebayes_l(prior, batch, t, **kw):
    """EBayesL: estimate w by MMLE, reject where the l-value is <= t."""
    return BatchAnalysis(prior, batch, **kw).ebayes_l(t)


def ebayes_q(prior, batch, t, **kw):
    """EBayesq: estimate w by MMLE, reject where the q-value is <= t."""
    return BatchAnalysis(prior, batch, **kw).ebayes_q(t)


def ebayes_q0(prior, batch, t, L=None, **kw):
    """EBayesq.0: EBayesq, but reject nothing when w_hat <= omega_n."""
    return BatchAnalysis(prior, batch, **kw).ebayes_q0(t, L)


def ebayes_hybrid(prior, batch, t, L=None, **kw):
    """EBayesq when w_hat > omega_n, Bonferroni at level t otherwise."""
    return BatchAnalysis(prior, batch, **kw).ebayes_hybrid(t, L)


def sc_procedure(prior, batch, t, **kw):
    """Reject the k smallest l-values, k maximal with running mean <= t."""
    return BatchAnalysis(prior, batch, **kw).sc(t)


def mci_procedure(prior, batch, t, **kw):
    """Marginal credible interval rule, i.e. m-value < t (strict)."""
    return BatchAnalysis(prior, batch, **kw).mci(t)


def bh_procedure(batch, alpha):
    """Benjamini-Hochberg step-up on two-sided normal p-values."""
    _check_t(alpha)
    x = _x_of(batch)
    n = x.size
    p = stdnorm.p_value(x)
    order = np.argsort(p, kind="stable")
    ok = np.flatnonzero(p[order] <= alpha * np.arange(1, n + 1) / n)
    k_hat = int(ok[-1]) + 1 if ok.size else 0
    reject = np.zeros(n, dtype=bool)
    reject[order[:k_hat]] = True
    return TestOutcome("bh", alpha, reject, p, None, extra={"k_hat": k_hat})


def bonferroni_procedure(batch, alpha):
    """Reject where the two-sided p-value is <= alpha / n."""
    _check_t(alpha)
    x = _x_of(batch)
    p = stdnorm.p_value(x)
    thr = float(stdnorm.upper_tail_inv(alpha / (2 * x.size)))
    return TestOutcome("bonferroni", alpha, p <= alpha / x.size, p, None, thr)
