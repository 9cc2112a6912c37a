"""scikit-learn compatible front end.

``fit`` calibrates the slab weight by marginal maximum likelihood,
``transform`` returns the per-coordinate statistic a procedure thresholds and
``predict`` returns its rejection mask.  Observations are one-dimensional;
a single-column 2-D array is accepted and flattened.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from slabtest.exceptions import DomainError
from slabtest.mmle import estimate_weight, universal_lower_bound
from slabtest.priors import parse_prior
from slabtest.procedures import PROCEDURES, BatchAnalysis


def check_observations(X):
    """Validate observations and return them as a finite 1-D float array."""
    X = check_array(X, ensure_2d=False, dtype=float, ensure_all_finite=True)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(
                f"expected a 1-D vector of observations or a single column, got shape {X.shape}"
            )
        X = X[:, 0]
    if X.ndim != 1:
        raise ValueError(f"expected 1-D observations, got {X.ndim} dimensions")
    return X


def check_level(t, procedure):
    upper = 0.5 if procedure == "mci" else 1.0
    if not (0 < t < upper):
        raise ValueError(f"t must be in (0, {upper:g}) for {procedure}, got {t!r}")
    return float(t)


class SpikeSlabTester(TransformerMixin, BaseEstimator):
    """Empirical Bayes spike-and-slab multiple testing.

    Parameters
    ----------
    prior : str, default="quasi-cauchy"
        Slab identifier (``"quasi-cauchy"``, ``"laplace:<a>"``, ...).
    procedure : str, default="ebayes-q"
        One of ``ebayes-l``, ``ebayes-q``, ``ebayes-q0``, ``ebayes-hybrid``,
        ``sc``, ``mci``, ``bh``, ``bonferroni``.
    t : float, default=0.1
        Target level.
    L : float or None, default=None
        Slowly growing factor for ``ebayes-q0``/``ebayes-hybrid``;
        ``log log n`` when None.
    lower : {"1/n", "universal"} or float, default="1/n"
        Lower end of the weight search interval.
    w : float or None, default=None
        Fix the weight instead of estimating it.

    Attributes
    ----------
    w_hat_ : float
        Weight used by ``predict``/``transform``.
    weight_estimate_ : WeightEstimate or None
        Full MMLE result (None when ``w`` was fixed).
    outcome_ : TestOutcome
        Procedure outcome on the training observations.
    n_obs_ : int
    """

    def __init__(self, prior="quasi-cauchy", procedure="ebayes-q", t=0.1, L=None, lower="1/n", w=None):
        self.prior = prior
        self.procedure = procedure
        self.t = t
        self.L = L
        self.lower = lower
        self.w = w

    def _validate_params(self):
        if self.procedure not in PROCEDURES:
            raise ValueError(f"unknown procedure {self.procedure!r}; known: {', '.join(PROCEDURES)}")
        check_level(self.t, self.procedure)
        try:
            return parse_prior(self.prior)
        except DomainError as exc:
            raise ValueError(str(exc)) from None

    def _lower_bound(self, prior, n):
        if self.lower in (None, "1/n"):
            return 1.0 / n
        if self.lower == "universal":
            return universal_lower_bound(prior, n)
        return float(self.lower)

    def fit(self, X, y=None):
        prior = self._validate_params()
        X = check_observations(X)
        self.n_obs_ = X.size
        self.prior_ = prior
        if self.w is None:
            self.weight_estimate_ = estimate_weight(prior, X, self._lower_bound(prior, X.size))
            self.w_hat_ = self.weight_estimate_.w_hat
        else:
            self.weight_estimate_ = None
            self.w_hat_ = float(self.w)
        self.outcome_ = self._analysis(X).run(self.procedure, self.t, self.L)
        return self

    def _analysis(self, X):
        analysis = BatchAnalysis(self.prior_, X, w=self.w_hat_)
        analysis.estimate = self.weight_estimate_
        return analysis

    def test(self, X):
        """Full :class:`TestOutcome` of the procedure on ``X`` at the fitted weight."""
        check_is_fitted(self, "w_hat_")
        return self._analysis(check_observations(X)).run(self.procedure, self.t, self.L)

    def predict(self, X):
        """Boolean rejection mask."""
        return self.test(X).reject

    def transform(self, X):
        """The thresholded statistic (l-, q-, m- or p-values)."""
        return self.test(X).values

    def fit_predict(self, X, y=None):
        return self.fit(X).outcome_.reject

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.one_d_array = True
        tags.input_tags.two_d_array = False
        return tags
