"""False discovery and non-discovery proportions and their Monte Carlo means."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from slabtest.exceptions import DomainError


@dataclass(frozen=True)
class MetricsRecord:
    fdp: float
    fnp: float
    rejections: int
    true_rejections: int
    n: int
    sigma0: int


@dataclass(frozen=True)
class AggregateMetrics:
    fdr: float
    fnr: float
    fdr_se: Optional[float]
    fnr_se: Optional[float]
    reps: int
    mean_rejections: float
    risk: float
    risk_se: Optional[float]
    #: share of replications with at least one false rejection
    fwer: float


def fdp_fnp(outcome, truth):
    """Per-replication FDP and FNP, with 1 v (.) denominators.

    ``outcome`` may be a TestOutcome or a boolean rejection mask.
    """
    reject = np.asarray(getattr(outcome, "reject", outcome), dtype=bool)
    truth = np.asarray(truth)
    if reject.shape != truth.shape:
        raise DomainError(
            f"rejection mask has length {reject.size} but truth has {truth.size}"
        )
    signal = truth != 0
    r = int(np.count_nonzero(reject))
    tr = int(np.count_nonzero(reject & signal))
    s0 = int(np.count_nonzero(signal))
    return MetricsRecord(
        fdp=(r - tr) / max(r, 1),
        fnp=(s0 - tr) / max(s0, 1),
        rejections=r,
        true_rejections=tr,
        n=truth.size,
        sigma0=s0,
    )


def _mean_se(values):
    # fsum keeps both moments exactly independent of record order
    values = np.asarray(values, dtype=float)
    mean = math.fsum(values) / values.size
    if values.size < 2:
        return mean, None
    var = math.fsum((values - mean) ** 2) / (values.size - 1)
    return mean, math.sqrt(var / values.size)


def aggregate(records):
    """Monte Carlo means with standard errors (sample sd, reps - 1 denominator).

    Standard errors are None for a single record.  The reported risk is
    FDR + FNR.
    """
    records = list(records)
    if not records:
        raise DomainError("cannot aggregate an empty list of records")
    fdp = [r.fdp for r in records]
    fnp = [r.fnp for r in records]
    fdr, fdr_se = _mean_se(fdp)
    fnr, fnr_se = _mean_se(fnp)
    _, risk_se = _mean_se(np.add(fdp, fnp))
    fwer = sum(r.rejections > r.true_rejections for r in records) / len(records)
    return AggregateMetrics(
        fdr=fdr,
        fnr=fnr,
        fdr_se=fdr_se,
        fnr_se=fnr_se,
        reps=len(records),
        mean_rejections=math.fsum(r.rejections for r in records) / len(records),
        risk=fdr + fnr,
        risk_se=risk_se,
        fwer=fwer,
    )
