"""Monte Carlo engine for FDR/FNR experiments.

Every replication draws from its own counter-based (Philox) stream keyed by
``(seed, cell key, rep, block)``, so results do not depend on how the
replications are scheduled across workers.
"""

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np

from slabtest import stdnorm
from slabtest.exceptions import DomainError
from slabtest.metrics import aggregate, fdp_fnp
from slabtest.mmle import ObservationBatch, universal_lower_bound
from slabtest.moments import MomentContext
from slabtest.priors import parse_prior
from slabtest.procedures import PROCEDURES, BatchAnalysis
from slabtest.thresholds import ThresholdContext

SCENARIOS = ("constant", "uniform-random", "large-class", "bayes")
W_POLICIES = ("mmle", "fixed", "wstar")
BLOCK = 1_000_000
# spawn-key block index reserved for the signal stream
_SIGNAL_BLOCK = 2**31 - 1

MU_GRID = (0.01, 0.5, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10)


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProcedureSpec:
    id: str
    t: float
    L: Optional[float] = None

    def __post_init__(self):
        if self.id not in PROCEDURES:
            raise DomainError(f"unknown procedure {self.id!r}; known: {', '.join(PROCEDURES)}")
        if not (0 < self.t < 1):
            raise DomainError(f"t must be in (0, 1), got {self.t!r}")


@dataclass(frozen=True)
class SimulationCell:
    """One simulation configuration.

    ``mu`` is the signal level: the common value for ``constant``, half the
    upper end of U(0, 2 mu) for ``uniform-random`` and the multiplier ``a`` of
    sqrt(2 log(n/s)) for ``large-class``.  The ``bayes`` scenario ignores
    ``s`` and ``mu`` and draws theta from the prior with weight ``w``.
    """

    n: int
    s: int
    mu: float
    scenario: str = "constant"
    prior: str = "quasi-cauchy"
    procedures: Tuple[ProcedureSpec, ...] = ()
    reps: int = 2000
    seed: int = 0
    w_policy: str = "mmle"
    w: Optional[float] = None
    lower: Optional[str] = None

    def __post_init__(self):
        procs = tuple(
            p if isinstance(p, ProcedureSpec) else ProcedureSpec(**p) for p in self.procedures
        )
        object.__setattr__(self, "procedures", procs)
        object.__setattr__(self, "prior", parse_prior(self.prior).id)
        if self.n < 1 or not (0 <= self.s <= self.n):
            raise DomainError(f"need 0 <= s <= n and n >= 1, got s={self.s}, n={self.n}")
        if self.reps < 1:
            raise DomainError(f"reps must be >= 1, got {self.reps}")
        if self.scenario not in SCENARIOS:
            raise DomainError(f"unknown scenario {self.scenario!r}; known: {', '.join(SCENARIOS)}")
        if self.w_policy not in W_POLICIES:
            raise DomainError(f"unknown w_policy {self.w_policy!r}; known: {', '.join(W_POLICIES)}")
        if (self.w_policy == "fixed" or self.scenario == "bayes") and not (
            self.w is not None and 0 < self.w < 1
        ):
            raise DomainError("a fixed weight w in (0, 1) is required")
        if self.w_policy == "wstar" and not (1 <= self.s < self.n):
            raise DomainError("w_policy 'wstar' needs 1 <= s < n")
        if self.lower not in (None, "1/n", "universal"):
            raise DomainError(f"lower must be '1/n' or 'universal', got {self.lower!r}")
        if not (0 <= self.seed < 2**64):
            raise DomainError("seed must be a 64-bit unsigned integer")

    def key_words(self):
        """Stable 2 x 32-bit digest of the data-generating fields."""
        ident = json.dumps(
            [self.n, self.s, float(self.mu), self.scenario, self.prior, self.w],
            separators=(",", ":"),
        )
        digest = hashlib.sha256(ident.encode()).digest()
        return (int.from_bytes(digest[:4], "little"), int.from_bytes(digest[4:8], "little"))

    def to_dict(self):
        d = asdict(self)
        d["procedures"] = [
            {k: v for k, v in asdict(p).items() if v is not None} for p in self.procedures
        ]
        return d


def _generator(cell, rep, block):
    ss = np.random.SeedSequence(cell.seed, spawn_key=(*cell.key_words(), rep, block))
    return np.random.Generator(np.random.Philox(ss))


def standard_normals(gen, size):
    """Normal variates by inversion of open-interval uniforms."""
    k = gen.integers(0, 2**53, size=size, dtype=np.uint64)
    u = (k.astype(float) + 0.5) * 2.0**-53
    return stdnorm.upper_tail_inv(u)


def signal_vector(cell, rep):
    n, s, mu = cell.n, cell.s, float(cell.mu)
    theta = np.zeros(n)
    if cell.scenario == "constant":
        theta[:s] = mu
    elif cell.scenario == "uniform-random":
        theta[:s] = _generator(cell, rep, _SIGNAL_BLOCK).uniform(0.0, 2.0 * mu, size=s)
    elif cell.scenario == "large-class":
        if s:
            theta[:s] = mu * math.sqrt(2.0 * math.log(n / s))
    else:
        gen = _generator(cell, rep, _SIGNAL_BLOCK)
        active = gen.random(n) < cell.w
        draws = parse_prior(cell.prior).sample_slab(gen, int(active.sum()))
        theta[active] = draws
    return theta


def generate(cell, rep):
    """Observation batch for replication ``rep``; deterministic in (cell, rep)."""
    if not (0 <= rep < cell.reps):
        raise DomainError(f"rep must be in [0, {cell.reps}), got {rep}")
    theta = signal_vector(cell, rep)
    x = np.empty(cell.n)
    for b, start in enumerate(range(0, cell.n, BLOCK)):
        stop = min(start + BLOCK, cell.n)
        x[start:stop] = standard_normals(_generator(cell, rep, b), stop - start)
    x += theta
    return ObservationBatch(x, theta)


# per-process caches; contexts are confined to the worker that built them
_CONTEXTS = {}
_WSTAR = {}


def _context(prior_id):
    if prior_id not in _CONTEXTS:
        _CONTEXTS[prior_id] = ThresholdContext(prior_id)
    return _CONTEXTS[prior_id]


def resolve_wstar(cell):
    key = (cell.prior, cell.n, cell.s)
    if key not in _WSTAR:
        _WSTAR[key] = MomentContext(cell.prior).solve_wstar(cell.n, cell.s).w
    return _WSTAR[key]


def run_rep(cell, rep):
    """Metrics records for one replication, one per procedure spec."""
    try:
        batch = generate(cell, rep)
        kw = {}
        if cell.w_policy == "fixed":
            kw["w"] = cell.w
        elif cell.w_policy == "wstar":
            kw["w"] = resolve_wstar(cell)
        elif cell.lower == "universal":
            kw["lower"] = universal_lower_bound(cell.prior, cell.n)
        analysis = BatchAnalysis(cell.prior, batch, context=_context(cell.prior), **kw)
        return [fdp_fnp(analysis.run(p.id, p.t, p.L), batch.truth) for p in cell.procedures]
    except Exception as exc:
        raise SimulationError(f"cell {cell.to_dict()} rep {rep}: {exc}") from exc


def _run_chunk(args):
    cell, reps = args
    return [run_rep(cell, r) for r in reps]


def run_cell(cell, workers=1):
    """Aggregate metrics per procedure spec, in the order of ``cell.procedures``.

    Replications are split into contiguous chunks; results are reassembled in
    replication order, so the aggregate is the same for any worker count.
    """
    if not cell.procedures:
        return []
    if cell.w_policy == "wstar":
        resolve_wstar(cell)
    reps = list(range(cell.reps))
    if workers <= 1 or cell.reps == 1:
        per_rep = [run_rep(cell, r) for r in reps]
    else:
        size = max(1, math.ceil(cell.reps / (4 * workers)))
        chunks = [(cell, reps[i : i + size]) for i in range(0, cell.reps, size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = [rec for chunk in pool.map(_run_chunk, chunks) for rec in chunk]
    return [aggregate(recs[j] for recs in per_rep) for j in range(len(cell.procedures))]


@dataclass
class ResultRow:
    procedure: str
    prior: str
    n: int
    s: int
    mu: float
    scenario: str
    t: float
    reps: int
    fdr: float
    fdr_se: Optional[float]
    fnr: float
    fnr_se: Optional[float]
    mean_rejections: float
    extra: dict = field(default_factory=dict, repr=False)


def sweep(cells, workers=1, progress=None):
    """Run every cell; stops at the first failing cell."""
    cells = list(cells)
    if not cells:
        raise DomainError("sweep needs at least one cell")
    rows = []
    for i, cell in enumerate(cells):
        for spec, agg in zip(cell.procedures, run_cell(cell, workers)):
            rows.append(
                ResultRow(
                    spec.id, cell.prior, cell.n, cell.s, float(cell.mu), cell.scenario,
                    spec.t, agg.reps, agg.fdr, agg.fdr_se, agg.fnr, agg.fnr_se,
                    agg.mean_rejections,
                )
            )
        if progress is not None:
            progress(i + 1, len(cells))
    return rows


def figure_cells(figure, reps=2000, seed=0, n=10_000):
    """Preset experiment grids.

    ``1``/``3``: EBayesL and EBayesq, constant / uniform alternatives;
    ``2``/``4``: EBayesq.0 and EBayesq.hybrid, constant / uniform alternatives;
    ``sc``: the SC procedure on the constant grid;
    ``sc-table``: SC at n = 10^7, mu = 15, t = 0.2 with w = w*.
    """
    ts = (0.05, 0.1, 0.2)
    figure = str(figure)
    if figure == "sc-table":
        return [
            SimulationCell(
                n=10**7, s=s, mu=15.0, prior="quasi-cauchy",
                procedures=(ProcedureSpec("sc", 0.2),), reps=reps, seed=seed,
                w_policy="wstar",
            )
            for s in (10**4, 10**3, 10**2, 10, 5)
        ]
    presets = {
        "1": (("ebayes-l", "ebayes-q"), "constant"),
        "2": (("ebayes-q0", "ebayes-hybrid"), "constant"),
        "3": (("ebayes-l", "ebayes-q"), "uniform-random"),
        "4": (("ebayes-q0", "ebayes-hybrid"), "uniform-random"),
        "sc": (("sc",), "constant"),
    }
    if figure not in presets:
        raise DomainError(f"unknown figure {figure!r}; known: {', '.join([*presets, 'sc-table'])}")
    procs, scenario = presets[figure]
    specs = tuple(ProcedureSpec(p, t) for p in procs for t in ts)
    return [
        SimulationCell(
            n=n, s=s, mu=mu, scenario=scenario, prior=prior, procedures=specs,
            reps=reps, seed=seed,
        )
        for prior in ("quasi-cauchy", "laplace:0.5")
        for s in (10, 100, 1000)
        for mu in MU_GRID
    ]
