"""Seeded Monte-Carlo generation of scale populations.

Each proposal draws N adjacent intervals independently and uniformly from
[I_min, 1200], rescales them to sum to one octave, rejects the scale if any
interval fell below I_min, and then accepts it with probability
min{1, exp(-beta * C)} for the model's cost C.

Proposals are processed in fixed-size batches.  Batch ``b`` draws from its
own Philox stream keyed by ``(seed, b)``, and batches are merged in index
order, so a population depends only on the config and never on how many
worker threads produced it.
"""

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from . import costs as _costs
from .core import OCTAVE, Population
from .errors import AbortTooSelective

# projected acceptance below this after the probe aborts the run
MIN_PROJECTED_RATE = 1e-10
DEFAULT_BATCH = 1 << 16
DEFAULT_MAX_ATTEMPTS = 5 * 10**9


class Model(str, enum.Enum):
    RAN = "RAN"
    MIN = "MIN"
    HAR = "HAR"
    FIF = "FIF"
    TRANS = "TRANS"


def as_model(value) -> Model:
    """Model from an enum member or a case-insensitive name."""
    return value if isinstance(value, Model) else Model(str(value).upper())


BIASED = (Model.HAR, Model.FIF, Model.TRANS)
COST_VARIANTS = ("fif_alt",) + _costs.FAMILY_FORMS


@dataclass(frozen=True)
class ModelConfig:
    """Everything that determines a generated population.

    ``hmin``/``hmax`` default to the tabulated normalisation for N when the
    model is HAR.  ``cost_variant`` selects ``fif_alt`` for FIF or one of
    the family forms C1..C4 (with ``A`` and ``m_fam``) for HAR.
    """

    model: Model
    N: int
    I_min: float = 0.0
    w: float = 20.0
    n: float = 2
    m: float = 1.0
    beta: float = 0.0
    S: int = 10_000
    seed: int = 0
    cost_variant: Optional[str] = None
    hmin: Optional[float] = None
    hmax: Optional[float] = None
    A: Optional[float] = None
    m_fam: float = 1.0
    trans_rounding: str = "ceil"
    batch_size: int = DEFAULT_BATCH
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "model", as_model(self.model))
        if not 2 <= self.N <= 12:
            raise ValueError(f"N must be in [2, 12], got {self.N}")
        if self.I_min < 0 or self.I_min * self.N >= OCTAVE:
            raise ValueError(f"I_min={self.I_min} is infeasible for N={self.N}")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.model is Model.RAN and (self.I_min != 0 or self.beta != 0):
            raise ValueError("RAN requires I_min = 0 and beta = 0")
        if self.model is Model.MIN and self.beta != 0:
            raise ValueError("MIN requires beta = 0")
        if self.S < 1:
            raise ValueError("S must be positive")
        if self.w <= 0 or self.n < 1 or self.m <= 0:
            raise ValueError("need w > 0, n >= 1 and m > 0")
        if self.batch_size < 1 or self.workers < 1 or self.max_attempts < 1:
            raise ValueError("batch_size, workers and max_attempts must be positive")
        if self.trans_rounding not in ("ceil", "nearest"):
            raise ValueError("trans_rounding must be 'ceil' or 'nearest'")
        cv = self.cost_variant
        if cv is not None:
            if cv not in COST_VARIANTS:
                raise ValueError(f"cost_variant must be one of {COST_VARIANTS}")
            if cv == "fif_alt" and self.model is not Model.FIF:
                raise ValueError("fif_alt applies to FIF only")
            if cv in _costs.FAMILY_FORMS:
                if self.model is not Model.HAR:
                    raise ValueError("family cost forms apply to HAR only")
                if self.A is None:
                    raise ValueError(f"{cv} needs A")
        if self.model is Model.HAR and cv is None:
            lo, hi = self.har_bounds
            if not hi > lo:
                raise ValueError("hmax must exceed hmin")

    @property
    def har_bounds(self):
        default = _costs.HAR_NORMALIZATION.get(self.N)
        lo = self.hmin if self.hmin is not None else (default[0] if default else None)
        hi = self.hmax if self.hmax is not None else (default[1] if default else None)
        if lo is None or hi is None:
            raise ValueError(f"no default hmin/hmax for N={self.N}; pass them explicitly")
        return lo, hi

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **kw) -> "ModelConfig":
        return replace(self, **kw)


# Tabulated optimal parameters at I_min=80, w=20 (TRANS uses n=2).
PRESET_BETA = {
    Model.HAR: {4: 3.0, 5: 7.0, 6: 13.0, 7: 9.5, 8: 9.0, 9: 14.0},
    Model.TRANS: {4: 200.0, 5: 284.8, 6: 1666.7, 7: 471.4, 8: 412.5, 9: 500.0},
    Model.FIF: {4: 2000.0, 5: 2000.0, 6: 4000.0, 7: 4000.0, 8: 4000.0, 9: 4000.0},
}
PRESET_Q = {
    Model.MIN: {4: 7.9e-1, 5: 5.9e-1, 6: 3.7e-1, 7: 2.0e-1, 8: 8.4e-2, 9: 2.5e-2},
    Model.HAR: {4: 5.6e-2, 5: 2.3e-3, 6: 2.9e-5, 7: 1.7e-4, 8: 6.4e-5, 9: 2.6e-6},
    Model.TRANS: {4: 7.8e-2, 5: 1.3e-2, 6: 3.9e-5, 7: 2.0e-4, 8: 6.2e-5, 9: 6.0e-6},
    Model.FIF: {4: 3.2e-3, 5: 1.2e-3, 6: 3.9e-6, 7: 9.4e-7, 8: 9.7e-8, 9: 9.1e-9},
}


def preset_config(model, N: int, **overrides) -> ModelConfig:
    """Preset with the tabulated optimal parameters for ``model`` and N.

    FIF uses the ``fif_alt`` cost, the only form under which the tabulated
    beta values yield nonzero acceptance.
    """
    model = as_model(model)
    base = dict(model=model, N=N)
    if model is not Model.RAN:
        base["I_min"] = 80.0
    if model in BIASED:
        base["beta"] = PRESET_BETA[model][N]
    if model is Model.FIF:
        base["cost_variant"] = "fif_alt"
    base.update(overrides)
    return ModelConfig(**base)


def sample_raw_scale(N: int, rng: np.random.Generator, low: float = 0.0,
                     high: float = OCTAVE, size: Optional[int] = None) -> np.ndarray:
    """Draw N uniform intervals on [low, high] and rescale them to one octave.

    With ``size`` given, returns a (size, N) batch.  The last interval is
    set to the remainder so each row sums to 1200 up to rounding.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 <= low < high:
        raise ValueError("need 0 <= low < high")
    shape = (1 if size is None else size, N)
    raw = rng.uniform(low, high, size=shape)
    out = raw * (OCTAVE / raw.sum(axis=1, keepdims=True))
    out[:, -1] = OCTAVE - out[:, :-1].sum(axis=1)
    return out[0] if size is None else out


def acceptance_probability(C, beta: float):
    """min{1, exp(-beta * C)}, with beta = 0 or C <= 0 giving exactly 1."""
    c = np.asarray(C, dtype=np.float64)
    if beta == 0:
        p = np.ones_like(c)
    else:
        with np.errstate(over="ignore"):
            p = np.where(c <= 0, 1.0, np.exp(-beta * np.maximum(c, 0.0)))
    return float(p) if np.ndim(C) == 0 else p


def boltzmann_accept(C, beta: float, rng: np.random.Generator):
    """Accept each cost with probability min{1, exp(-beta * C)}."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    p = acceptance_probability(C, beta)
    u = rng.random(np.shape(C))
    out = u < p
    return bool(out) if np.ndim(C) == 0 else out


def model_costs(config: ModelConfig, intervals: np.ndarray) -> dict:
    """Cost columns for a batch; ``"cost"`` is the value fed to acceptance."""
    model = config.model
    if model is Model.HAR:
        tpl = _costs.build_template(config.w)
        hbar = _costs.scale_harmonicity(intervals, tpl, config.m)
        if config.cost_variant is None:
            c = _costs.cost_har(hbar, *config.har_bounds)
        else:
            c = _costs.cost_family(hbar, config.cost_variant, config.A, config.m_fam)
        return {"hbar": hbar, "cost": np.asarray(c, dtype=np.float64)}
    if model is Model.FIF:
        fbar = _costs.fifths_fraction(intervals, config.w)
        if config.cost_variant == "fif_alt":
            c = _costs.cost_fif_alt(fbar, config.N)
        else:
            c = _costs.cost_fif(fbar)
        return {"fbar": fbar, "cost": c}
    if model is Model.TRANS:
        c, g = _costs.cost_trans(intervals, config.n, config.trans_rounding)
        return {"gamma": g, "cost": c}
    return {}


def _cost_names(config):
    return {Model.HAR: ["hbar", "cost"], Model.FIF: ["fbar", "cost"],
            Model.TRANS: ["gamma", "cost"]}.get(config.model, [])


def batch_rng(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for proposal batch ``index``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass
class _Batch:
    size: int
    intervals: np.ndarray       # accepted rows, in draw order
    costs: dict
    acc_pos: np.ndarray         # proposal index of each acceptance
    passed_at: np.ndarray       # passed count up to and including each acceptance
    n_passed: int
    prob_sum: float             # sum of pass * P(accept) over the batch


def _run_batch(config: ModelConfig, index: int, size: int) -> _Batch:
    rng = batch_rng(config.seed, index)
    iv = sample_raw_scale(config.N, rng, low=config.I_min, size=size)
    u = rng.random(size)
    passed = iv.min(axis=1) >= config.I_min if config.I_min > 0 else np.ones(size, dtype=bool)
    pidx = np.flatnonzero(passed)
    names = _cost_names(config)
    if config.model in BIASED and pidx.size:
        cols = model_costs(config, iv[pidx])
        p = acceptance_probability(cols["cost"], config.beta)
        keep = u[pidx] < p
        prob_sum = float(np.sum(p))
    else:
        cols = {}
        keep = np.ones(pidx.size, dtype=bool)
        prob_sum = float(pidx.size)
    acc_pos = pidx[keep]
    passed_cum = np.cumsum(passed)
    return _Batch(
        size=size,
        intervals=iv[acc_pos],
        costs={k: np.asarray(cols[k])[keep] for k in names if k in cols},
        acc_pos=acc_pos,
        passed_at=passed_cum[acc_pos] if acc_pos.size else np.empty(0, dtype=np.int64),
        n_passed=int(pidx.size),
        prob_sum=prob_sum,
    )


def _waves(config: ModelConfig, sizes):
    """Yield batch results in index order, computed ``workers`` at a time."""
    if config.workers == 1:
        for i, size in enumerate(sizes):
            yield _run_batch(config, i, size)
        return
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        i = 0
        while True:
            wave = []
            for _ in range(config.workers):
                size = next(sizes, None)
                if size is None:
                    break
                wave.append(pool.submit(_run_batch, config, i, size))
                i += 1
            if not wave:
                return
            for fut in wave:
                yield fut.result()


def _sizes(config, total=None):
    if total is None:
        while True:
            yield config.batch_size
    full, rest = divmod(total, config.batch_size)
    for _ in range(full):
        yield config.batch_size
    if rest:
        yield rest


def _q(model, accepted, passed, attempts):
    if model is Model.RAN:
        return 1.0
    if model is Model.MIN:
        return passed / attempts if attempts else 0.0
    return accepted / passed if passed else 0.0


@dataclass(frozen=True)
class GenerationReport:
    """Outcome of :func:`generate_population`.

    ``q`` follows the tabulated convention: passed/attempts for MIN,
    accepted/passed for the biased models, and 1 for RAN.  ``q_total`` is
    accepted/attempts for every model.
    """

    population: Population
    attempts: int
    passed: int
    q: float
    q_total: float
    config: ModelConfig
    projected_rate: float = float("nan")
    elapsed: float = field(default=0.0, compare=False)

    @property
    def accepted(self) -> int:
        return len(self.population)

    def summary(self) -> dict:
        return {"model": self.config.model.value, "N": self.config.N,
                "accepted": self.accepted, "attempts": self.attempts, "passed": self.passed,
                "q": self.q, "q_total": self.q_total, "projected_rate": self.projected_rate,
                "elapsed_s": round(self.elapsed, 3)}


def generate_population(config: ModelConfig) -> GenerationReport:
    """Propose scales until ``config.S`` are accepted.

    Raises :class:`AbortTooSelective` when the acceptance rate projected
    from the first batch is below 1e-10, or when the projected or actual
    number of proposals exceeds ``config.max_attempts``.
    """
    t0 = time.perf_counter()
    parts, costs_parts = [], []
    need = config.S
    attempts = passed = 0
    projected = float("nan")
    for k, b in enumerate(_waves(config, _sizes(config))):
        if k == 0:
            projected = b.prob_sum / b.size
            if projected < MIN_PROJECTED_RATE:
                raise AbortTooSelective(
                    f"projected acceptance {projected:.3g} is below {MIN_PROJECTED_RATE:g}",
                    projected_rate=projected, attempts=b.size)
            if need / projected > config.max_attempts:
                raise AbortTooSelective(
                    f"about {need / projected:.3g} proposals needed, limit {config.max_attempts}",
                    projected_rate=projected, attempts=b.size)
        got = b.acc_pos.size
        if got >= need:
            parts.append(b.intervals[:need])
            costs_parts.append({c: v[:need] for c, v in b.costs.items()})
            attempts += int(b.acc_pos[need - 1]) + 1
            passed += int(b.passed_at[need - 1])
            need = 0
            break
        parts.append(b.intervals)
        costs_parts.append(b.costs)
        need -= got
        attempts += b.size
        passed += b.n_passed
        if attempts >= config.max_attempts:
            raise AbortTooSelective(
                f"gave up after {attempts} proposals with {config.S - need} accepted",
                projected_rate=projected, attempts=attempts)
    names = _cost_names(config)
    pop = Population(np.concatenate(parts),
                     {c: np.concatenate([cp[c] for cp in costs_parts]) for c in names})
    return GenerationReport(pop, attempts, passed,
                            _q(config.model, config.S, passed, attempts),
                            config.S / attempts, config, projected,
                            time.perf_counter() - t0)


class AcceptanceEstimate(NamedTuple):
    attempts: int
    passed: int
    accepted: int
    q: float
    q_total: float


def estimate_acceptance(config: ModelConfig, proposals: int) -> AcceptanceEstimate:
    """Run exactly ``proposals`` proposals and report the acceptance counts."""
    if proposals < 1:
        raise ValueError("proposals must be positive")
    passed = accepted = 0
    for b in _waves(config, _sizes(config, proposals)):
        passed += b.n_passed
        accepted += b.acc_pos.size
    return AcceptanceEstimate(proposals, passed, accepted,
                              _q(config.model, accepted, passed, proposals),
                              accepted / proposals)


def harmonicity_sample(N: int, I_min: float = 80.0, w: float = 20.0, m: float = 1.0,
                       S: int = 100_000, seed: int = 0, workers: int = 1) -> np.ndarray:
    """H-bar of ``S`` MIN-model scales."""
    rep = generate_population(ModelConfig(Model.MIN, N, I_min=I_min, S=S, seed=seed,
                                          workers=workers))
    return _costs.scale_harmonicity(rep.population.intervals, _costs.build_template(w), m)


def harmonicity_bounds(N: int, I_min: float = 80.0, w: float = 20.0, m: float = 1.0,
                       S: int = 100_000, seed: int = 0):
    """Observed (min, max) of H-bar over a MIN-model sample."""
    h = harmonicity_sample(N, I_min, w, m, S, seed)
    return float(h.min()), float(h.max())


def log_beta_grid(lo: float, hi: float, num: int) -> np.ndarray:
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    return np.exp(np.linspace(math.log(lo), math.log(hi), num))
