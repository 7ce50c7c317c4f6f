"""Experiment orchestration: dimension sweeps, lemma checks, CSV persistence.

A sweep trains one embedding per (ground-truth dimension, target dimension,
variant, seed) cell and appends one row per cell to a CSV with the frozen
column set

    model,n,m,D,d,variant,seed,final_accuracy,baseline_accuracy,steps_run,wall_seconds

preceded by a `# sweep-csv v1` comment line. Writes are atomic (temp file +
rename) and sweeps are resumable: existing rows are skipped by cell key, and
rows always appear in canonical cell order so an interrupted-then-resumed
sweep produces the same file as an uninterrupted one.
"""

from __future__ import annotations

import math
import os
import sys
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as _scipy_stats

from ._rng import derive_seed
from .constraint_graph import (
    build_constraint_graph,
    arboricity,
    monte_carlo_arboricity_bound,
    subadditivity_check,
)
from .errors import InvalidInputError, InvalidParameterError, LabError
from .evaluation import evaluate_accuracy, trivial_baseline
from .instances import (
    Instance,
    generate_ground_truth_sphere,
    generate_poisson_quadruplets,
    generate_poisson_triplets,
    generate_uniform_quadruplets,
    generate_uniform_triplets,
    triplet_tuple_count,
)
from .realizability import certify, complete_ordering, embed_from_ordering, monte_carlo_acyclicity
from .training import TrainConfig, train

__all__ = [
    "InstanceSpec",
    "SweepConfig",
    "SweepRecord",
    "run_sweep",
    "load_sweep_csv",
    "write_sweep_csv",
    "verify_theorem3",
    "verify_lemmas",
    "predicted_epsilon",
    "default_dimension_grid",
    "trend_report",
    "config_from_mapping",
    "PRESETS",
    "CSV_VERSION_LINE",
    "CSV_COLUMNS",
]

CSV_VERSION_LINE = "# sweep-csv v1"
CSV_COLUMNS = [
    "model",
    "n",
    "m",
    "D",
    "d",
    "variant",
    "seed",
    "final_accuracy",
    "baseline_accuracy",
    "steps_run",
    "wall_seconds",
]

VARIANTS = ("unconstrained", "spherical")

_FIXED_M_MODELS = {"uniform", "sphere", "quad-uniform"}
_POISSON_MODELS = {"poisson", "quad-poisson"}


def predicted_epsilon(d: int, dim: int) -> float:
    """sqrt(d / D): the heuristic accuracy excess over 1/2 at target dimension d."""
    if not 0 < d <= dim:
        raise InvalidParameterError(f"need 0 < d <= D, got d={d}, D={dim}")
    return math.sqrt(d / dim)


def default_dimension_grid(lo: int = 2, hi: int = 512) -> list[int]:
    """Powers of two in [lo, hi] plus rounded geometric means between them."""
    if lo < 1 or hi < lo:
        raise InvalidParameterError(f"need 1 <= lo <= hi, got ({lo}, {hi})")
    grid: list[int] = []
    p = 1
    while p < lo:
        p *= 2
    while p <= hi:
        grid.append(p)
        mean = round(p * math.sqrt(2))
        if p * 2 <= hi and lo <= mean <= hi:
            grid.append(mean)
        p *= 2
    return sorted(set(x for x in grid if lo <= x <= hi))


@dataclass(frozen=True)
class InstanceSpec:
    """Which generator a sweep draws its instances from.

    `dims` (the ground-truth dimension D) may hold several values for sphere
    instances; `m_factor` sets m = m_factor * D * n per dimension, otherwise
    `m` is literal. Poisson models use `lam` instead of m.
    """

    model: str
    n: int
    m: int | None = None
    lam: float | None = None
    dims: tuple[int, ...] | None = None
    m_factor: int | None = None

    def __post_init__(self):
        if self.model not in _FIXED_M_MODELS | _POISSON_MODELS:
            raise InvalidParameterError(f"unknown model {self.model!r}")
        if self.model == "sphere":
            if not self.dims:
                raise InvalidParameterError("sphere model needs at least one D")
            if self.m is None and self.m_factor is None:
                raise InvalidParameterError("sphere model needs m or m_factor")
        elif self.model in _FIXED_M_MODELS and self.m is None:
            raise InvalidParameterError(f"{self.model} model needs m")
        elif self.model in _POISSON_MODELS and self.lam is None:
            raise InvalidParameterError(f"{self.model} model needs lambda")
        if self.dims is not None:
            object.__setattr__(self, "dims", tuple(int(x) for x in self.dims))

    def dim_values(self) -> tuple[int | None, ...]:
        return self.dims if self.dims else (None,)

    def m_for(self, dim: int | None) -> int | None:
        if self.model in _POISSON_MODELS:
            return None
        if self.m_factor is not None and dim is not None:
            return self.m_factor * dim * self.n
        return self.m

    def generate(self, dim: int | None, seed: int) -> Instance:
        if self.model == "uniform":
            return generate_uniform_triplets(self.n, self.m, seed)
        if self.model == "quad-uniform":
            return generate_uniform_quadruplets(self.n, self.m, seed)
        if self.model == "poisson":
            return generate_poisson_triplets(self.n, self.lam, seed)
        if self.model == "quad-poisson":
            return generate_poisson_quadruplets(self.n, self.lam, seed)
        return generate_ground_truth_sphere(self.n, dim, self.m_for(dim), seed)


@dataclass(frozen=True)
class SweepConfig:
    instance: InstanceSpec
    d_grid: tuple[int, ...]
    output_path: str
    variants: tuple[str, ...] = ("unconstrained",)
    seeds: tuple[int, ...] = (0,)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(d=1))
    baseline_trials: int = 100
    workers: int | None = None

    def __post_init__(self):
        if not self.d_grid:
            raise InvalidParameterError("d_grid must be nonempty")
        grid = tuple(int(x) for x in self.d_grid)
        if list(grid) != sorted(grid):
            raise InvalidParameterError("d_grid must be ascending")
        object.__setattr__(self, "d_grid", grid)
        for v in self.variants:
            if v not in VARIANTS:
                raise InvalidParameterError(f"unknown variant {v!r}")
        object.__setattr__(self, "variants", tuple(self.variants))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))


@dataclass(frozen=True)
class SweepRecord:
    model: str
    n: int
    m: int
    D: int | None
    d: int
    variant: str
    seed: int
    final_accuracy: float
    baseline_accuracy: float
    steps_run: int
    wall_seconds: float


def _cell_key(model: str, n: int, m: int | None, dim: int | None, d: int, variant: str, seed: int):
    # Poisson models draw m at generation time, so m stays out of their key.
    m_part = None if model in _POISSON_MODELS else m
    return (model, n, m_part, dim, d, variant, seed)


def _record_key(rec: SweepRecord):
    return _cell_key(rec.model, rec.n, rec.m, rec.D, rec.d, rec.variant, rec.seed)


def write_sweep_csv(path: str, records: list[SweepRecord]) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write(CSV_VERSION_LINE + "\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in records:
            fh.write(
                ",".join(
                    [
                        r.model,
                        str(r.n),
                        str(r.m),
                        "" if r.D is None else str(r.D),
                        str(r.d),
                        r.variant,
                        str(r.seed),
                        f"{r.final_accuracy:.17g}",
                        f"{r.baseline_accuracy:.17g}",
                        str(r.steps_run),
                        f"{r.wall_seconds:.3f}",
                    ]
                )
                + "\n"
            )
    os.replace(tmp, path)


def load_sweep_csv(path: str) -> list[SweepRecord]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != CSV_VERSION_LINE:
        raise InvalidInputError(f"{path!r}: missing version line {CSV_VERSION_LINE!r}")
    if len(lines) < 2 or lines[1] != ",".join(CSV_COLUMNS):
        raise InvalidInputError(f"{path!r}: header does not match {CSV_COLUMNS}")
    out = []
    for ln in lines[2:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise InvalidInputError(f"{path!r}: bad row {ln!r}")
        out.append(
            SweepRecord(
                model=parts[0],
                n=int(parts[1]),
                m=int(parts[2]),
                D=int(parts[3]) if parts[3] else None,
                d=int(parts[4]),
                variant=parts[5],
                seed=int(parts[6]),
                final_accuracy=float(parts[7]),
                baseline_accuracy=float(parts[8]),
                steps_run=int(parts[9]),
                wall_seconds=float(parts[10]),
            )
        )
    return out


def _canonical_cells(config: SweepConfig):
    spec = config.instance
    for dim in spec.dim_values():
        for d in config.d_grid:
            for variant in config.variants:
                for seed in config.seeds:
                    yield dim, d, variant, seed


def _run_cell(config: SweepConfig, dim: int | None, d: int, variant: str, seed: int) -> SweepRecord:
    spec = config.instance
    instance = spec.generate(dim, derive_seed(seed, 0))
    cfg = replace(config.train, d=d, spherical=(variant == "spherical"), seed=derive_seed(seed, 1))
    t0 = time.perf_counter()
    result = train(instance, cfg)
    wall = round(time.perf_counter() - t0, 3)  # CSV resolution
    baseline = trivial_baseline(instance, config.baseline_trials, seed=derive_seed(seed, 2))
    return SweepRecord(
        model=spec.model,
        n=spec.n,
        m=instance.m,
        D=dim,
        d=d,
        variant=variant,
        seed=seed,
        final_accuracy=result.final_accuracy,
        baseline_accuracy=baseline.mean,
        steps_run=result.steps_run,
        wall_seconds=wall,
    )


def _worker_width(config: SweepConfig) -> int:
    width = max(1, config.workers) if config.workers is not None else 1
    env = os.environ.get("LAB_THREADS")
    if env:
        cap = max(1, int(env))
        width = min(width, cap) if config.workers is not None else cap
    return width


def run_sweep(config: SweepConfig) -> list[SweepRecord]:
    """Run all missing cells and keep the CSV current after each one.

    Cell failures are reported on stderr and leave a gap instead of aborting
    the sweep; a later run retries them.
    """
    path = config.output_path
    known: dict[tuple, SweepRecord] = {}
    if os.path.exists(path):
        for rec in load_sweep_csv(path):
            known[_record_key(rec)] = rec
    cells = list(_canonical_cells(config))
    spec = config.instance

    def key_of(cell):
        dim, d, variant, seed = cell
        return _cell_key(spec.model, spec.n, spec.m_for(dim), dim, d, variant, seed)

    todo = [c for c in cells if key_of(c) not in known]

    def flush():
        ordered = [known[key_of(c)] for c in cells if key_of(c) in known]
        extras = [rec for key, rec in known.items() if key not in {key_of(c) for c in cells}]
        write_sweep_csv(path, ordered + extras)

    if not todo and known:
        flush()
        return [known[key_of(c)] for c in cells if key_of(c) in known]

    width = _worker_width(config)
    if width == 1:
        for cell in todo:
            try:
                rec = _run_cell(config, *cell)
            except (LabError, OSError) as exc:
                print(f"sweep cell {cell} failed: {exc}", file=sys.stderr)
                continue
            known[key_of(cell)] = rec
            flush()
    else:
        with ThreadPoolExecutor(max_workers=width) as pool:
            futures = {pool.submit(_run_cell, config, *cell): cell for cell in todo}
            pending = set(futures)
            while pending:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    cell = futures[fut]
                    try:
                        rec = fut.result()
                    except (LabError, OSError) as exc:
                        print(f"sweep cell {cell} failed: {exc}", file=sys.stderr)
                        continue
                    known[key_of(cell)] = rec
                    flush()
    flush()
    return [known[key_of(c)] for c in cells if key_of(c) in known]


def trend_report(records: list[SweepRecord]) -> dict[tuple, int]:
    """Inversions of the seed-median accuracy along d, per (D, variant) curve.

    Soft check: more than one inversion on a ground-truth curve is worth a
    look but is not an error.
    """
    curves: dict[tuple, dict[int, list[float]]] = {}
    for r in records:
        curves.setdefault((r.D, r.variant), {}).setdefault(r.d, []).append(r.final_accuracy)
    out = {}
    for key, by_d in curves.items():
        ds = sorted(by_d)
        medians = [float(np.median(by_d[d])) for d in ds]
        out[key] = sum(1 for a, b in zip(medians, medians[1:]) if b < a)
    return out


# ---------------------------------------------------------------------------
# named verification suites


@dataclass(frozen=True)
class LemmaReport:
    name: str
    passed: bool
    threshold: float
    stats: dict


def _coupling_check(n: int, m: int, draws: int, seed: int, level: float) -> LemmaReport:
    """Conditioned-Poisson vs fixed-m constraint histograms, two-sample chi-square.

    Conditioning the Poisson model on its total count hitting m should leave
    exactly the fixed-m distribution, so the test must not reject.
    """
    tuple_count = triplet_tuple_count(n)
    lam = m / tuple_count

    def encode(inst: Instance) -> np.ndarray:
        c = inst.constraints
        return (c[:, 0] * n + c[:, 1]) * n + c[:, 2]

    hist_fixed = np.zeros(n**3, dtype=np.int64)
    for i in range(draws):
        inst = generate_uniform_triplets(n, m, derive_seed(seed, i))
        np.add.at(hist_fixed, encode(inst), 1)

    hist_cond = np.zeros(n**3, dtype=np.int64)
    kept = 0
    attempt = 0
    while kept < draws:
        inst = generate_poisson_triplets(n, lam, derive_seed(seed, 10_000_000 + attempt))
        attempt += 1
        if inst.m != m:
            continue
        np.add.at(hist_cond, encode(inst), 1)
        kept += 1

    support = (hist_fixed + hist_cond) > 0
    table = np.stack([hist_fixed[support], hist_cond[support]])
    chi2, pvalue, dof, _ = _scipy_stats.chi2_contingency(table)
    return LemmaReport(
        name="coupling",
        passed=bool(pvalue >= level),
        threshold=level,
        stats={
            "p_value": float(pvalue),
            "chi2": float(chi2),
            "dof": int(dof),
            "draws": draws,
            "poisson_attempts": attempt,
            "n": n,
            "m": m,
            "lambda": lam,
        },
    )


def verify_lemmas(name: str, seed: int = 0, **params) -> LemmaReport:
    """Run one named Monte Carlo check and compare against its threshold.

    Suites: acyclicity, acyclicity-quad, arboricity-tail, baseline,
    subadditivity, coupling.
    """
    if name == "acyclicity":
        n = int(params.pop("n", 400))
        lam = params.pop("lam", None)
        lam = 0.1 * n**-1.5 if lam is None else float(lam)
        trials = int(params.pop("trials", 200))
        threshold = float(params.pop("threshold", 0.9))
        est = monte_carlo_acyclicity(n, lam, trials, seed)
        return LemmaReport(name, est.fraction >= threshold, threshold, est.__dict__ | {"n": n, "lambda": lam})
    if name == "acyclicity-quad":
        n = int(params.pop("n", 200))
        lam = params.pop("lam", None)
        lam = 0.1 * n**-2.0 if lam is None else float(lam)
        trials = int(params.pop("trials", 200))
        threshold = float(params.pop("threshold", 0.9))
        est = monte_carlo_acyclicity(n, lam, trials, seed, quadruplets=True)
        return LemmaReport(name, est.fraction >= threshold, threshold, est.__dict__ | {"n": n, "lambda": lam})
    if name == "arboricity-tail":
        n = int(params.pop("n", 200))
        alpha = float(params.pop("alpha", 2.0))
        trials = int(params.pop("trials", 100))
        threshold = float(params.pop("threshold", 0.95))
        est = monte_carlo_arboricity_bound(n, alpha, trials, seed)
        return LemmaReport(name, est.fraction >= threshold, threshold, est.__dict__ | {"n": n, "alpha": alpha})
    if name == "baseline":
        n = int(params.pop("n", 30))
        m = int(params.pop("m", 400))
        trials = int(params.pop("trials", 10_000))
        tol = float(params.pop("tol", 0.01))
        inst = generate_uniform_triplets(n, m, derive_seed(seed, 0))
        res = trivial_baseline(inst, trials, seed=derive_seed(seed, 1))
        return LemmaReport(
            "baseline",
            abs(res.mean - 0.5) <= tol,
            tol,
            {"mean": res.mean, "stderr": res.stderr, "trials": trials, "n": n, "m": m},
        )
    if name == "subadditivity":
        count = int(params.pop("count", 5))
        n = int(params.pop("n", 20))
        m = int(params.pop("m", 100))
        rows = []
        ok = True
        for i in range(count):
            inst = (
                generate_uniform_triplets(n, m, derive_seed(seed, i))
                if i % 2 == 0
                else generate_uniform_quadruplets(n, m, derive_seed(seed, i))
            )
            rep = subadditivity_check(build_constraint_graph(inst))
            ok &= rep.holds
            rows.append((rep.rho_total, rep.rho_first, rep.rho_second))
        return LemmaReport("subadditivity", ok, 1.0, {"rho_triples": rows, "count": count})
    if name == "coupling":
        return _coupling_check(
            n=int(params.pop("n", 6)),
            m=int(params.pop("m", 2)),
            draws=int(params.pop("draws", 100_000)),
            seed=seed,
            level=float(params.pop("level", 0.001)),
        )
    raise InvalidParameterError(f"unknown verification suite {name!r}")


# ---------------------------------------------------------------------------
# end-to-end pipeline for the main dimension/accuracy statement


@dataclass(frozen=True)
class Theorem3SeedResult:
    seed: int
    m: int
    realizable: bool
    embed_exact: bool | None
    rho: int
    implied_dim_bound: int
    collapse_accuracy: float
    fulldim_accuracy: float | None


@dataclass(frozen=True)
class Theorem3Report:
    dim: int
    n: int
    epsilon: float
    c1: float
    c2: float
    d_collapse: int
    results: list[Theorem3SeedResult]

    @property
    def realizable_fraction(self) -> float:
        return sum(r.realizable for r in self.results) / len(self.results)

    @property
    def embed_exact_fraction(self) -> float:
        done = [r for r in self.results if r.embed_exact is not None]
        return sum(r.embed_exact for r in done) / len(done) if done else 0.0

    @property
    def best_collapse_accuracy(self) -> float:
        return max(r.collapse_accuracy for r in self.results)

    @property
    def collapse_cap(self) -> float:
        return 0.5 + self.epsilon


def verify_theorem3(
    dim: int,
    n: int,
    epsilon: float,
    seeds: int,
    c1: float = 1.0 / 240.0,
    c2: float = 1.0,
    restarts: int = 3,
    train_template: TrainConfig | None = None,
    seed: int = 0,
    include_fulldim_arm: bool = False,
) -> Theorem3Report:
    """Per-seed pipeline: realizability arm, arboricity arm, collapse arm.

    (a) draw a uniform instance with m = round(c1 * D * n) constraints;
    (b) certify it and, when realizable, check that the ordering embedding
        satisfies every constraint;
    (c) compute the constraint-graph arboricity and the 4*rho dimension bound;
    (d) train at d = round(c2 * epsilon^2 * D) with several restarts and keep
        the best accuracy found (an empirical lower bound on the optimum; the
        matching upper bound is information-theoretic, not searchable).
    """
    if dim < 2 or n < 3 or seeds < 1 or epsilon <= 0:
        raise InvalidParameterError("need D >= 2, n >= 3, seeds >= 1, epsilon > 0")
    m = max(1, round(c1 * dim * n))
    d_collapse = max(1, round(c2 * epsilon * epsilon * dim))
    template = train_template or TrainConfig(d=1)
    results = []
    for s in range(seeds):
        master = derive_seed(seed, s)
        inst = generate_uniform_triplets(n, m, derive_seed(master, 0))
        cert = certify(inst)
        embed_exact = None
        if cert.realizable:
            emb = embed_from_ordering(n, complete_ordering(n, cert.ordering))
            embed_exact = evaluate_accuracy(emb, inst) == 1.0
        report = arboricity(build_constraint_graph(inst))
        best = 0.0
        for r in range(restarts):
            cfg = replace(template, d=d_collapse, seed=derive_seed(master, 10 + r))
            best = max(best, train(inst, cfg).final_accuracy)
        full = None
        if include_fulldim_arm:
            cfg = replace(template, d=dim, seed=derive_seed(master, 50))
            full = train(inst, cfg).final_accuracy
        results.append(
            Theorem3SeedResult(
                seed=s,
                m=m,
                realizable=cert.realizable,
                embed_exact=embed_exact,
                rho=report.rho,
                implied_dim_bound=report.implied_dim_bound,
                collapse_accuracy=best,
                fulldim_accuracy=full,
            )
        )
    return Theorem3Report(
        dim=dim,
        n=n,
        epsilon=epsilon,
        c1=c1,
        c2=c2,
        d_collapse=d_collapse,
        results=results,
    )


# ---------------------------------------------------------------------------
# configuration files and presets


def config_from_mapping(data: dict, output_path: str | None = None) -> SweepConfig:
    """Build a SweepConfig from a flat key-value mapping (the TOML schema)."""
    data = dict(data)
    model = data.pop("model")
    n = int(data.pop("n"))
    dims = data.pop("D", None)
    if isinstance(dims, (int, float)):
        dims = (int(dims),)
    elif dims is not None:
        dims = tuple(int(x) for x in dims)
    spec = InstanceSpec(
        model=model,
        n=n,
        m=int(data.pop("m")) if "m" in data else None,
        lam=float(data.pop("lambda")) if "lambda" in data else None,
        dims=dims,
        m_factor=int(data.pop("m_factor")) if "m_factor" in data else None,
    )
    if "d_grid" in data:
        d_grid = tuple(int(x) for x in data.pop("d_grid"))
    elif "d_range" in data:
        lo, hi = data.pop("d_range")
        d_grid = tuple(default_dimension_grid(int(lo), int(hi)))
    else:
        d_grid = tuple(default_dimension_grid())
    train_kwargs = {}
    for key, field_name in [
        ("gamma", "gamma"),
        ("lr", "learning_rate"),
        ("weight_decay", "weight_decay"),
        ("steps", "steps"),
        ("batch_size", "batch_size"),
        ("init_scale", "init_scale"),
        ("eval_every", "eval_every"),
        ("patience", "patience"),
    ]:
        if key in data:
            train_kwargs[field_name] = data.pop(key)
    out = output_path or data.pop("out", None)
    if out is None:
        raise InvalidParameterError("sweep config needs an output path ('out' key or --out)")
    config = SweepConfig(
        instance=spec,
        d_grid=d_grid,
        output_path=str(out),
        variants=tuple(data.pop("variants", ("unconstrained",))),
        seeds=tuple(int(s) for s in data.pop("seeds", (0,))),
        train=TrainConfig(d=1, **train_kwargs),
        baseline_trials=int(data.pop("baseline_trials", 100)),
        workers=int(data.pop("workers")) if "workers" in data else None,
    )
    data.pop("out", None)
    if data:
        raise InvalidParameterError(f"unknown sweep config keys: {sorted(data)}")
    return config


# Full-scale presets mirror the published experiment setups; the desk preset
# finishes in about a minute and feeds the figure renderer's tests.
PRESETS: dict[str, dict] = {
    "figure1": {
        "model": "sphere",
        "n": 1000,
        "D": [128, 256, 512, 1024],
        "m": 1_000_000,
        "d_range": [2, 512],
        "variants": ["unconstrained", "spherical"],
        "seeds": [0],
    },
    "figure2": {
        "model": "uniform",
        "n": 4000,
        "m": 1_000_000,
        "d_range": [2, 512],
        "variants": ["unconstrained", "spherical"],
        "seeds": [0],
    },
    "figure1-desk": {
        "model": "sphere",
        "n": 60,
        "D": [4, 8],
        "m_factor": 30,
        "d_grid": [1, 2, 4, 8],
        "variants": ["unconstrained", "spherical"],
        "seeds": [0, 1],
        "steps": 300,
        "batch_size": 256,
        "baseline_trials": 50,
    },
}
