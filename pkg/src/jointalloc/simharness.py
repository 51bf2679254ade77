"""Random scenario generation and batch experiments.

Nodes are dropped uniformly in a square; each link's gain is the path loss
``(1/d)^2`` times an exponential fading power gain with mean ``sigma2``.
Every run draws from its own counter-based generator keyed by
``(seed, run index, stream)``, so a run's channel does not depend on which
worker computes it or on the swept parameter value.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__, kernels
from .admission import (
    exhaustive_admission_no_relay,
    exhaustive_admission_relay,
    greedy_admission_no_relay,
    greedy_admission_relay,
)
from .allocators import allocate, ebpa, user_capacities
from .bandwidth_min import min_total_bandwidth
from .errors import InfeasibleInstanceError, InvalidInputError, JointAllocError, ScenarioFormatError
from .model import ChannelGains, NetworkTopology, Node, User, check_feasibility, phases_of

STREAM_GEOMETRY = 0
STREAM_FADING = 1
STREAM_THRESHOLDS = 2
MAX_REDRAWS = 100

SWEEP_FIELDS = {"P_R": "relay_budget", "W": "bandwidth", "c": "threshold", "P_S": "source_budget",
                "c0": "threshold_low"}


@dataclass(frozen=True)
class ScenarioConfig:
    """Network layout and channel statistics for a batch of random runs.

    ``source_of[i]`` and ``relay_of[i]`` are 0-based transmitter indices of
    user ``i``; ``relay_of=None`` disables relaying.  Thresholds are
    ``threshold`` for every user, or drawn uniformly from
    ``[threshold_low, threshold_low + threshold_width]`` per run when
    ``threshold_width`` is set.
    """

    source_of: tuple = (0, 1, 2, 3)
    relay_of: Optional[tuple] = (0, 0, 1, 1)
    relay_positions: tuple = ((5.0, 3.0), (5.0, 7.0))
    area: tuple = ((0.0, 0.0), (10.0, 10.0))
    source_budget: float = 20.0
    relay_budget: float = 40.0
    bandwidth: float = 10.0
    sigma2: float = 5.0
    noise_psd: float = 1.0
    threshold: float = 1.0
    threshold_low: float = 1.0
    threshold_width: Optional[float] = None
    runs: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "source_of", tuple(int(k) for k in self.source_of))
        if self.relay_of is not None:
            object.__setattr__(self, "relay_of", tuple(int(k) for k in self.relay_of))
        object.__setattr__(self, "relay_positions", tuple(tuple(map(float, p)) for p in self.relay_positions))
        object.__setattr__(self, "area", tuple(tuple(map(float, p)) for p in self.area))

    @property
    def n_users(self) -> int:
        return len(self.source_of)

    @property
    def relay_mode(self) -> bool:
        return self.relay_of is not None

    def problems(self) -> list[str]:
        out = []
        (x0, y0), (x1, y1) = self.area
        if not (x1 > x0 and y1 > y0):
            out.append("area must have positive width and height")
        if self.runs < 1:
            out.append("runs must be at least 1")
        for name in ("sigma2", "noise_psd", "source_budget", "relay_budget", "bandwidth"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                out.append(f"{name} must be positive and finite")
        if self.threshold_width is None:
            if not self.threshold > 0:
                out.append("threshold must be positive")
        elif not (self.threshold_low > 0 and self.threshold_width >= 0):
            out.append("threshold range must be positive")
        if not self.source_of or min(self.source_of) < 0:
            out.append("source_of must list a nonnegative source index per user")
        if self.relay_of is not None:
            if len(self.relay_of) != self.n_users:
                out.append("relay_of must have one entry per user")
            elif min(self.relay_of) < 0 or max(self.relay_of) >= len(self.relay_positions):
                out.append("relay_of references a relay without a position")
        for p in self.relay_positions:
            if not (x0 <= p[0] <= x1 and y0 <= p[1] <= y1):
                out.append(f"relay position {p} lies outside the area")
        return out

    def validate(self) -> "ScenarioConfig":
        problems = self.problems()
        if problems:
            raise InvalidInputError("; ".join(problems))
        return self

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def with_parameter(self, name: str, value: float) -> "ScenarioConfig":
        if name not in SWEEP_FIELDS:
            raise InvalidInputError(f"unknown sweep parameter {name!r}; choose from {sorted(SWEEP_FIELDS)}")
        return self.replace(**{SWEEP_FIELDS[name]: float(value)})

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = json.loads(json.dumps(v))
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise ScenarioFormatError("<root>", "expected an object")
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in doc.items():
            if key == "setup":
                continue
            if key not in names:
                raise ScenarioFormatError(key, "unknown configuration field")
            kwargs[key] = value
        base = setup_config(int(doc["setup"])) if "setup" in doc else cls()
        try:
            cfg = base.replace(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ScenarioFormatError("<config>", str(exc)) from None
        problems = cfg.problems()
        if problems:
            raise ScenarioFormatError("<config>", "; ".join(problems))
        return cfg


def setup_config(setup: int) -> ScenarioConfig:
    """The four eight-user admission benchmark layouts.

    1: four sources with two users each; 2: two sources with four users
    each; 3 and 4 add relays to 1 and 2.  Thresholds are uniform on
    ``[c0, c0 + 4]``.
    """
    common = dict(bandwidth=10.0, sigma2=10.0, threshold_width=4.0, runs=20)
    pairs = (0, 0, 1, 1, 2, 2, 3, 3)
    halves = (0, 0, 0, 0, 1, 1, 1, 1)
    if setup == 1:
        return ScenarioConfig(source_of=pairs, relay_of=None, source_budget=40.0, **common)
    if setup == 2:
        return ScenarioConfig(source_of=halves, relay_of=None, source_budget=80.0, **common)
    if setup == 3:
        return ScenarioConfig(source_of=pairs, relay_of=pairs, source_budget=40.0, relay_budget=40.0,
                              relay_positions=((5, 2), (5, 4), (5, 6), (5, 8)), **common)
    if setup == 4:
        return ScenarioConfig(source_of=halves, relay_of=(0, 0, 1, 1, 1, 1, 0, 0), source_budget=80.0,
                              relay_budget=80.0, relay_positions=((5, 3), (5, 7)), **common)
    raise InvalidInputError(f"setup must be 1, 2, 3 or 4 (got {setup!r})")


def run_rng(seed: int, run_index: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, run_index, stream])))


def fading_power(rng: np.random.Generator, sigma2: float, size) -> np.ndarray:
    """Rayleigh fading power gains: exponential with mean ``sigma2``."""
    return rng.exponential(sigma2, size)


def path_loss(d) -> np.ndarray:
    return 1.0 / np.square(d)


def _uniform_points(rng, area, n):
    (x0, y0), (x1, y1) = area
    return np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])


def _distances(rng, area, a, b, redraw_b):
    """Distances ``|a_i - b_i|``; zero distances redraw the free endpoint."""
    d = np.linalg.norm(a - b, axis=1)
    tries = 0
    while np.any(d == 0):
        if not redraw_b or tries >= MAX_REDRAWS:
            raise InvalidInputError("degenerate geometry: two link ends coincide")
        bad = d == 0
        b[bad] = _uniform_points(rng, area, int(bad.sum()))
        d = np.linalg.norm(a - b, axis=1)
        tries += 1
    return d


def generate_scenario(config: ScenarioConfig, run_index: int) -> tuple[NetworkTopology, ChannelGains]:
    """Topology and channel realisation of run ``run_index``."""
    n = config.n_users
    n_src = max(config.source_of) + 1
    geo = run_rng(config.seed, run_index, STREAM_GEOMETRY)
    sources = _uniform_points(geo, config.area, n_src)
    dests = _uniform_points(geo, config.area, n)
    src_pos = sources[list(config.source_of)]
    fade = run_rng(config.seed, run_index, STREAM_FADING)
    if config.threshold_width is None:
        c = np.full(n, float(config.threshold))
    else:
        tr = run_rng(config.seed, run_index, STREAM_THRESHOLDS)
        c = tr.uniform(config.threshold_low, config.threshold_low + config.threshold_width, n)
    src_nodes = tuple(Node(k + 1, float(config.source_budget)) for k in range(n_src))
    if config.relay_mode:
        relay_pos = np.asarray(config.relay_positions)[list(config.relay_of)]
        d_sr = np.linalg.norm(src_pos - relay_pos, axis=1)
        if np.any(d_sr == 0):
            raise InvalidInputError("degenerate geometry: a source sits on its relay")
        d_rd = _distances(geo, config.area, relay_pos, dests, redraw_b=True)
        h_sr = path_loss(d_sr) * fading_power(fade, config.sigma2, n)
        h_rd = path_loss(d_rd) * fading_power(fade, config.sigma2, n)
        gains = ChannelGains.relayed(h_sr, h_rd)
        n_rel = len(config.relay_positions)
        relays = tuple(Node(k + 1, float(config.relay_budget)) for k in range(n_rel))
        used = set(config.relay_of)
        relays = tuple(r for k, r in enumerate(relays) if k in used)
        users = tuple(User(i + 1, config.source_of[i] + 1, config.relay_of[i] + 1, float(c[i]))
                      for i in range(n))
    else:
        d_sd = _distances(geo, config.area, src_pos, dests, redraw_b=True)
        gains = ChannelGains.direct(path_loss(d_sd) * fading_power(fade, config.sigma2, n))
        relays = ()
        users = tuple(User(i + 1, config.source_of[i] + 1, None, float(c[i])) for i in range(n))
    topology = NetworkTopology(src_nodes, relays, users, float(config.bandwidth), float(config.noise_psd))
    return topology, gains


# --------------------------------------------------------------------------
# batch execution


def _parallel_map(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _chunks(runs: int, size: int):
    return [range(a, min(a + size, runs)) for a in range(0, runs, size)]


def _scheme_value(topology, gains, scheme, objective):
    """Metric of one scheme; ``None`` if the scheme cannot meet the thresholds."""
    if scheme == "ebpa" and objective == "powermin":
        alloc = ebpa(topology, gains)
        caps = user_capacities(topology, gains, alloc)
        if np.any(caps < topology.thresholds()):
            return None, alloc
        return float(alloc.p_s.sum() + (alloc.p_r.sum() if alloc.relay_mode else 0.0)), alloc
    try:
        sol = allocate(topology, gains, objective, scheme)
    except InfeasibleInstanceError:
        return None, None
    return sol.value, sol.allocation


def _sweep_task(args):
    config, parameter, value, runs, schemes, objective = args
    cfg = config.with_parameter(parameter, value)
    out = []
    for r in runs:
        topology, gains = generate_scenario(cfg, r)
        row = {}
        for scheme in schemes:
            try:
                v, alloc = _scheme_value(topology, gains, scheme, objective)
                if alloc is not None and not check_feasibility(topology, alloc):
                    row[scheme] = ("failed", "allocation fails the feasibility check")
                else:
                    row[scheme] = ("ok", v) if v is not None else ("infeasible", None)
            except JointAllocError as exc:
                row[scheme] = ("failed", f"{type(exc).__name__}: {exc}")
        out.append((r, row))
    return value, out


@dataclass
class SweepResult:
    """Per-value, per-scheme statistics of a sweep plus the raw per-run values.

    Means are taken over runs where every scheme succeeded (paired runs).
    ``improvement[(value, baseline)]`` is ``mean(obpa) / mean(baseline) - 1``
    for capacity objectives and ``1 - mean(obpa) / mean(baseline)`` (the
    power saving) for power minimisation.  ``statuses[value]`` lists
    ``(run, {scheme: (status, value)})`` for every run, paired or not.
    """

    parameter: str
    objective: str
    schemes: tuple
    rows: list
    improvement: dict
    per_run: dict
    failures: list
    statuses: dict = dataclasses.field(default_factory=dict)

    def table(self, delimiter: str = ",") -> str:
        buf = io.StringIO()
        buf.write(delimiter.join([self.parameter, "scheme", "mean", "stderr", "n", "excluded", "infeasible"]) + "\n")
        for r in self.rows:
            buf.write(delimiter.join([_fmt(r["value"]), r["scheme"], _fmt(r["mean"]), _fmt(r["stderr"]),
                                      str(r["n"]), str(r["excluded"]), str(r["infeasible"])]) + "\n")
        return buf.getvalue()

    def improvement_table(self, delimiter: str = ",") -> str:
        buf = io.StringIO()
        buf.write(delimiter.join([self.parameter, "baseline", "improvement", "mean_ratio"]) + "\n")
        for (value, base), (imp, ratio) in sorted(self.improvement.items()):
            buf.write(delimiter.join([_fmt(value), base, _fmt(imp), _fmt(ratio)]) + "\n")
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else str(x)
    return str(x)


def run_sweep(config: ScenarioConfig, parameter: str, values: Sequence[float],
              schemes: Sequence[str] = ("obpa", "ebopa", "ebpa"), objective: str = "sum",
              workers: int = 1, chunk: int = 25) -> SweepResult:
    """Solve every scheme on every run for each swept value and aggregate."""
    config.validate()
    schemes = tuple(schemes)
    if objective not in ("sum", "maxmin", "powermin"):
        raise InvalidInputError(f"unknown objective {objective!r}")
    for s in schemes:
        if s not in ("obpa", "ebopa", "ebpa"):
            raise InvalidInputError(f"unknown scheme {s!r}")
    values = [float(v) for v in values]
    tasks = [(config, parameter, v, runs, schemes, objective)
             for v in values for runs in _chunks(config.runs, chunk)]
    if parameter not in SWEEP_FIELDS:
        raise InvalidInputError(f"unknown sweep parameter {parameter!r}; choose from {sorted(SWEEP_FIELDS)}")
    collected: dict = {v: [] for v in values}
    for value, part in _parallel_map(_sweep_task, tasks, workers):
        collected[value].extend(part)
    rows, improvement, per_run, failures, statuses = [], {}, {}, [], {}
    for v in values:
        runs = sorted(collected[v], key=lambda t: t[0])
        statuses[v] = runs
        paired = [row for _, row in runs if all(row[s][0] == "ok" for s in schemes)]
        for r, row in runs:
            for s in schemes:
                if row[s][0] == "failed":
                    failures.append((v, r, s, row[s][1]))
        means = {}
        for s in schemes:
            vals = np.array([row[s][1] for row in paired], dtype=float)
            per_run[(v, s)] = vals
            n = len(vals)
            mean = float(np.mean(vals)) if n else math.nan
            stderr = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
            means[s] = mean
            rows.append({"value": v, "scheme": s, "mean": mean, "stderr": stderr, "n": n,
                         "excluded": sum(1 for _, row in runs if row[s][0] == "failed"),
                         "infeasible": sum(1 for _, row in runs if row[s][0] == "infeasible")})
        if "obpa" in schemes:
            for base in schemes:
                if base == "obpa" or not paired:
                    continue
                ratio = per_run[(v, "obpa")] / per_run[(v, base)]
                if objective == "powermin":
                    imp = 1.0 - means["obpa"] / means[base]
                    mean_ratio = float(np.mean(1.0 - ratio))
                else:
                    imp = means["obpa"] / means[base] - 1.0
                    mean_ratio = float(np.mean(ratio - 1.0))
                improvement[(v, base)] = (imp, mean_ratio)
    return SweepResult(parameter, objective, schemes, rows, improvement, per_run, failures, statuses)


def _admission_task(args):
    config, c, runs, schemes = args
    cfg = config.replace(threshold=float(c), threshold_width=None)
    out = []
    for r in runs:
        topology, gains = generate_scenario(cfg, r)
        row = {}
        for scheme in schemes:
            if scheme == "obpa":
                ok = all(min_total_bandwidth(topology, gains, phase=ph).total <= topology.total_bandwidth
                         for ph in phases_of(topology))
            elif scheme == "ebopa":
                try:
                    allocate(topology, gains, "powermin", "ebopa")
                    ok = True
                except InfeasibleInstanceError:
                    ok = False
            else:
                ok = bool(np.all(user_capacities(topology, gains, ebpa(topology, gains))
                                 >= topology.thresholds()))
            row[scheme] = ok
        out.append((r, row))
    return c, out


def admission_probability(config: ScenarioConfig, thresholds: Sequence[float],
                          schemes: Sequence[str] = ("obpa", "ebopa", "ebpa"),
                          workers: int = 1, chunk: int = 50) -> list[dict]:
    """Fraction of runs in which every user can be served at threshold ``c``."""
    config.validate()
    values = [float(c) for c in thresholds]
    tasks = [(config, c, runs, tuple(schemes)) for c in values for runs in _chunks(config.runs, chunk)]
    collected: dict = {c: [] for c in values}
    for c, part in _parallel_map(_admission_task, tasks, workers):
        collected[c].extend(part)
    rows = []
    for c in values:
        runs = sorted(collected[c], key=lambda t: t[0])
        for s in schemes:
            hits = sum(1 for _, row in runs if row[s])
            rows.append({"c": c, "scheme": s, "probability": hits / len(runs), "n": len(runs)})
    return rows


def _benchmark_task(args):
    config, c0, runs = args
    cfg = config.replace(threshold_low=float(c0))
    out = []
    for r in runs:
        topology, gains = generate_scenario(cfg, r)
        if cfg.relay_mode:
            greedy, exhaustive = greedy_admission_relay, exhaustive_admission_relay
        else:
            greedy, exhaustive = greedy_admission_no_relay, exhaustive_admission_no_relay
        t0 = time.perf_counter()
        g = greedy(topology, gains)
        t1 = time.perf_counter()
        e = exhaustive(topology, gains)
        t2 = time.perf_counter()
        out.append((r, {"greedy": g, "exhaustive": e, "time": (t1 - t0, t2 - t1)}))
    return c0, out


@dataclass
class BenchmarkResult:
    setup: int
    rows: list
    per_run: dict

    def table(self, delimiter: str = ",") -> str:
        cols = ["c0", "greedy_admitted", "exhaustive_admitted", "greedy_calls", "exhaustive_calls",
                "mismatches", "n"]
        buf = io.StringIO()
        buf.write(delimiter.join(cols) + "\n")
        for r in self.rows:
            buf.write(delimiter.join(_fmt(r[c]) for c in cols) + "\n")
        return buf.getvalue()

    def timing_table(self, delimiter: str = ",") -> str:
        buf = io.StringIO()
        buf.write(delimiter.join(["c0", "greedy_seconds", "exhaustive_seconds", "time_ratio"]) + "\n")
        for r in self.rows:
            buf.write(delimiter.join(_fmt(r[c]) for c in ("c0", "greedy_seconds", "exhaustive_seconds",
                                                           "time_ratio")) + "\n")
        return buf.getvalue()


def greedy_benchmark(setup: int, c0_values: Sequence[float], runs: Optional[int] = None,
                     seed: int = 0, workers: int = 1, config: Optional[ScenarioConfig] = None
                     ) -> BenchmarkResult:
    """Greedy against exhaustive admission on one of the benchmark layouts.

    Reports mean admitted counts, mean oracle calls and mean wall times per
    ``c0``; ``mismatches`` counts runs where greedy admitted fewer users.
    """
    cfg = config if config is not None else setup_config(setup)
    cfg = cfg.replace(seed=seed) if config is None else cfg
    if runs is not None:
        cfg = cfg.replace(runs=int(runs))
    cfg.validate()
    values = [float(c) for c in c0_values]
    tasks = [(cfg, c0, rr) for c0 in values for rr in _chunks(cfg.runs, 5)]
    collected: dict = {c: [] for c in values}
    for c0, part in _parallel_map(_benchmark_task, tasks, workers):
        collected[c0].extend(part)
    rows, per_run = [], {}
    for c0 in values:
        runs_ = [rec for _, rec in sorted(collected[c0], key=lambda t: t[0])]
        per_run[c0] = runs_
        g = np.array([rec["greedy"].n_admitted for rec in runs_], dtype=float)
        e = np.array([rec["exhaustive"].n_admitted for rec in runs_], dtype=float)
        tg = float(np.mean([rec["time"][0] for rec in runs_]))
        te = float(np.mean([rec["time"][1] for rec in runs_]))
        rows.append({
            "c0": c0,
            "greedy_admitted": float(np.mean(g)),
            "exhaustive_admitted": float(np.mean(e)),
            "greedy_calls": float(np.mean([rec["greedy"].oracle_calls for rec in runs_])),
            "exhaustive_calls": float(np.mean([rec["exhaustive"].oracle_calls for rec in runs_])),
            "mismatches": int(np.sum(g < e)),
            "n": len(runs_),
            "greedy_seconds": tg,
            "exhaustive_seconds": te,
            "time_ratio": tg / te if te > 0 else math.nan,
        })
    return BenchmarkResult(setup, rows, per_run)


def manifest(config: ScenarioConfig, **extra) -> dict:
    """Everything needed to reproduce a batch: config, seed, software versions."""
    import scipy

    return {
        "package": "jointalloc",
        "package_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": config.seed,
        "config": config.to_dict(),
        **extra,
    }
