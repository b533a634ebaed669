"""Seeded experiment runs, presets and plot-ready series.

A run is fully determined by its :class:`ExperimentConfig`; re-running a
config reproduces the CSV byte for byte.
"""

from __future__ import annotations

import dataclasses
import io
import math
import os
import tempfile
from dataclasses import dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .averaging import exact, gossip, isolated, kstar_theorem2
from .data import Dataset, SampleStream, generate_synthetic, read_idx
from .dda import NetworkState, Schedule, run_round
from .errors import ConfigError, EmptyResult, InvalidParam
from .losses import compute_reference_optimum, make_loss
from .metrics import CSV_COLUMNS, RegretLedger, RuntimeModel, optimality_gap, regret_ratio_curve
from .topology import lazify, make_graph, metropolis_weights, spectral_info

__all__ = [
    "ExperimentConfig",
    "RunResult",
    "SeedRun",
    "PRESETS",
    "preset_configs",
    "validate_config",
    "load_config",
    "dump_config",
    "run_experiment",
    "rounds_for_epsilon",
    "calibrate_c0",
    "emit_plots",
    "PLOT_KINDS",
]

MODES = ("online", "stochastic_opt")
PROTOCOLS = ("exact", "gossip_fixed", "gossip_auto", "gossip_single", "none")
LOSSES = ("quadratic", "multinomial_logistic")
PLOT_KINDS = ("regret_vs_time", "ratio_vs_rounds", "gap_vs_rounds")


@dataclass
class ExperimentConfig:
    mode: str = "online"
    n: int = 4
    b: int | None = None
    C: int | None = None
    rho: float | None = None
    m: int | None = None
    rounds: int | None = 100
    gamma: int = 1
    tau: float = 1.0
    topology: str = "erdos_renyi"
    p: float = 0.5
    degree: int = 3
    graph_seed: int = 0
    protocol: str = "gossip_single"
    k: int = 1
    lazy: bool = False
    loss: str = "multinomial_logistic"
    radius: float = 10.0
    data: str = "synthetic"
    classes: int = 10
    dim: int = 20
    samples: int = 10_000
    separation: float = 4.0
    noise: float = 1.0
    data_seed: int = 0
    idx_images: str | None = None
    idx_labels: str | None = None
    seeds: tuple[int, ...] = (0,)
    epsilon: float | None = None
    pilot_rounds: int = 200
    gap_every: int = 0
    name: str = "run"

    def resolved_b(self) -> int:
        if self.b is not None:
            return int(self.b)
        if self.C is not None:
            return int(self.C) * int(self.n)
        if self.rho is not None and self.m is not None:
            raw = self.m**self.rho
            return max(self.n, int(math.ceil(raw / self.n)) * self.n)
        raise ConfigError("one of b, C or (rho, m) is required", "b")

    def with_(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def validate_config(cfg: ExperimentConfig) -> None:
    """Raise ``ConfigError`` naming the first offending field."""
    if cfg.mode not in MODES:
        raise ConfigError(f"must be one of {MODES}", "mode")
    if cfg.n < 1:
        raise ConfigError("must be >= 1", "n")
    if cfg.rho is not None and not (0 < cfg.rho < 0.5):
        raise ConfigError("must lie in (0, 1/2)", "rho")
    b = cfg.resolved_b()
    if b < 1 or b % cfg.n:
        raise ConfigError(f"b={b} must be a positive multiple of n={cfg.n}", "b")
    if cfg.gamma < 1:
        raise ConfigError("must be a positive integer", "gamma")
    if cfg.tau < 0:
        raise ConfigError("must be >= 0", "tau")
    if cfg.protocol not in PROTOCOLS:
        raise ConfigError(f"must be one of {PROTOCOLS}", "protocol")
    if cfg.protocol == "gossip_fixed" and cfg.k < 1:
        raise ConfigError("must be >= 1 for gossip_fixed", "k")
    if cfg.protocol == "gossip_auto" and cfg.gamma >= b:
        raise ConfigError(f"gossip_auto needs gamma < b (b={b})", "gamma")
    if cfg.loss not in LOSSES:
        raise ConfigError(f"must be one of {LOSSES}", "loss")
    if cfg.radius <= 0:
        raise ConfigError("must be positive", "radius")
    if cfg.data not in ("synthetic", "idx"):
        raise ConfigError("must be 'synthetic' or 'idx'", "data")
    if cfg.data == "idx" and not (cfg.idx_images and cfg.idx_labels):
        raise ConfigError("idx data needs idx_images and idx_labels", "idx_images")
    if cfg.rounds is None and cfg.m is None and cfg.epsilon is None:
        raise ConfigError("one of rounds, m or epsilon is required", "rounds")
    if cfg.rounds is not None and cfg.rounds < 1:
        raise ConfigError("must be >= 1", "rounds")
    if cfg.epsilon is not None and cfg.epsilon <= 0:
        raise ConfigError("must be positive", "epsilon")
    if not cfg.seeds:
        raise ConfigError("at least one seed is required", "seeds")
    if cfg.gap_every < 0:
        raise ConfigError("must be >= 0", "gap_every")
    if cfg.topology not in ("complete", "ring", "grid2d", "erdos_renyi", "random_regular"):
        raise ConfigError("unknown topology", "topology")


# -- config text format ------------------------------------------------------

def _field_types() -> dict[str, str]:
    return {f.name: str(f.type) for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    types = _field_types()
    if key not in types:
        raise ConfigError("unknown config key", key)
    t = types[key]
    raw = raw.strip()
    if raw.lower() in ("none", "") and "None" in t:
        return None
    try:
        if t.startswith("tuple"):
            return tuple(int(s) for s in raw.replace(" ", "").split(",") if s)
        if t.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if t.startswith("int"):
            return int(raw)
        if t.startswith("float"):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {t}", key) from exc
    return raw


def load_config(path: str | Path | None = None, overrides: dict | None = None,
                base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read ``key = value`` lines (``#`` comments allowed) and apply overrides."""
    values = {}
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value", None)
            key, raw = (s.strip() for s in line.split("=", 1))
            values[key] = _coerce(key, raw)
    for key, raw in (overrides or {}).items():
        values[key] = _coerce(key, raw) if isinstance(raw, str) else raw
    cfg = dataclasses.replace(base or ExperimentConfig(), **values)
    validate_config(cfg)
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    out = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(s) for s in v)
        out.append(f"{f.name} = {v}")
    return "\n".join(out) + "\n"


# -- results -----------------------------------------------------------------

@dataclass
class SeedRun:
    """Per-round series for one seed; index ``t - 1`` holds round ``t``."""

    seed: int
    samples_seen: np.ndarray
    regret_total: np.ndarray
    delta: np.ndarray
    gap: np.ndarray
    runtime: np.ndarray
    final_what: np.ndarray | None = field(default=None, repr=False)

    @property
    def regret_per_sample(self) -> np.ndarray:
        return self.regret_total / self.samples_seen


@dataclass
class RunResult:
    config: ExperimentConfig
    manifest: dict
    runs: list[SeedRun]

    @property
    def run_ids(self) -> list[str]:
        return [self.run_id(r.seed) for r in self.runs]

    def run_id(self, seed: int) -> str:
        return f"{self.config.name}-n{self.config.n}-s{seed}"

    def mean(self, attr: str) -> np.ndarray:
        return np.mean([getattr(r, attr) for r in self.runs], axis=0)

    def rows(self):
        m = self.manifest
        for r in self.runs:
            rid = self.run_id(r.seed)
            for i in range(len(r.samples_seen)):
                yield (
                    rid, m["n"], m["b"], m["mu"], m["k"], i + 1, int(r.samples_seen[i]),
                    float(r.regret_total[i]), float(r.regret_per_sample[i]),
                    float(r.delta[i]), float(r.gap[i]), float(r.runtime[i]),
                )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows():
            buf.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
        return buf.getvalue()

    def manifest_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.manifest.items())

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = f"{self.config.name}-n{self.config.n}"
        csv_path = out_dir / f"{stem}.csv"
        man_path = out_dir / f"{stem}.manifest"
        _atomic_write(csv_path, self.to_csv())
        _atomic_write(man_path, self.manifest_text())
        return csv_path, man_path

    @classmethod
    def from_csv(cls, path: str | Path) -> "RunResult":
        """Rebuild the per-seed series from a CSV written by :meth:`write`."""
        text = Path(path).read_text().splitlines()
        header = text[0].split(",")
        if tuple(header) != CSV_COLUMNS:
            raise InvalidParam(f"{path}: unexpected CSV header")
        by_run: dict[str, list[list[str]]] = {}
        for line in text[1:]:
            parts = line.split(",")
            by_run.setdefault(parts[0], []).append(parts)
        runs = []
        first = None
        for rid, rows in by_run.items():
            first = first or rows[0]
            a = np.array([[float(x) for x in r[6:]] for r in rows])
            seed = int(rid.rsplit("-s", 1)[1]) if "-s" in rid else len(runs)
            runs.append(SeedRun(seed, a[:, 0], a[:, 1], a[:, 3], a[:, 4], a[:, 5]))
        if first is None:
            raise EmptyResult(f"{path} has no rows")
        name = first[0].rsplit("-n", 1)[0]
        cfg = ExperimentConfig(n=int(first[1]), b=int(first[2]), name=name, seeds=tuple(r.seed for r in runs))
        manifest = {"n": int(first[1]), "b": int(first[2]), "mu": int(first[3]), "k": int(first[4])}
        return cls(cfg, manifest, runs)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


# -- running -----------------------------------------------------------------

@lru_cache(maxsize=16)
def _dataset(data, classes, dim, samples, separation, noise, seed, images, labels) -> Dataset:
    if data == "idx":
        return read_idx(images, labels)
    return generate_synthetic(classes, dim, samples, separation, seed, noise)


def _data_key(cfg: ExperimentConfig) -> tuple:
    return (cfg.data, cfg.classes, cfg.dim, cfg.samples, cfg.separation, cfg.noise,
            cfg.data_seed, cfg.idx_images, cfg.idx_labels)


@lru_cache(maxsize=16)
def _model(loss, radius, data_key: tuple):
    dataset = _dataset(*data_key)
    model = make_loss(loss, dataset, radius)
    compute_reference_optimum(model, dataset)
    return model


def _setup(cfg: ExperimentConfig):
    dataset = _dataset(*_data_key(cfg))
    model = _model(cfg.loss, cfg.radius, _data_key(cfg))
    b = cfg.resolved_b()
    graph = make_graph(cfg.topology, cfg.n, cfg.graph_seed, p=cfg.p, d=cfg.degree)
    P = metropolis_weights(graph)
    if cfg.lazy:
        P = lazify(P)
    spec = spectral_info(P)

    if cfg.protocol == "exact" or cfg.n == 1:
        proto = exact()
    elif cfg.protocol == "none":
        proto = isolated()
    elif cfg.protocol == "gossip_single":
        proto = gossip(P, 1)
    elif cfg.protocol == "gossip_fixed":
        proto = gossip(P, cfg.k)
    else:
        gap = spec.rho_gap
        if gap <= 0:
            raise ConfigError("weight matrix has rho = 1; use lazy = true", "lazy")
        proto = gossip(P, kstar_theorem2(model.L, b, cfg.n, cfg.gamma, gap))

    if cfg.mode == "online":
        latency = proto.latency(cfg.gamma, cfg.n)
        mu = int(math.ceil((b + latency) / cfg.n)) * cfg.n - b
        schedule = Schedule(model.K, b + mu)
    else:
        latency, mu = proto.latency(cfg.gamma, cfg.n), 0
        schedule = Schedule(model.K, b)
    runtime = RuntimeModel(cfg.tau, graph.max_degree, max(proto.k, 1), b, cfg.n,
                           proto.kind)
    return dataset, model, b, graph, spec, proto, latency, mu, schedule, runtime


def _gap_due(t: int, T: int, every: int) -> bool:
    if t == T:
        return True
    return every > 0 and t % every == 0


def _run_seed(cfg, seed, T, dataset, model, b, proto, mu, schedule, runtime) -> SeedRun:
    stream = SampleStream(dataset, seed)
    state = NetworkState.initial(cfg.n, model.dim)
    ledger = RegretLedger.empty(cfg.n)
    samples = np.empty(T, dtype=np.int64)
    regret = np.empty(T)
    delta = np.empty(T)
    gap = np.full(T, np.nan)
    rt = np.empty(T)
    for t in range(1, T + 1):
        if _gap_due(t, T, cfg.gap_every):
            # running average over w(1..t) is the predictor after t rounds
            gap[t - 1] = optimality_gap(model, state.what, dataset)
        state, trace = run_round(state, proto, model, schedule, stream, b, mu, cfg.gamma)
        ledger.add_round(trace.regret, trace.samples)
        samples[t - 1] = ledger.samples
        regret[t - 1] = ledger.total
        delta[t - 1] = trace.delta
        rt[t - 1] = t * runtime.time_per_round
    return SeedRun(seed, samples, regret, delta, gap, rt, state.what.copy())


def calibrate_c0(gap: float, n: int, rounds: int) -> float:
    """Constant ``c0`` in ``gap = sqrt(c0 / (n T))`` fitted to one pilot measurement."""
    if gap <= 0 or n < 1 or rounds < 1:
        raise InvalidParam("calibration needs a positive gap, n and rounds")
    return gap * gap * n * rounds


def rounds_for_epsilon(epsilon: float, n: int, C: int, c0: float) -> int:
    """``ceil(c0 / (n epsilon^2))`` rounds, at least 1.

    ``c0`` must come from a pilot at the same per-node batch ``C``.
    """
    if epsilon <= 0 or n < 1 or C < 1 or c0 <= 0:
        raise InvalidParam("epsilon, n, C and c0 must be positive")
    return max(1, math.ceil(c0 / (n * epsilon * epsilon)))


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunResult:
    """Run every seed of ``cfg``; write CSV and manifest when ``out_dir`` is given."""
    validate_config(cfg)
    dataset, model, b, graph, spec, proto, latency, mu, schedule, runtime = _setup(cfg)

    c0 = None
    if cfg.epsilon is not None:
        pilot = _run_seed(cfg.with_(gap_every=0), cfg.seeds[0], cfg.pilot_rounds, dataset, model, b,
                          proto, mu, schedule, runtime)
        c0 = calibrate_c0(max(float(pilot.gap[-1]), np.finfo(float).tiny), cfg.n, cfg.pilot_rounds)
        T = rounds_for_epsilon(cfg.epsilon, cfg.n, max(1, b // cfg.n), c0)
    elif cfg.rounds is not None:
        T = int(cfg.rounds)
    else:
        T = max(1, int(cfg.m) // (b + mu))

    runs = [_run_seed(cfg, s, T, dataset, model, b, proto, mu, schedule, runtime) for s in cfg.seeds]
    manifest = {
        "name": cfg.name,
        "mode": cfg.mode,
        "n": cfg.n,
        "b": b,
        "gamma": cfg.gamma,
        "latency": latency,
        "mu": mu,
        "mu_adjusted_by": mu - latency if cfg.mode == "online" else 0,
        "k": proto.k if proto.kind == "gossip" else 0,
        "protocol": cfg.protocol if cfg.n > 1 else "exact",
        "rounds": T,
        "topology": cfg.topology,
        "max_degree": graph.max_degree,
        "lambda2": repr(spec.lambda2),
        "lambda_min": repr(spec.lambda_min),
        "rho": repr(spec.rho),
        "gap": repr(spec.gap),
        "lazy": cfg.lazy,
        "L": repr(model.L),
        "K": repr(model.K),
        "sigma2": repr(model.sigma2),
        "D": repr(model.constraint.diameter),
        "Fstar": repr(model.Fstar),
        "wstar_sha": _digest(model.wstar),
        "dataset": " ".join(f"{k}={v}" for k, v in dataset.manifest().items()),
        "seeds": ",".join(str(s) for s in cfg.seeds),
        "c0": repr(c0) if c0 is not None else "none",
        "time_per_round": repr(runtime.time_per_round),
    }
    result = RunResult(cfg, manifest, runs)
    if out_dir is not None:
        result.write(out_dir)
    return result


def _digest(w) -> str:
    import hashlib

    return hashlib.sha256(np.ascontiguousarray(w, dtype=float).tobytes()).hexdigest()[:16]


# -- presets -----------------------------------------------------------------

PRESETS = {
    "fixed_batch": dict(
        base=ExperimentConfig(name="fixed_batch", mode="online", b=4096, rounds=100,
                              protocol="gossip_single", loss="multinomial_logistic",
                              seeds=tuple(range(10)), gap_every=0),
        ns=(4, 8, 16, 32, 64),
    ),
    "scaling": dict(
        base=ExperimentConfig(name="scaling", mode="online", C=200, rounds=500,
                              protocol="gossip_single", loss="multinomial_logistic",
                              seeds=tuple(range(10)), gap_every=0),
        ns=(4, 8, 16, 32),
    ),
    "accuracy_check": dict(
        base=ExperimentConfig(name="accuracy_check", mode="online", C=64, rounds=200,
                              protocol="gossip_auto", loss="quadratic", gamma=1,
                              seeds=(0,), gap_every=0),
        ns=(4, 16),
    ),
}


def preset_configs(name: str, **overrides) -> list[ExperimentConfig]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset; choose from {sorted(PRESETS)}", "preset")
    spec = PRESETS[name]
    base = dataclasses.replace(spec["base"], **overrides)
    ns = (base.n,) if "n" in overrides else spec["ns"]
    return [base.with_(n=n) for n in ns]


# -- plot data ---------------------------------------------------------------

def _write_series(path: Path, x, y, header: str) -> Path:
    lines = [f"# {header}"] + [f"{xi!r} {yi!r}" for xi, yi in zip(map(float, x), map(float, y))]
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def emit_plots(result: RunResult, kind: str, out_dir: str | Path,
               baseline: RunResult | None = None) -> list[Path]:
    """Write gnuplot-ready two-column series (seed means) for ``kind``.

    ``ratio_vs_rounds`` plots ``baseline`` per-sample regret over
    ``result``'s; without a baseline the result is compared with itself.
    """
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind; choose from {PLOT_KINDS}", "kind")
    if not result.runs or len(result.runs[0].samples_seen) == 0:
        raise EmptyResult("result has no rounds")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{result.config.name}-n{result.config.n}"
    rounds = np.arange(1, len(result.runs[0].samples_seen) + 1)
    if kind == "regret_vs_time":
        return [_write_series(out_dir / f"{stem}.regret_vs_time.dat", result.mean("runtime"),
                              result.mean("regret_per_sample"), "runtime_units regret_per_sample")]
    if kind == "gap_vs_rounds":
        g = result.mean("gap")
        keep = ~np.isnan(g)
        if not keep.any():
            raise EmptyResult("no gap estimates recorded; set gap_every > 0")
        return [_write_series(out_dir / f"{stem}.gap_vs_rounds.dat", rounds[keep], g[keep], "round gap")]
    base = baseline or result
    curve = regret_ratio_curve(base.mean("regret_per_sample"), result.mean("regret_per_sample"))
    bstem = f"{base.config.name}-n{base.config.n}"
    return [_write_series(out_dir / f"{bstem}_over_{stem}.ratio_vs_rounds.dat", rounds, curve.ratio,
                          f"round ratio tail_mean={curve.tail_mean!r}")]
