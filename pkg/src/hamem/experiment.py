"""Sweep configuration, seeded pair sampling, orchestration and persistence.

Config documents are YAML mappings. Top-level keys::

    model:      {variant: ring | xx-chain, n, nu_z, nu_x, J, g}
    noise:      {kind: paper-default | amplitude-damping, beta}
    dt, L
    pairs:      {count, seed} or {explicit: [[a, b], ...]}
    gamma_list: ascending, >= 0 (kappa = gamma * |E_ba| per pair)
    strategies: subset of none, reshape, rescale1, rescale2, richardson
    reshape:    {variant: tensor-power-4 | tensor-power-2 | full-pauli-sample, count}
    rescale:    {c1, c2}
    estimator:  pencil | pencil+refine | dft
    backend, cutoffs: {none, reshape, rescale, richardson}, min_gap,
    seed, workers, output_dir, dump_series

``min_gap: null`` resolves to ``1e-6 * ||H||`` when the sweep runs.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .lindblad import BACKENDS, PairObservable, SpectroscopyConfig, evolve_series
from .mitigation import (
    RESCALE_CUTOFF,
    RESHAPE_CUTOFF,
    ReshapeSet,
    RescaleConfig,
    reshape_experiment,
    rescaled_series,
    rescaling_from_series,
    richardson_from_series,
    richardson_series,
    run_reshaping,
)
from .operators import HamiltonianSpec, PauliString, Spectrum, build_hamiltonian, build_noise, diagonalize, spectral_norm
from .signals import TimeSeries
from .spectral import EstimatorConfig, estimate_energy

STRATEGIES = ("none", "reshape", "rescale1", "rescale2", "richardson")
_STRATEGY_CODE = {s: i for i, s in enumerate(STRATEGIES)}
DEFAULT_CUTOFFS = {"none": RESHAPE_CUTOFF, "reshape": RESHAPE_CUTOFF, "rescale": RESCALE_CUTOFF, "richardson": RESCALE_CUTOFF}
MIN_GAP_REL = 1e-6

CSV_HEADER = (
    "run_id", "model", "n", "a", "b", "E_exact", "gamma", "kappa", "strategy", "variant",
    "estimate", "abs_error", "rel_error", "decay", "n_modes", "seed",
)  # fmt: skip
SERIES_HEADER = ("k", "t", "re", "im")


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


class InsufficientPairsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class ExperimentConfig:
    model: HamiltonianSpec
    dt: float
    L: int
    gamma_list: tuple
    noise_kind: str = "paper-default"
    beta: float = 0.01
    pair_count: int | None = 10
    pair_seed: int = 0
    explicit_pairs: tuple = ()
    strategies: tuple = ("none",)
    reshape: ReshapeSet = ReshapeSet("tensor-power-4")
    rescale: RescaleConfig = RescaleConfig(2.0, 1.5)
    estimator: str = "pencil"
    backend: str = "spectral"
    cutoffs: dict = field(default_factory=lambda: dict(DEFAULT_CUTOFFS))
    min_gap: float | None = None
    seed: int = 0
    workers: int = 1
    output_dir: str = "out"
    dump_series: bool = False

    def __post_init__(self):
        if not self.gamma_list:
            raise ConfigError("config.gamma_list: must be nonempty")
        g = [float(x) for x in self.gamma_list]
        if any(not math.isfinite(x) or x < 0 for x in g):
            raise ConfigError("config.gamma_list: entries must be finite and >= 0")
        if any(b <= a for a, b in zip(g, g[1:])):
            raise ConfigError(f"config.gamma_list: must be strictly ascending, got {g}")
        object.__setattr__(self, "gamma_list", tuple(g))
        if not self.strategies:
            raise ConfigError("config.strategies: must be nonempty")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"config.strategies: unknown strategy {s!r}; expected a subset of {STRATEGIES}")
        object.__setattr__(self, "strategies", tuple(s for s in STRATEGIES if s in self.strategies))
        if "rescale2" in self.strategies and self.rescale.c2 is None:
            raise ConfigError("config.rescale.c2: required by rescale2")
        if self.backend not in BACKENDS:
            raise ConfigError(f"config.backend: expected one of {BACKENDS}, got {self.backend!r}")
        if self.estimator not in ("pencil", "pencil+refine", "dft"):
            raise ConfigError(f"config.estimator: unknown method {self.estimator!r}")
        if self.noise_kind not in ("paper-default", "amplitude-damping"):
            raise ConfigError(f"config.noise.kind: unknown kind {self.noise_kind!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"config.dt: must be positive, got {self.dt}")
        if int(self.L) != self.L or self.L < 4:
            raise ConfigError(f"config.L: must be an integer >= 4, got {self.L}")
        if self.explicit_pairs:
            dim = 2**self.model.n
            pairs = tuple((int(a), int(b)) for a, b in self.explicit_pairs)
            for i, (a, b) in enumerate(pairs):
                if not 0 <= a < b < dim:
                    raise ConfigError(f"config.pairs.explicit[{i}]: need 0 <= a < b < {dim}, got ({a}, {b})")
            object.__setattr__(self, "explicit_pairs", pairs)
        elif self.pair_count is None or self.pair_count < 1:
            raise ConfigError("config.pairs.count: must be >= 1")
        cut = dict(DEFAULT_CUTOFFS)
        for k, v in self.cutoffs.items():
            if k not in cut:
                raise ConfigError(f"config.cutoffs.{k}: unknown key; expected {sorted(cut)}")
            if not 0 < float(v) < 1:
                raise ConfigError(f"config.cutoffs.{k}: must lie in (0, 1), got {v}")
            cut[k] = float(v)
        object.__setattr__(self, "cutoffs", cut)
        if self.min_gap is not None and not self.min_gap > 0:
            raise ConfigError(f"config.min_gap: must be positive or null, got {self.min_gap}")
        if self.workers < 1:
            raise ConfigError(f"config.workers: must be >= 1, got {self.workers}")

    def to_dict(self) -> dict:
        m = self.model
        pairs = (
            {"explicit": [list(p) for p in self.explicit_pairs]}
            if self.explicit_pairs
            else {"count": self.pair_count, "seed": self.pair_seed}
        )
        return {
            "model": {"variant": m.variant, "n": m.n, "nu_z": m.nu_z, "nu_x": m.nu_x, "J": m.J, "g": m.g},
            "noise": {"kind": self.noise_kind, "beta": self.beta},
            "dt": self.dt,
            "L": self.L,
            "pairs": pairs,
            "gamma_list": list(self.gamma_list),
            "strategies": list(self.strategies),
            "reshape": {"variant": self.reshape.variant, "count": self.reshape.count},
            "rescale": {"c1": self.rescale.c1, "c2": self.rescale.c2},
            "estimator": self.estimator,
            "backend": self.backend,
            "cutoffs": dict(self.cutoffs),
            "min_gap": self.min_gap,
            "seed": self.seed,
            "workers": self.workers,
            "output_dir": self.output_dir,
            "dump_series": self.dump_series,
        }

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def spectroscopy(self) -> SpectroscopyConfig:
        return SpectroscopyConfig(self.dt, self.L)

    def estimator_config(self, strategy: str) -> EstimatorConfig:
        key = "rescale" if strategy in ("rescale1", "rescale2") else strategy
        return EstimatorConfig(method=self.estimator, cutoff=self.cutoffs[key])


_SCHEMA = {
    "model": {"variant": str, "n": int, "nu_z": float, "nu_x": float, "J": float, "g": float},
    "noise": {"kind": str, "beta": float},
    "dt": float,
    "L": int,
    "pairs": {"count": int, "seed": int, "explicit": list},
    "gamma_list": list,
    "strategies": list,
    "reshape": {"variant": str, "count": int},
    "rescale": {"c1": float, "c2": float},
    "estimator": str,
    "backend": str,
    "cutoffs": {k: float for k in DEFAULT_CUTOFFS},
    "min_gap": float,
    "seed": int,
    "workers": int,
    "output_dir": str,
    "dump_series": bool,
}
_REQUIRED = ("model", "dt", "L", "gamma_list")


def _check(doc, schema, path):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(doc).__name__}")
    out = {}
    for key, value in doc.items():
        where = f"{path}.{key}"
        if key not in schema:
            raise ConfigError(f"{where}: unknown key")
        kind = schema[key]
        if isinstance(kind, dict):
            out[key] = _check(value, kind, where)
        elif value is None:
            out[key] = None
        elif kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where}: expected a number, got {value!r}")
            out[key] = float(value)
        elif kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{where}: expected an integer, got {value!r}")
            out[key] = value
        elif not isinstance(value, kind):
            raise ConfigError(f"{where}: expected {kind.__name__}, got {value!r}")
        else:
            out[key] = value
    return out


def config_from_dict(doc: dict) -> ExperimentConfig:
    doc = _check(doc, _SCHEMA, "config")
    for key in _REQUIRED:
        if key not in doc or doc[key] is None:
            raise ConfigError(f"config.{key}: missing required key")
    model = doc["model"]
    if "n" not in model:
        raise ConfigError("config.model.n: missing required key")
    noise = doc.get("noise", {})
    pairs = doc.get("pairs", {})
    if "explicit" in pairs and ("count" in pairs or "seed" in pairs):
        raise ConfigError("config.pairs: give either explicit pairs or count/seed, not both")
    reshape = doc.get("reshape", {})
    rescale = doc.get("rescale", {})
    gammas = doc["gamma_list"]
    if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in gammas):
        raise ConfigError(f"config.gamma_list: expected numbers, got {gammas!r}")
    try:
        spec = HamiltonianSpec(
            variant=model.get("variant", "ring"),
            n=model["n"],
            nu_z=model.get("nu_z") or 0.0,
            nu_x=model.get("nu_x") or 0.0,
            J=model.get("J") or 0.0,
            g=model.get("g") or 0.0,
        )
        rset = ReshapeSet(reshape.get("variant", "tensor-power-4"), count=reshape.get("count", 100))
        rc = RescaleConfig(rescale.get("c1", 2.0), rescale.get("c2", 1.5))
    except ValueError as exc:
        raise ConfigError(f"config: {exc}") from exc
    if rset.variant == "explicit":
        raise ConfigError("config.reshape.variant: explicit sets are not supported in configs")
    explicit = pairs.get("explicit") or ()
    for i, p in enumerate(explicit):
        if not (isinstance(p, list) and len(p) == 2 and all(isinstance(x, int) for x in p)):
            raise ConfigError(f"config.pairs.explicit[{i}]: expected [a, b] integers, got {p!r}")
    return ExperimentConfig(
        model=spec,
        dt=doc["dt"],
        L=doc["L"],
        gamma_list=tuple(gammas),
        noise_kind=noise.get("kind", "paper-default"),
        beta=noise.get("beta", 0.01),
        pair_count=None if explicit else pairs.get("count", 10),
        pair_seed=pairs.get("seed", 0) if not explicit else 0,
        explicit_pairs=tuple(tuple(p) for p in explicit),
        strategies=tuple(doc.get("strategies", ["none"])),
        reshape=rset,
        rescale=rc,
        estimator=doc.get("estimator", "pencil"),
        backend=doc.get("backend", "spectral"),
        cutoffs=doc.get("cutoffs", {}),
        min_gap=doc.get("min_gap"),
        seed=doc.get("seed", 0),
        workers=doc.get("workers", 1),
        output_dir=doc.get("output_dir", "out"),
        dump_series=doc.get("dump_series", False),
    )


def loads_config(text: str) -> ExperimentConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: not valid YAML ({exc})") from exc
    return config_from_dict(doc if doc is not None else {})


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    return loads_config(text)


# ---------------------------------------------------------------------------
# Pairs and seeds


def default_min_gap(h: np.ndarray) -> float:
    return MIN_GAP_REL * spectral_norm(h)


def pair_is_eligible(energies, a: int, b: int, min_gap: float) -> bool:
    """Reject tiny gaps and pairs whose gap is shared by another pair (within ``min_gap``)."""
    e = np.asarray(energies, dtype=float)
    e_ba = e[b] - e[a]
    if abs(e_ba) < min_gap:
        return False
    gaps = e[None, :] - e[:, None]  # gaps[p, m] = E_m - E_p
    close = np.abs(e_ba - gaps) < min_gap
    close[a, b] = False
    return not close.any()


def eligible_pairs(energies, min_gap: float) -> list[tuple[int, int]]:
    d = len(energies)
    return [(a, b) for a in range(d) for b in range(a + 1, d) if pair_is_eligible(energies, a, b, min_gap)]


def sample_pairs(spectrum: Spectrum, count: int, seed: int, min_gap: float) -> list[tuple[int, int]]:
    """Draw ``count`` distinct eligible pairs ``a < b`` uniformly; returned sorted."""
    if count < 1:
        raise ValueError(f"pair count must be >= 1, got {count}")
    pool = eligible_pairs(spectrum.energies, min_gap)
    if count > len(pool):
        raise InsufficientPairsError(
            f"requested {count} pairs but only {len(pool)} are eligible at min_gap={min_gap:.3g} "
            f"(short by {count - len(pool)})"
        )
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(pool), size=count, replace=False)
    return sorted(pool[i] for i in idx)


def child_seed(master: int, *key: int) -> int:
    """Counter-based split: ``SeedSequence(master, spawn_key=key)`` reduced to 63 bits."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def sampled_paulis(n: int, count: int, master: int, pair_idx: int, gamma_idx: int) -> list[PauliString]:
    """One seeded draw per U index, so each string is independent of execution order."""
    code = _STRATEGY_CODE["reshape"]
    out = []
    for u in range(count):
        rng = np.random.default_rng(child_seed(master, pair_idx, gamma_idx, code, u))
        out.append(PauliString("".join("IXYZ"[i] for i in rng.integers(0, 4, size=n))))
    return out


# ---------------------------------------------------------------------------
# Sweep


@dataclass(frozen=True)
class RunRecord:
    run_id: int
    model: str
    n: int
    a: int
    b: int
    E_exact: float
    gamma: float
    kappa: float
    strategy: str
    variant: str
    estimate: float
    abs_error: float
    rel_error: float
    decay: float
    n_modes: int
    seed: int

    def row(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in CSV_HEADER]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


@dataclass
class SweepResult:
    records: list
    summary: dict
    series: dict = field(default_factory=dict)  # run_id -> TimeSeries
    failures: list = field(default_factory=list)


def fit_loglog_slope(gammas, mean_errors) -> float:
    g = np.asarray(gammas, dtype=float)
    e = np.asarray(mean_errors, dtype=float)
    if g.size != e.size:
        raise ValueError("gammas and errors differ in length")
    if g.size < 3:
        raise ValueError(f"slope fit needs at least 3 points, got {g.size}")
    if np.any(g <= 0) or np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise ValueError("slope fit needs positive finite gammas and errors")
    slope, _ = np.polyfit(np.log(g), np.log(e), 1)
    return float(slope)


def _variant(cfg: ExperimentConfig, strategy: str) -> str:
    if strategy == "reshape":
        r = cfg.reshape
        return f"{r.variant}:{r.count}" if r.variant == "full-pauli-sample" else r.variant
    if strategy == "rescale1":
        return f"c1={cfg.rescale.c1:g}"
    if strategy in ("rescale2", "richardson"):
        return ";".join(f"c{i + 1}={c:g}" for i, c in enumerate(cfg.rescale.factors))
    return ""


@dataclass(frozen=True)
class _Task:
    cfg: ExperimentConfig
    pair_idx: int
    gamma_idx: int
    pair: tuple


def _run_task(task: _Task):
    """All strategies for one (pair, gamma); returns partial rows, series and failures."""
    cfg = task.cfg
    h = build_hamiltonian(cfg.model)
    spectrum = diagonalize(h)
    a, b = task.pair
    e_ba = spectrum.gap(a, b)
    gamma = cfg.gamma_list[task.gamma_idx]
    kappa = gamma * abs(e_ba)
    noise = build_noise(cfg.noise_kind, kappa, cfg.beta, cfg.model.n)
    obs = PairObservable.from_spectrum(spectrum, a, b)
    sc = cfg.spectroscopy()
    rows, series, failures = [], {}, []
    shared = {}

    def rescale_data():
        if "series" not in shared:
            factors = cfg.rescale.factors
            shared["series"] = rescaled_series(h, noise, obs, sc, factors, cfg.backend)
        return shared["series"]

    for strategy in cfg.strategies:
        seed = child_seed(cfg.seed, task.pair_idx, task.gamma_idx, _STRATEGY_CODE[strategy])
        try:
            est_cfg = cfg.estimator_config(strategy)
            dump = None
            if strategy == "none":
                if "rescale1" in cfg.strategies or "rescale2" in cfg.strategies or "richardson" in cfg.strategies:
                    y = rescale_data()[0]
                else:
                    y = evolve_series(h, noise, obs.initial_state(), obs, sc, cfg.backend)
                est = estimate_energy(y, est_cfg)
                value, decays, n_modes, dump = est.value, [est.mode.r], [est.n_modes], y
            elif strategy == "reshape":
                rset = cfg.reshape
                if rset.variant == "full-pauli-sample":
                    paulis = sampled_paulis(cfg.model.n, rset.count, cfg.seed, task.pair_idx, task.gamma_idx)
                    rset = ReshapeSet("explicit", paulis=tuple(paulis))
                res = run_reshaping(h, noise, (a, b), sc, rset, spectrum=spectrum, backend=cfg.backend, estimator=est_cfg)
                value, decays, n_modes = res.value, res.decays, res.diagnostics["n_modes"]
                if cfg.dump_series:
                    p = rset.realize(cfg.model.n)[0]
                    h_u, psi_u, obs_u = reshape_experiment(h, obs.initial_state(), obs, p)
                    dump = evolve_series(h_u, noise, psi_u, obs_u, sc, cfg.backend)
            elif strategy in ("rescale1", "rescale2"):
                order = "first" if strategy == "rescale1" else "second"
                res = rescaling_from_series(rescale_data(), cfg.rescale, order, est_cfg)
                value, decays, n_modes = res.value, res.decays, res.diagnostics["n_modes"]
                dump = rescale_data()[0]
            else:
                data = rescale_data()
                res = richardson_from_series(data, cfg.rescale, est_cfg)
                value, decays, n_modes = res.value, res.decays, res.diagnostics["n_modes"]
                if cfg.dump_series:
                    dump = richardson_series(data[: len(cfg.rescale.factors) + 1], cfg.rescale.factors)
        except Exception as exc:  # recorded, the sweep continues
            failures.append(
                {"pair": [a, b], "gamma": gamma, "strategy": strategy, "error": f"{type(exc).__name__}: {exc}"}
            )
            continue
        abs_err = abs(value - e_ba)
        key = (task.pair_idx, task.gamma_idx, _STRATEGY_CODE[strategy])
        rows.append(
            (
                key,
                dict(
                    model=cfg.model.variant,
                    n=cfg.model.n,
                    a=a,
                    b=b,
                    E_exact=float(e_ba),
                    gamma=float(gamma),
                    kappa=float(kappa),
                    strategy=strategy,
                    variant=_variant(cfg, strategy),
                    estimate=float(value),
                    abs_error=float(abs_err),
                    rel_error=float(abs_err / abs(e_ba)),
                    decay=float(np.mean(decays)),
                    n_modes=int(max(n_modes)),
                    seed=seed,
                ),
            )
        )
        if cfg.dump_series and dump is not None:
            series[key] = dump
    return rows, series, failures


def resolve_pairs(cfg: ExperimentConfig, spectrum: Spectrum, min_gap: float) -> list[tuple[int, int]]:
    if cfg.explicit_pairs:
        for a, b in cfg.explicit_pairs:
            if not pair_is_eligible(spectrum.energies, a, b, min_gap):
                raise InsufficientPairsError(f"explicit pair ({a}, {b}) fails the min_gap={min_gap:.3g} filter")
        return list(cfg.explicit_pairs)
    return sample_pairs(spectrum, cfg.pair_count, cfg.pair_seed, min_gap)


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> SweepResult:
    """Run every pair x gamma x strategy; results are merged by sorted key."""
    h = build_hamiltonian(cfg.model)
    spectrum = diagonalize(h)
    min_gap = cfg.min_gap if cfg.min_gap is not None else default_min_gap(h)
    aliased = cfg.spectroscopy().check_alias(spectrum.energies)
    pairs = resolve_pairs(cfg, spectrum, min_gap)
    tasks = [_Task(cfg, i, j, p) for i, p in enumerate(pairs) for j in range(len(cfg.gamma_list))]
    workers = cfg.workers if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            outputs = list(pool.map(_run_task, tasks))
    else:
        outputs = [_run_task(t) for t in tasks]

    keyed, dumps, failures = [], {}, []
    for rows, series, fails in outputs:
        keyed.extend(rows)
        dumps.update(series)
        failures.extend(fails)
    keyed.sort(key=lambda kv: kv[0])
    records, series_by_id = [], {}
    for run_id, (key, row) in enumerate(keyed):
        records.append(RunRecord(run_id=run_id, **row))
        if key in dumps:
            series_by_id[run_id] = dumps[key]

    summary = summarize(records, cfg)
    summary.update(
        {
            "pairs": [list(p) for p in pairs],
            "pair_filter": {
                "min_gap": min_gap,
                "rule": "reject |E_ba| < min_gap or any other pair with |E_ba - E_mp| < min_gap",
            },
            "alias_warning": bool(aliased),
            "seed_scheme": "SeedSequence(seed, spawn_key=(pair_index, gamma_index, strategy_code[, U_index]))",
            "failures": failures,
            "config": cfg.to_dict(),
        }
    )
    return SweepResult(records, summary, series_by_id, failures)


def summarize(records, cfg: ExperimentConfig | None = None) -> dict:
    """Per-strategy arithmetic mean of rel_error at each gamma, plus the log-log slope."""
    order = [s for s in STRATEGIES if any(r.strategy == s for r in records)]
    per = {}
    for s in order:
        rs = [r for r in records if r.strategy == s]
        gammas = sorted({r.gamma for r in rs})
        means = [float(np.mean([r.rel_error for r in rs if r.gamma == g])) for g in gammas]
        pos = [(g, m) for g, m in zip(gammas, means) if g > 0]
        try:
            slope = fit_loglog_slope([g for g, _ in pos], [m for _, m in pos])
        except ValueError:
            slope = None
        per[s] = {"variant": rs[0].variant, "gamma": gammas, "mean_rel_error": means, "slope": slope}
    return {"aggregate": "arithmetic mean of rel_error over pairs", "strategies": per}


# ---------------------------------------------------------------------------
# Persistence


def write_series(series: TimeSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for k, (t, y) in enumerate(zip(series.times, series.samples)):
            w.writerow([k, _fmt(float(t)), _fmt(float(y.real)), _fmt(float(y.imag))])


def write_outputs(records, summary: dict, directory, series: dict | None = None) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "runs.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())
    written.append(path)
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=False) + "\n")
    written.append(path)
    for run_id, s in sorted((series or {}).items()):
        path = out / f"series_{run_id}.csv"
        write_series(s, path)
        written.append(path)
    return written


def read_records(path) -> list[RunRecord]:
    types = {f.name: f.type for f in fields(RunRecord)}
    conv = {"int": int, "float": float, "str": str}
    with open(path, newline="") as fh:
        return [RunRecord(**{k: conv[types[k]](v) for k, v in row.items()}) for row in csv.DictReader(fh)]


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    """Copy with non-None keyword overrides applied (CLI flags)."""
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


def cpu_count() -> int:
    return os.cpu_count() or 1
