"""Command-line experiments: configuration, runs, sweeps and comparisons.

Configuration files are YAML or JSON mappings. Recognized keys (defaults in
brackets)::

    N / n_emitters [4]      eta [0.4]            gamma [1.0]
    gamma_dt [0.01]         gamma_t_max [16]     phi [2 pi]
    n_max [1]               chi_max [128]        cutoff [1e-10]
    initial_state [all_excited | symmetric_dicke]
    observables [all except correlations]        correlations [[]]
    sample_stride [1]       profile_times [[]]   (units of tau; final time always)
    output_dir [results]    checkpoint [null]
    sweep [null]            (mapping axis -> list; axes chi_max, gamma_dt, eta, N)
    tolerance [0.01]        (max relative N_exc deviation for sweeps)

``eta: 0`` selects the Markovian master equation.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, InputError

log = logging.getLogger("wgdelay")

OBSERVABLES = frozenset({"photons", "entropies", "negativity", "sectors", "singlets", "survival", "profile", "correlations"})
DEFAULT_OBSERVABLES = tuple(sorted(OBSERVABLES - {"correlations"}))
SWEEP_AXES = {"chi_max", "gamma_dt", "eta", "N"}
WORKERS_ENV = "WGDELAY_WORKERS"


@dataclass
class RunConfig:
    N: int = 4
    eta: float = 0.4
    gamma: float = 1.0
    gamma_dt: float = 0.01
    gamma_t_max: float = 16.0
    phi: float = 2 * math.pi
    n_max: int = 1
    chi_max: int = 128
    cutoff: float = 1e-10
    initial_state: str = "all_excited"
    observables: List[str] = field(default_factory=lambda: list(DEFAULT_OBSERVABLES))
    correlations: List[int] = field(default_factory=list)
    sample_stride: int = 1
    profile_times: List[float] = field(default_factory=list)
    output_dir: str = "results"
    checkpoint: Optional[str] = None
    sweep: Optional[Dict[str, list]] = None
    tolerance: float = 0.01

    @property
    def ell(self) -> int:
        return max(1, int(round(self.eta / self.gamma_dt)))

    @property
    def markovian(self) -> bool:
        return self.eta == 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def model_params(self):
        from .collision import ModelParams
        from .tensor_core import TruncationPolicy

        return ModelParams.from_eta(
            self.N,
            self.eta,
            gamma_dt=self.gamma_dt,
            gamma=self.gamma,
            phi=self.phi,
            n_max=self.n_max,
            t_max=self.gamma_t_max / self.gamma,
            policy=TruncationPolicy(self.chi_max, self.cutoff),
        )


_ALIASES = {"n_emitters": "N"}


def _fail(path: str, msg: str):
    raise ConfigurationError(f"{path}: {msg}")


def _number(path, value, kind=float, lo=None, hi=None, lo_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    if kind is int and int(value) != value:
        _fail(path, f"expected an integer, got {value!r}")
    value = kind(value)
    if lo is not None and (value < lo or (lo_open and value == lo)):
        _fail(path, f"must be {'>' if lo_open else '>='} {lo}, got {value}")
    if hi is not None and value > hi:
        _fail(path, f"must be <= {hi}, got {value}")
    return value


def config_from_mapping(data: dict, path: str = "") -> RunConfig:
    """Validate a raw mapping into a :class:`RunConfig` (errors carry the key path)."""
    if not isinstance(data, dict):
        _fail(path or "<root>", "configuration must be a mapping")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    for raw_key, value in data.items():
        key = _ALIASES.get(raw_key, raw_key)
        where = f"{path}{raw_key}"
        if key not in known:
            _fail(where, f"unknown key (allowed: {', '.join(sorted(known | set(_ALIASES)))})")
        if key in values:
            _fail(where, "given twice")
        values[key] = _validate(key, value, where)
    cfg = RunConfig(**values)
    if not cfg.markovian and cfg.N % 2:
        _fail(f"{path}N", "the collision model needs an even number of emitters")
    if cfg.correlations:
        if max(cfg.correlations) > cfg.n_max:
            _fail(
                f"{path}correlations",
                f"order {max(cfg.correlations)} needs n_max >= {max(cfg.correlations)} (set n_max: 3)",
            )
        if "correlations" not in cfg.observables:
            cfg.observables = sorted(set(cfg.observables) | {"correlations"})
    if "singlets" in cfg.observables and cfg.N != 4:
        cfg.observables = [o for o in cfg.observables if o != "singlets"]
    return cfg


def _validate(key: str, value, where: str):
    if key == "N":
        return _number(where, value, int, lo=1, hi=16)
    if key in ("eta",):
        return _number(where, value, float, lo=0.0)
    if key in ("gamma", "gamma_dt", "gamma_t_max"):
        return _number(where, value, float, lo=0.0, lo_open=True)
    if key == "phi":
        return _number(where, value, float)
    if key == "n_max":
        v = _number(where, value, int)
        if v not in (1, 3):
            _fail(where, f"must be 1 or 3, got {v}")
        return v
    if key == "chi_max":
        return _number(where, value, int, lo=1)
    if key == "cutoff":
        v = _number(where, value, float, lo=0.0)
        if v >= 1:
            _fail(where, f"must be below 1, got {v}")
        return v
    if key == "initial_state":
        if value not in ("all_excited", "symmetric_dicke"):
            _fail(where, f"must be all_excited or symmetric_dicke, got {value!r}")
        return value
    if key == "observables":
        if not isinstance(value, list):
            _fail(where, "expected a list")
        for i, name in enumerate(value):
            if name not in OBSERVABLES:
                _fail(f"{where}[{i}]", f"unknown observable {name!r} (allowed: {', '.join(sorted(OBSERVABLES))})")
        return list(value)
    if key == "correlations":
        if not isinstance(value, list):
            _fail(where, "expected a list")
        return [_number(f"{where}[{i}]", v, int, lo=2, hi=3) for i, v in enumerate(value)]
    if key == "sample_stride":
        return _number(where, value, int, lo=1)
    if key == "profile_times":
        if not isinstance(value, list):
            _fail(where, "expected a list")
        return [_number(f"{where}[{i}]", v, float, lo=0.0) for i, v in enumerate(value)]
    if key in ("output_dir", "checkpoint"):
        if value is None and key == "checkpoint":
            return None
        if not isinstance(value, str):
            _fail(where, "expected a path string")
        return value
    if key == "tolerance":
        return _number(where, value, float, lo=0.0, lo_open=True)
    if key == "sweep":
        if value is None:
            return None
        if not isinstance(value, dict) or not value:
            _fail(where, "expected a non-empty mapping of axis -> list")
        out = {}
        for axis, points in value.items():
            if axis not in SWEEP_AXES:
                _fail(f"{where}.{axis}", f"unknown sweep axis (allowed: {', '.join(sorted(SWEEP_AXES))})")
            if not isinstance(points, list) or not points:
                _fail(f"{where}.{axis}", "expected a non-empty list")
            target = {"chi_max": "chi_max", "gamma_dt": "gamma_dt", "eta": "eta", "N": "N"}[axis]
            out[axis] = [_validate(target, v, f"{where}.{axis}[{i}]") for i, v in enumerate(points)]
        return out
    raise AssertionError(key)


def parse_config(path) -> RunConfig:
    """Read a YAML (``.yaml``/``.yml``) or JSON configuration file."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"configuration file {path} does not exist")
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        import yaml

        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: invalid YAML ({exc})") from exc
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_mapping(data or {})


# -- runs ------------------------------------------------------------------------------------


def _code_version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


def _write_profile(path: Path, sim, orders: Sequence[int]) -> None:
    from . import observables as ob

    dens = ob.field_energy_density(sim)
    cols = {"x_over_d": dens.x, "density": dens.total, "density_R": dens.right, "density_L": dens.left}
    for m in (2, 3):
        if m in orders:
            g = ob.autocorrelation(sim, m)
            cols[f"G{m}"] = g.total
            norm = ob.normalized_autocorrelation(g, dens, m)
            cols[f"g{m}_R"] = norm.right
            cols[f"g{m}_L"] = norm.left
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(cols))
        for row in zip(*cols.values()):
            w.writerow(["" if not np.isfinite(v) else repr(float(v)) for v in row])


def _markov_records(cfg: RunConfig):
    from . import markov
    from .collision import dicke_vector

    spec = markov.build_spec(cfg.N, cfg.gamma, cfg.phi)
    dt = cfg.gamma_dt / cfg.gamma
    steps = int(round(cfg.gamma_t_max / cfg.gamma_dt))
    t_grid = np.arange(steps + 1) * dt
    if cfg.initial_state == "all_excited":
        ref = np.zeros(2**cfg.N)
        ref[-1] = 1.0
    else:
        ref = dicke_vector(cfg.N, cfg.N // 2)
    traj = markov.evolve(spec, markov.pure(ref), t_grid)
    return markov.dicke_observables(traj[:: cfg.sample_stride], t_grid[:: cfg.sample_stride], ref, cfg.gamma)


def run_experiment(cfg: RunConfig, force_markov: bool = False) -> Dict[str, str]:
    """Run one configuration and write its outputs; returns the written file paths."""
    from . import observables as ob
    from .collision import Simulation
    from .mps import save_checkpoint

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    files: Dict[str, str] = {}
    notes: List[str] = []
    meta = {"config": cfg.to_dict(), "code_version": _code_version()}

    if cfg.markovian or force_markov:
        records = _markov_records(cfg)
        meta["solver"] = "markov"
        meta["cumulative_discarded"] = 0.0
    else:
        params = cfg.model_params()
        sim = Simulation(params, cfg.initial_state)
        blocks = frozenset(cfg.observables) & {"photons", "entropies", "negativity", "sectors", "singlets", "survival"}
        observer = ob.Observer(stride=cfg.sample_stride, blocks=blocks)
        profile_steps = {min(params.n_steps, int(round(t * params.ell))) for t in cfg.profile_times}
        profile_steps.add(params.n_steps)
        want_profile = "profile" in cfg.observables or "correlations" in cfg.observables
        saturated = False
        observer(sim)
        while True:
            if want_profile and sim.n in profile_steps:
                path = out / f"profile_t{sim.n:06d}.csv"
                _write_profile(path, sim, cfg.correlations)
                files[f"profile_{sim.n}"] = str(path)
            if sim.done:
                break
            sim.advance()
            observer(sim)
            if not saturated and sim.state.max_bond >= cfg.chi_max:
                saturated = True
                msg = f"bond dimension reached chi_max = {cfg.chi_max} at t = {sim.t:.6g}"
                notes.append(msg)
                log.warning(msg)
        records = observer.finalize()
        meta["solver"] = "collision"
        meta["ell"] = params.ell
        meta["n_steps"] = params.n_steps
        meta["cumulative_discarded"] = sim.state.cumulative_discarded
        meta["max_bond"] = sim.state.max_bond
        if cfg.checkpoint:
            save_checkpoint(sim.state, cfg.checkpoint)
            files["checkpoint"] = cfg.checkpoint

    series = out / "series.csv"
    ob.write_csv(records, series, cfg.N)
    files["series"] = str(series)
    meta["warnings"] = notes
    meta["wall_time_s"] = time.perf_counter() - start
    meta["files"] = dict(files)
    meta_path = out / "metadata.json"
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True))
    files["metadata"] = str(meta_path)
    return files


# -- comparison -----------------------------------------------------------------------------


@dataclass
class Deviation:
    max_rel: float
    rms_rel: float
    n_points: int

    def passes(self, tol: float) -> bool:
        return self.max_rel <= tol


def relative_deviation(t_a, y_a, t_b, y_b, window: Optional[tuple] = None, floor: float = 1e-9) -> Deviation:
    """Pointwise ``|a - b| / |b|`` of two series on ``a``'s grid (``b`` interpolated).

    Points where ``|b| < floor`` are skipped.
    """
    t_a, y_a, t_b, y_b = (np.asarray(v, dtype=float) for v in (t_a, y_a, t_b, y_b))
    lo, hi = max(t_a[0], t_b[0]), min(t_a[-1], t_b[-1])
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
    if hi < lo:
        raise InputError("time grids do not overlap")
    sel = (t_a >= lo - 1e-12) & (t_a <= hi + 1e-12)
    if not np.any(sel):
        raise InputError("no common sample points")
    b_on_a = np.interp(t_a[sel], t_b, y_b)
    ok = np.abs(b_on_a) >= floor
    rel = np.abs(y_a[sel][ok] - b_on_a[ok]) / np.abs(b_on_a[ok])
    if rel.size == 0:
        return Deviation(0.0, 0.0, 0)
    return Deviation(float(rel.max()), float(np.sqrt(np.mean(rel**2))), int(rel.size))


def compare(path_a, path_b, column: str = "n_exc", window: Optional[tuple] = None) -> Deviation:
    from .observables import read_csv

    a, b = read_csv(path_a), read_csv(path_b)
    for name, data in (("first", a), ("second", b)):
        if column not in data or "t" not in data:
            raise InputError(f"{name} file lacks column {column!r}")
    return relative_deviation(a["t"], a[column], b["t"], b[column], window)


# -- sweeps ----------------------------------------------------------------------------------


def sweep_points(cfg: RunConfig) -> List[RunConfig]:
    if not cfg.sweep:
        raise ConfigurationError("sweep: no sweep axes configured")
    axes = list(cfg.sweep)
    points = []
    for combo in np.array(np.meshgrid(*[range(len(cfg.sweep[a])) for a in axes], indexing="ij")).reshape(len(axes), -1).T:
        changes = {a: cfg.sweep[a][i] for a, i in zip(axes, combo)}
        point = dataclasses.replace(cfg, sweep=None, **changes)
        point.output_dir = str(Path(cfg.output_dir) / f"point_{point.digest()}")
        points.append(point)
    return points


def _run_point(cfg: RunConfig) -> str:
    return run_experiment(cfg)["series"]


def sweep(cfg: RunConfig, workers: Optional[int] = None) -> dict:
    """Run every sweep point (in a process pool) and summarize pairwise ``N_exc`` deviations."""
    points = sweep_points(cfg)
    workers = workers or int(os.environ.get(WORKERS_ENV, "1"))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            series = list(pool.map(_run_point, points))
    else:
        series = [_run_point(p) for p in points]
    window = (0.0, cfg.gamma_t_max / cfg.gamma)
    worst = 0.0
    pairs = []
    for i in range(len(series)):
        for j in range(i + 1, len(series)):
            d = compare(series[i], series[j], window=window)
            pairs.append({"a": series[i], "b": series[j], "max_rel": d.max_rel, "rms_rel": d.rms_rel})
            worst = max(worst, d.max_rel)
    summary = {
        "points": [{"changes": {a: getattr(p, a) for a in cfg.sweep}, "series": s} for p, s in zip(points, series)],
        "pairs": pairs,
        "max_pairwise_deviation": worst,
        "tolerance": cfg.tolerance,
        "passed": worst <= cfg.tolerance,
    }
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    (Path(cfg.output_dir) / "sweep_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


# -- entry point -----------------------------------------------------------------------------


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="wgdelay", description="Delayed collective decay in a waveguide.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "run one configuration (eta = 0 uses the master equation)"),
        ("markov", "run the Markovian master equation for a configuration"),
        ("sweep", "run all points of the configured sweep"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config")
        p.add_argument("--output-dir", help="override output_dir")
    p = sub.add_parser("compare", help="relative N_exc deviation between two series CSVs")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tol", type=float, default=0.03)
    p.add_argument("--column", default="n_exc")
    p.add_argument("--t-max", type=float, default=None)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    try:
        if args.command == "compare":
            window = (0.0, args.t_max) if args.t_max is not None else None
            d = compare(args.a, args.b, args.column, window)
            print(f"max_rel={d.max_rel:.6g} rms_rel={d.rms_rel:.6g} points={d.n_points} tol={args.tol}")
            return 0 if d.passes(args.tol) else 1
        cfg = parse_config(args.config)
        if args.output_dir:
            cfg.output_dir = args.output_dir
        if args.command == "sweep":
            summary = sweep(cfg)
            print(f"max_pairwise_deviation={summary['max_pairwise_deviation']:.6g} passed={summary['passed']}")
            return 0 if summary["passed"] else 1
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            files = run_experiment(cfg, force_markov=args.command == "markov")
        for key, path in files.items():
            print(f"{key}: {path}")
        return 0
    except (ConfigurationError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
