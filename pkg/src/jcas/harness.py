"""Experiment harness: seeded sweeps over SNR, user count, momentum or
packet budget, with deterministic CSV and point-cloud outputs.

Config files are INI-style (configparser) with [experiment], [scenario] and
[joint] sections; see ExperimentConfig.from_file. Child seeds are a pure
function of (master seed, sweep value, trial): the sweep value is keyed as
round(value * 1000) so float axes (dB, momentum) stay stable.

Outputs per run: trace.csv (one row per packet of every trial), summary.csv
(median / inter-quartile range over trials per sweep value) and
scene_<axis>_<value>.txt (the final image of trial 0, scene file format).
Wall-time columns are omitted unless record_timing is set, keeping repeated
runs byte-identical.
"""

import configparser
import csv
import io
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .channel import (
    Geometry,
    LinkSet,
    OreGrid,
    calibrate_links,
    los_links,
    load_geometry,
    random_binary_pattern,
)
from .gamp import PriorParams
from .joint import JointConfig, JointRunner
from .scene import RoomSpec, ScattererField, load_scene, random_scene, save_scene
from .scma import Codebook, build_codebook, load_codebook

__all__ = [
    "ExperimentConfig",
    "SweepError",
    "child_seed",
    "default_geometry",
    "build_system",
    "run_experiment",
    "compare_traces",
]

TRACE_SCHEMA = "jcas-trace-v1"
SUMMARY_SCHEMA = "jcas-summary-v1"

_SWEEP_AXES = ("ebn0_db", "n_users", "mu", "packets")


class SweepError(RuntimeError):
    """A sweep point failed; carries the offending (value, trial)."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a scenario, a joint-loop config and an axis with values."""

    sweep: str = "packets"
    values: tuple = (30,)
    trials: int = 20
    seed: int = 1
    output: str = "out"
    record_timing: bool = False
    # scenario; file paths override the generated defaults
    scene: str | None = None
    geometry: str | None = None
    codebook: str | None = None
    n_users: int = 6
    n_ores: int = 4
    d_v: int = 2
    m: int = 4
    n_antennas: int = 16
    sparsity: float = 0.015
    room: tuple = (4.0, 4.0, 4.0)
    voxel: tuple = (0.5, 0.5, 0.5)
    joint: JointConfig = field(default_factory=JointConfig)

    def __post_init__(self):
        if self.sweep not in _SWEEP_AXES:
            raise ValueError(f"sweep axis must be one of {_SWEEP_AXES}")
        if not self.values:
            raise ValueError("need at least one sweep value")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.sparsity < 1:
            raise ValueError("sparsity must lie in (0, 1)")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        with open(path) as f:
            cp.read_file(f)
        kw = {}
        exp = cp["experiment"] if cp.has_section("experiment") else {}
        for key in ("sweep", "output"):
            if key in exp:
                kw[key] = exp[key]
        if "values" in exp:
            vals = [float(v) for v in exp["values"].split()]
            kw["values"] = tuple(
                int(v) if float(v).is_integer() else v for v in vals
            )
        for key in ("trials", "seed"):
            if key in exp:
                kw[key] = int(exp[key])
        if "record_timing" in exp:
            kw["record_timing"] = exp.getboolean("record_timing")

        scen = cp["scenario"] if cp.has_section("scenario") else {}
        for key in ("scene", "geometry", "codebook"):
            if key in scen:
                kw[key] = scen[key]
        for key in ("n_users", "n_ores", "d_v", "m", "n_antennas"):
            if key in scen:
                kw[key] = int(scen[key])
        if "sparsity" in scen:
            kw["sparsity"] = float(scen["sparsity"])
        for key in ("room", "voxel"):
            if key in scen:
                kw[key] = tuple(float(v) for v in scen[key].split())

        jkw = {}
        jnt = cp["joint"] if cp.has_section("joint") else {}
        jfields = {f.name: f.type for f in fields(JointConfig)}
        for key in jnt:
            if key not in jfields:
                raise ValueError(f"{path}: unknown [joint] key {key!r}")
            raw = jnt[key]
            if key in ("mu", "ebn0_db", "eps_k"):
                jkw[key] = float(raw)
            elif key in ("decoder", "ore_mode"):
                jkw[key] = raw
            else:
                jkw[key] = int(raw)
        kw["joint"] = JointConfig(**jkw)
        return cls(**kw)


def child_seed(master: int, value, trial: int) -> int:
    """Deterministic per-(sweep value, trial) seed; stable across releases."""
    key = np.random.SeedSequence(
        (int(master), int(round(float(value) * 1000)), int(trial))
    )
    return int(key.generate_state(1, np.uint64)[0])


def default_geometry(n_users, n_antennas, room, seed, n_irs_side=20) -> Geometry:
    """AP line array near one wall, IRS panel on the opposite wall, users
    scattered uniformly over the central floor area at 1 m height."""
    lx, ly, lz = room
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 17)))
    users = np.column_stack(
        [
            rng.uniform(0.15 * lx, 0.7 * lx, n_users),
            rng.uniform(0.15 * ly, 0.85 * ly, n_users),
            np.full(n_users, min(1.0, lz / 2)),
        ]
    )
    ap = np.column_stack(
        [
            np.full(n_antennas, 0.0125 * lx),
            np.linspace(0.2 * ly, 0.8 * ly, n_antennas),
            np.full(n_antennas, 0.75 * lz),
        ]
    )
    ii, jj = np.meshgrid(np.arange(n_irs_side), np.arange(n_irs_side), indexing="ij")
    span = 0.5 * min(ly, lz)
    y0, z0 = (ly - span) / 2, (lz - span) / 2
    step = span / max(n_irs_side - 1, 1)
    irs = np.column_stack(
        [
            np.full(n_irs_side**2, 0.9875 * lx),
            y0 + ii.ravel() * step,
            z0 + jj.ravel() * step,
        ]
    )
    return Geometry(users, ap, irs)


def build_system(cfg: ExperimentConfig, value, trial: int):
    """Materialize (truth scene, links, codebook, prior, joint config) for
    one sweep point and trial. File-based scenario parts are fixed across
    the sweep; generated parts (user drop, scene draw) are per-trial."""
    seed = child_seed(cfg.seed, value, trial)
    jc = cfg.joint
    n_users, mu = cfg.n_users, jc.mu
    if cfg.sweep == "ebn0_db":
        jc = replace(jc, ebn0_db=float(value))
    elif cfg.sweep == "n_users":
        n_users = int(value)
    elif cfg.sweep == "mu":
        mu = float(value)
    elif cfg.sweep == "packets":
        jc = replace(jc, n_packets=int(value))
    jc = replace(jc, mu=mu, seed=seed)

    spec = RoomSpec(cfg.room, cfg.voxel)
    if cfg.scene:
        truth = load_scene(cfg.scene)
        spec = truth.spec
    else:
        truth = random_scene(spec, cfg.sparsity, seed)

    if cfg.codebook and cfg.sweep != "n_users":
        cb = load_codebook(cfg.codebook)
        n_users = cb.n_users
    else:
        cb = build_codebook(n_users, cfg.n_ores, m=cfg.m, d_v=cfg.d_v)

    if cfg.geometry:
        geom = load_geometry(cfg.geometry)
        if geom.users.shape[0] != n_users:
            raise SweepError(
                f"geometry file has {geom.users.shape[0]} users, sweep point needs {n_users}"
            )
    else:
        geom = default_geometry(n_users, cfg.n_antennas, cfg.room, seed)

    grid = OreGrid.uniform_band(cfg.n_ores)
    links = calibrate_links(
        los_links(geom, spec, grid),
        random_binary_pattern(geom.irs.shape[0], 0, seed),
        expected_scatterers=max(int(np.ceil(cfg.sparsity * spec.n_voxels)), 1),
    )
    prior = PriorParams(
        lam=max(cfg.sparsity, 1.0 / spec.n_voxels), theta=0.5, sigma_x=0.1
    )
    return truth, links, cb, prior, jc


def _trace_columns(record_timing):
    cols = [
        "axis", "value", "trial", "packet", "mse", "ser",
        "ser_post_feedback", "gate", "ks_used", "diverged",
    ]
    if record_timing:
        cols.append("wall_ms")
    return cols


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "%.12g" % v
    return str(v)


def run_experiment(cfg: ExperimentConfig, output_dir=None, log=None):
    """Run the sweep and write trace.csv / summary.csv / scene snapshots.

    A failing sweep point is reported (via log, default print) and skipped;
    the remaining points still run. Returns the list of output paths.
    """
    log = log or print
    out = output_dir or os.environ.get("JCAS_OUTPUT_DIR") or cfg.output
    os.makedirs(out, exist_ok=True)
    tcols = _trace_columns(cfg.record_timing)
    trace_rows, summary_rows, paths = [], [], []
    failures = []

    for value in cfg.values:
        finals_mse, finals_ser, finals_post = [], [], []
        first_x, first_spec = None, None
        for trial in range(cfg.trials):
            try:
                truth, links, cb, prior, jc = build_system(cfg, value, trial)
                run = JointRunner(truth, links, cb, prior, jc).run()
            except Exception as exc:  # report and keep sweeping
                failures.append((value, trial, exc))
                log(f"sweep point {cfg.sweep}={value} trial {trial} failed: {exc}")
                continue
            for p in run.packets:
                row = {
                    "axis": cfg.sweep, "value": value, "trial": trial,
                    "packet": p.packet, "mse": p.mse, "ser": p.ser,
                    "ser_post_feedback": p.ser_post_feedback,
                    "gate": p.gate, "ks_used": p.ks_used, "diverged": p.diverged,
                }
                if cfg.record_timing:
                    row["wall_ms"] = p.wall_ms
                trace_rows.append(row)
            finals_mse.append(run.packets[-1].mse)
            finals_ser.append(float(np.mean(run.column("ser"))))
            post = [
                p.ser_post_feedback
                for p in run.packets
                if p.ser_post_feedback is not None
            ]
            if post:
                finals_post.append(float(np.mean(post)))
            if first_x is None:
                first_x, first_spec = run.x_final, truth.spec
        if not finals_mse:
            continue

        def med_iqr(a):
            q1, q2, q3 = np.percentile(a, [25, 50, 75])
            return float(q2), float(q3 - q1)

        mse_med, mse_iqr = med_iqr(finals_mse)
        ser_med, ser_iqr = med_iqr(finals_ser)
        post_med = med_iqr(finals_post)[0] if finals_post else None
        summary_rows.append(
            {
                "axis": cfg.sweep, "value": value, "trials": len(finals_mse),
                "mse_median": mse_med, "mse_iqr": mse_iqr,
                "ser_median": ser_med, "ser_iqr": ser_iqr,
                "ser_post_median": post_med,
            }
        )
        spath = os.path.join(out, f"scene_{cfg.sweep}_{value}.txt")
        save_scene(spath, ScattererField(first_spec, np.clip(first_x, 0.0, 1.0)))
        paths.append(spath)

    scols = [
        "axis", "value", "trials", "mse_median", "mse_iqr",
        "ser_median", "ser_iqr", "ser_post_median",
    ]
    for name, schema, cols, rows in (
        ("trace.csv", TRACE_SCHEMA, tcols, trace_rows),
        ("summary.csv", SUMMARY_SCHEMA, scols, summary_rows),
    ):
        path = os.path.join(out, name)
        with open(path, "w", newline="") as f:
            f.write(f"# {schema}\n")
            w = csv.writer(f)
            w.writerow(cols)
            for row in rows:
                w.writerow([_fmt(row.get(c)) for c in cols])
        paths.append(path)
    if failures and not summary_rows:
        raise SweepError(f"all sweep points failed; first error: {failures[0][2]}")
    return paths


def _read_trace(path):
    with open(path) as f:
        schema = f.readline().strip().lstrip("# ")
        reader = csv.reader(f)
        header = next(reader)
        rows = list(reader)
    return schema, header, rows


def load_tolerances(path):
    """Tolerance file: one 'column relative_tolerance' pair per line."""
    tols = {}
    with open(path) as f:
        for ln in f:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            name, tol = ln.split()
            tols[name] = float(tol)
    return tols


def compare_traces(path_a, path_b, tolerances=None):
    """Column-wise comparison of two trace/summary CSVs.

    Numeric cells compare by relative difference |a-b| / max(|a|,|b|,1e-30)
    against the column's tolerance (default 0: exact); other cells compare
    as strings. Returns (passed, report) where report maps column ->
    (max_relative_diff, tolerance, ok). Schema or shape mismatches raise.
    """
    tolerances = tolerances or {}
    sa, ha, ra = _read_trace(path_a)
    sb, hb, rb = _read_trace(path_b)
    if sa != sb or ha != hb:
        raise ValueError(f"schema mismatch: {sa}/{ha} vs {sb}/{hb}")
    if len(ra) != len(rb):
        raise ValueError(f"row count mismatch: {len(ra)} vs {len(rb)}")
    report = {}
    passed = True
    for j, col in enumerate(ha):
        tol = float(tolerances.get(col, 0.0))
        worst = 0.0
        ok = True
        for x, y in zip(ra, rb):
            a, b = x[j], y[j]
            if a == b:
                continue
            try:
                fa, fb = float(a), float(b)
            except ValueError:
                ok = False
                worst = np.inf
                break
            rel = abs(fa - fb) / max(abs(fa), abs(fb), 1e-30)
            worst = max(worst, rel)
            if rel > tol:
                ok = False
        report[col] = (worst, tol, ok)
        passed = passed and ok
    return passed, report
