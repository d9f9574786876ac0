"""Batch front end: single runs, mass-ratio sweeps, and level comparisons.

Configuration is a plain ``key = value`` text file overridable by command
line flags, so every run is reproducible from a diff-friendly record.
Outputs are CSV files with 17-significant-digit floats (exact round trip)
plus a small key = value summary per run.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure.
"""

import argparse
import os
import sys
import tempfile

import numpy as np

from .errors import SimulationError, ValidationError
from .levels import LevelConfig, trajectory
from .observables import singularity_time, trajectory_distance
from .params import StateVector, circular_initial_condition, make_params
from .rkf45 import StopCondition, TERM_SPEED, TERM_TARGET, eval_dense

OUTDIR_ENV = "LWPAIR_OUTDIR"

CSV_HEADER = (
    "t,x1,y1,z1,x2,y2,z2,vx1,vy1,vz1,vx2,vy2,vz2,"
    "ax1,ay1,az1,ax2,ay2,az2,r,smax"
)

_REASON_LABELS = {
    TERM_TARGET: "time limit",
    TERM_SPEED: "speed threshold",
    "separation": "separation floor",
    "stall": "step underflow",
}


def fmt(x):
    return f"{float(x):.17g}"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def parse_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


class RunConfig:
    """Validated run setup shared by all subcommands."""

    FIELDS = {
        "eta": float,
        "sign": int,
        "alpha": float,
        "level": int,
        "ic": str,
        "r0": float,
        "state": str,
        "v_threshold": float,
        "min_separation": float,
        "t_limit": float,
        "abs_tol": float,
        "rel_tol": float,
        "delay_tol": float,
        "dtau_rel": float,
        "stride": int,
        "outdir": str,
        "engine": str,
        "eta_list": str,
        "levels": str,
        "t_max": float,
        "grid": int,
    }

    DEFAULTS = {
        "eta": 1.0,
        "sign": -1,
        "alpha": 0.5,
        "level": 0,
        "ic": "circular",
        "r0": 50.0,
        "state": None,
        "v_threshold": 0.8,
        "min_separation": 1e-6,
        "t_limit": 1e9,
        "abs_tol": 1e-9,
        "rel_tol": 1e-9,
        "delay_tol": 1e-10,
        "dtau_rel": 1e-3,
        "stride": 1,
        "outdir": None,
        "engine": "auto",
        "eta_list": "1,2,5,10",
        "levels": "0,1",
        "t_max": None,
        "grid": 2000,
    }

    def __init__(self, mapping):
        merged = dict(self.DEFAULTS)
        for key, val in mapping.items():
            if key not in self.FIELDS:
                raise ValidationError(f"unknown configuration key {key!r}")
            if val is None:
                continue
            conv = self.FIELDS[key]
            try:
                merged[key] = conv(val)
            except (TypeError, ValueError) as err:
                raise ValidationError(f"bad value for {key!r}: {val!r}") from err
        for key, val in merged.items():
            setattr(self, key, val)
        if self.outdir is None:
            self.outdir = os.environ.get(OUTDIR_ENV, ".")
        if self.ic not in ("circular", "explicit"):
            raise ValidationError(f"ic must be 'circular' or 'explicit', got {self.ic!r}")
        if self.stride < 1:
            raise ValidationError("stride must be >= 1")
        self.params = make_params(self.eta, self.sign, self.alpha)
        self.cfg = LevelConfig(
            level=self.level,
            abs_tol=self.abs_tol,
            rel_tol=self.rel_tol,
            delay_tol=self.delay_tol,
            dtau_rel=self.dtau_rel,
        )
        self.stop = StopCondition(
            v_threshold=self.v_threshold,
            min_separation=self.min_separation,
            t_limit=self.t_limit,
        )

    def initial_state(self):
        if self.ic == "circular":
            return circular_initial_condition(self.params, self.r0)
        if self.state is None:
            raise ValidationError("ic = explicit requires a state")
        vals = [float(v) for v in str(self.state).replace(";", ",").split(",")]
        if len(vals) not in (8, 12):
            raise ValidationError("state must have 8 (planar) or 12 numbers")
        return StateVector.from_array(np.array(vals))

    def eta_values(self):
        try:
            return [float(v) for v in str(self.eta_list).split(",") if v.strip()]
        except ValueError as err:
            raise ValidationError(f"bad eta_list {self.eta_list!r}") from err

    def level_values(self):
        try:
            levels = [int(v) for v in str(self.levels).split(",") if v.strip()]
        except ValueError as err:
            raise ValidationError(f"bad levels {self.levels!r}") from err
        return levels


def _atomic_write(path, text):
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _embed3(vec):
    return np.append(vec, 0.0) if vec.shape[0] == 2 else vec


def _row(t, y, k):
    d = y.shape[0] // 4
    r1, v1 = _embed3(y[0:d]), _embed3(y[d : 2 * d])
    r2, v2 = _embed3(y[2 * d : 3 * d]), _embed3(y[3 * d :])
    a1, a2 = _embed3(k[d : 2 * d]), _embed3(k[3 * d :])
    sep = float(np.linalg.norm(y[0:d] - y[2 * d : 3 * d]))
    smax = max(float(np.linalg.norm(v1)), float(np.linalg.norm(v2)))
    cells = [t, *r1, *r2, *v1, *v2, *a1, *a2, sep, smax]
    return ",".join(fmt(c) for c in cells)


def write_trajectory_csv(path, traj, stride=1):
    seg = traj.segment
    idx = list(range(0, len(seg.ts), stride))
    if idx[-1] != len(seg.ts) - 1:
        idx.append(len(seg.ts) - 1)
    lines = [CSV_HEADER]
    for i in idx:
        lines.append(_row(float(seg.ts[i]), seg.ys[i], seg.ks[i]))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_summary(path, run, traj):
    reason = _REASON_LABELS.get(traj.termination.reason, traj.termination.reason)
    final = eval_dense(traj.segment, traj.termination.time)
    lines = [
        f"eta = {fmt(run.eta)}",
        f"sign = {run.sign}",
        f"alpha = {fmt(run.alpha)}",
        f"level = {run.level}",
        f"termination_reason = {reason}",
        f"termination_time = {fmt(traj.termination.time)}",
        f"final_state = {','.join(fmt(v) for v in final)}",
        f"knots = {len(traj.segment.ts)}",
    ]
    _atomic_write(path, "\n".join(lines) + "\n")


def cmd_simulate(run):
    traj = trajectory(
        run.level, run.initial_state(), run.params, run.cfg, run.stop,
        engine=run.engine,
    )
    write_trajectory_csv(os.path.join(run.outdir, "trajectory.csv"), traj, run.stride)
    write_summary(os.path.join(run.outdir, "summary.txt"), run, traj)
    reason = _REASON_LABELS.get(traj.termination.reason, traj.termination.reason)
    print(f"terminated by {reason} at t = {fmt(traj.termination.time)}")
    return 0


def cmd_sweep(run):
    etas = run.eta_values()
    rows = ["eta,level,t_sing,termination"]
    fit_pts = []
    for eta in etas:
        params = make_params(eta, run.sign, run.alpha)
        try:
            traj = trajectory(
                run.level,
                circular_initial_condition(params, run.r0),
                params,
                run.cfg,
                run.stop,
                engine=run.engine,
            )
            if traj.termination.reason == TERM_SPEED:
                t_sing = singularity_time(traj, run.v_threshold)
                rows.append(
                    f"{fmt(eta)},{run.level},{fmt(t_sing)},speed threshold"
                )
                fit_pts.append((eta, t_sing))
            else:
                reason = _REASON_LABELS.get(
                    traj.termination.reason, traj.termination.reason
                )
                rows.append(f"{fmt(eta)},{run.level},,{reason}")
        except SimulationError as err:
            rows.append(f"{fmt(eta)},{run.level},,error: {type(err).__name__}")
    if len(fit_pts) >= 2:
        xs = np.array([p[0] for p in fit_pts])
        ys = np.array([p[1] for p in fit_pts])
        slope, intercept = np.polyfit(xs, ys, 1)
        pred = slope * xs + intercept
        ss_res = float(np.sum((ys - pred) ** 2))
        ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        rows.append(
            f"# linear_fit slope={fmt(slope)} intercept={fmt(intercept)} r2={fmt(r2)}"
        )
    _atomic_write(os.path.join(run.outdir, "sweep.csv"), "\n".join(rows) + "\n")
    print(f"swept {len(etas)} mass ratios at level {run.level}")
    return 0


def cmd_compare(run):
    levels = run.level_values()
    if len(levels) < 2:
        raise ValidationError("compare needs at least two levels")
    x0 = run.initial_state()
    trajs = {}
    for n in levels:
        trajs[n] = trajectory(n, x0, run.params, run.cfg, run.stop, engine=run.engine)
    rows = ["n_from,n_to,t_max,d_r1,d_r2"]
    for a, b in zip(levels, levels[1:]):
        rep = trajectory_distance(trajs[a], trajs[b], t_max=run.t_max, n_grid=run.grid)
        rows.append(
            f"{rep.n_from},{rep.n_to},{fmt(rep.t_max)},{fmt(rep.d_r1)},{fmt(rep.d_r2)}"
        )
    _atomic_write(os.path.join(run.outdir, "compare.csv"), "\n".join(rows) + "\n")
    print(f"compared levels {levels}")
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="key = value configuration file")
    for key, conv in RunConfig.FIELDS.items():
        flag = "--" + key.replace("_", "-")
        sub.add_argument(flag, type=str, default=None, dest=key)


def build_parser():
    parser = _Parser(prog="lwpair", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "integrate one run and write trajectory.csv + summary.txt"),
        ("sweep", "singularity-time table over a list of mass ratios"),
        ("compare", "distance metric between consecutive-level runs"),
    ):
        sub = subs.add_parser(name, help=help_text)
        _add_common(sub)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        mapping = {}
        if args.config:
            mapping.update(parse_config_file(args.config))
        for key in RunConfig.FIELDS:
            val = getattr(args, key, None)
            if val is not None:
                mapping[key] = val
        run = RunConfig(mapping)
        if args.command == "simulate":
            return cmd_simulate(run)
        if args.command == "sweep":
            return cmd_sweep(run)
        return cmd_compare(run)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except SimulationError as err:
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
