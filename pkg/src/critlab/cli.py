"""Reproducible experiment driver.

Commands: solve | simulate | verify | rates | report. Configuration is a
flat key = value file (one key per line, ``#`` comments); every Monte Carlo
run requires a seed. Reports are CSV with a frozen column order and floats
printed at 17 significant digits, so reruns are byte-identical.

Exit codes: 0 success, 1 criterion failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acceptance import run_all
from .asymptotics import fit_rate, pi_of, predict_p11, predict_q, p11_exact
from .errors import ConfigError, CritlabError, DomainError, ParameterError, SolverError
from .kolmogorov_engine import G_of, exact_R, solve_F, survival_q
from .simulator import build_sim_model, estimate_survival, simulate_mbp, simulate_qprocess
from .sv_kernel import Family, ModelParams, make_scale_function, solve_normalizer

CSV_COLUMNS = ("experiment", "tag", "t", "exact", "predicted", "normalized_error", "method", "stderr")

# closed catalog of report tags; write_rows rejects anything else
TAG_CATALOG = frozenset({
    "q", "P11", "R", "F", "G",
    "closed-form-q", "exact-identity", "semigroup",
    "survival-second-order", "p11-second-order",
    "qproc-gf", "qproc-gf-second", "laplace-sup-rate",
    "invariant-mu", "invariant-pi", "tauberian",
    "mc-q", "mc-qcell", "mc-ks-rate",
    "quadratic-baseline", "first-order-ratio",
})


@dataclass
class ExperimentConfig:
    family: str = "constant"
    nu: float = 0.5
    a0: float = 1.0
    t_min: float = 1.0
    t_max: float = 1000.0
    t_points: int = 7
    s_list: list = field(default_factory=lambda: [0.0, 0.5])
    theta_min: float = 1e-3
    theta_max: float = 1e3
    theta_points: int = 200
    mc_n: int = 10000
    i0: int = 1
    seed: int | None = None
    pop_cap: int = 10**9
    event_budget: int | None = None
    trajectories: int = 0
    series_order: int = 1024
    threads: int = 1
    out: str = "reports"

    def t_grid(self) -> np.ndarray:
        if self.t_points < 1 or self.t_max < self.t_min or self.t_min <= 0:
            raise ConfigError("t grid needs t_points >= 1 and 0 < t_min <= t_max")
        if self.t_points == 1:
            return np.array([self.t_min])
        return np.geomspace(self.t_min, self.t_max, self.t_points)

    def scale_function(self):
        try:
            fam = Family(self.family)
        except ValueError:
            raise ConfigError(
                f"field 'family': unknown tag {self.family!r}; "
                f"choose from {[f.value for f in Family]}"
            ) from None
        return make_scale_function(ModelParams(self.nu, self.a0, fam))


_INT_KEYS = {"t_points", "theta_points", "mc_n", "i0", "seed", "pop_cap",
             "event_budget", "trajectories", "series_order", "threads"}
_FLOAT_KEYS = {"nu", "a0", "t_min", "t_max", "theta_min", "theta_max"}
_STR_KEYS = {"family", "out"}
_LIST_KEYS = {"s_list"}


def parse_config(path: str | Path) -> ExperimentConfig:
    cfg = ExperimentConfig()
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key in _INT_KEYS:
                setattr(cfg, key, int(float(value)))
            elif key in _FLOAT_KEYS:
                setattr(cfg, key, float(value))
            elif key in _STR_KEYS:
                setattr(cfg, key, value)
            elif key in _LIST_KEYS:
                setattr(cfg, key, [float(v) for v in value.split(",") if v.strip()])
            else:
                raise ConfigError(f"{path}:{lineno}: unknown field {key!r}")
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: field {key!r}: cannot parse {value!r}") from None
    return cfg


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def write_rows(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            exp, tag, t, exact, pred, err, method, stderr = row
            if tag not in TAG_CATALOG:
                raise ConfigError(f"report tag {tag!r} is not in the catalog")
            fh.write(
                ",".join([str(exp), str(tag), _fmt(t), _fmt(exact), _fmt(pred),
                          _fmt(err), str(method), _fmt(stderr)]) + "\n"
            )


def read_rows(path: Path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise ConfigError(f"{path}: not a critlab report (bad header)")
    out = []
    for line in lines[1:]:
        parts = line.split(",")
        out.append(
            (parts[0], parts[1], float(parts[2]), float(parts[3] or "nan"),
             float(parts[4] or "nan"), float(parts[5] or "nan"), parts[6], parts[7])
        )
    return out


def cmd_solve(cfg: ExperimentConfig) -> int:
    sf = cfg.scale_function()
    rows = []
    for t in cfg.t_grid():
        q = survival_q(sf, t)
        pred = predict_q(sf, t).value if t >= 1.0 else None
        err = (q / pred - 1.0) if pred else 0.0
        rows.append(("solve", "q", t, q, pred, err, "oracle", ""))
        scaled = (sf.nu * t) ** (1.0 + 1.0 / sf.nu) * p11_exact(sf, t)
        p_pred = predict_p11(sf, t).value if t >= 1.0 else None
        rows.append(("solve", "P11", t, scaled, p_pred,
                     (scaled / p_pred - 1.0) if p_pred else 0.0, "oracle", ""))
        for s in cfg.s_list:
            r_oracle = exact_R(sf, s, t)
            r_ode = solve_F(sf, s, t).value
            rows.append((f"s={s:g}", "R", t, r_oracle, r_ode,
                         r_ode / r_oracle - 1.0, "ode", ""))
            if 0.0 < s < 1.0:
                g = G_of(sf, s, t)
                gp = pi_of(sf, s) * solve_normalizer(sf, t).value / (sf.nu * t) ** (1.0 + 1.0 / sf.nu) if t >= 1 else None
                rows.append((f"s={s:g}", "G", t, g, gp,
                             (g / gp - 1.0) if gp else 0.0, "oracle", ""))
    out = Path(cfg.out) / "solve.csv"
    write_rows(out, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_simulate(cfg: ExperimentConfig) -> int:
    if cfg.seed is None:
        raise ConfigError("field 'seed': mandatory for simulate")
    sf = cfg.scale_function()
    model = build_sim_model(sf)
    rows = []
    ts = cfg.t_grid()
    ests = estimate_survival(model, ts, cfg.mc_n, cfg.seed, i0=cfg.i0,
                             threads=cfg.threads, pop_cap=cfg.pop_cap)
    for t, est in zip(ts, ests):
        exact = survival_q(sf, t) if cfg.i0 == 1 else 1.0 - (1.0 - survival_q(sf, t)) ** cfg.i0
        rows.append(("mc", "mc-q", t, exact, est.value, est.value - exact, "mc", est.stderr))
    out = Path(cfg.out) / "simulate.csv"
    write_rows(out, rows)
    print(f"wrote {len(rows)} rows to {out}")
    if cfg.trajectories > 0:
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1)))
        tpath = Path(cfg.out) / "trajectories.txt"
        with open(tpath, "w") as fh:
            for i in range(cfg.trajectories):
                traj = simulate_mbp(model, cfg.i0, float(ts[-1]), rng, pop_cap=cfg.pop_cap)
                for tt, zz in zip(traj.times, traj.sizes):
                    fh.write(f"{i} {_fmt(tt)} {zz}\n")
        print(f"wrote {cfg.trajectories} trajectories to {tpath}")
    return 0


def cmd_verify(cfg: ExperimentConfig, only: str | None) -> int:
    try:
        results = run_all(only)
    except KeyError as exc:
        raise ConfigError(f"--only: {exc.args[0]}") from None
    rows = []
    for r in results:
        print(r.line())
        for d in r.details[1:]:
            print(f"    {d}")
        rows.extend(r.rows)
    out = Path(cfg.out) / "acceptance.csv"
    write_rows(out, rows)
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed; rows in {out}")
    return 1 if n_fail else 0


def cmd_rates(cfg: ExperimentConfig, report_path: str) -> int:
    rows = read_rows(Path(report_path))
    by_tag: dict[str, list] = {}
    for row in rows:
        by_tag.setdefault(row[1], []).append(row)
    print("tag,slope,intercept,r_squared")
    for tag, grp in sorted(by_tag.items()):
        ts = np.array([g[2] for g in grp])
        errs = np.array([g[5] for g in grp])
        try:
            fit = fit_rate(ts=ts, residuals=errs)
        except DomainError:
            continue
        print(f"{tag},{_fmt(fit.slope)},{_fmt(fit.intercept)},{_fmt(fit.r_squared)}")
    return 0


def cmd_report(cfg: ExperimentConfig, report_path: str) -> int:
    rows = read_rows(Path(report_path))
    by_tag: dict[str, list] = {}
    for row in rows:
        by_tag.setdefault(row[1], []).append(row)
    print(f"{'tag':<24}{'rows':>6}{'max|err|':>14}  methods")
    for tag, grp in sorted(by_tag.items()):
        errs = [abs(g[5]) for g in grp if math.isfinite(g[5])]
        methods = ",".join(sorted({g[6] for g in grp}))
        print(f"{tag:<24}{len(grp):>6}{max(errs) if errs else float('nan'):>14.3e}  {methods}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="critlab", description=__doc__)
    p.add_argument("command", choices=["solve", "simulate", "verify", "rates", "report"])
    p.add_argument("report_file", nargs="?", help="input CSV for rates/report")
    p.add_argument("--config", type=str, default=None, help="flat key = value config file")
    p.add_argument("--only", type=str, default=None, help="run one acceptance criterion (id or tag)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (fallback: CRITLAB_THREADS)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        if args.threads is not None:
            cfg.threads = args.threads
        elif os.environ.get("CRITLAB_THREADS"):
            cfg.threads = int(os.environ["CRITLAB_THREADS"])
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.only)
        if args.command in ("rates", "report"):
            if not args.report_file:
                raise ConfigError(f"{args.command} needs a report CSV path")
            fn = cmd_rates if args.command == "rates" else cmd_report
            return fn(cfg, args.report_file)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ParameterError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, CritlabError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
