"""Command line interface: ``sarcv {simulate,estimate,converge,bn,check}``.

Exit status is 0 on success, 1 for invalid configuration or input files
and 2 for numerical failures (PSD violations, failed factorisations).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ConfigError, build_model, resolve
from .estimator import read_operator_path_csv, sarcv, sup_hs_error, true_qv, write_operator_path_csv
from .harness import (
    StudyCellError,
    bn_paths,
    bn_sweep,
    convergence_study,
    drift_study,
    moment_check,
    operator_algebra_suite,
)
from .opalg import PsdViolation
from .semigroup import semigroup_from_spec
from .simulate import hjm_drift, read_trajectory_csv, simulate_mild_path, write_trajectory_csv

log = logging.getLogger("sarcv")


def _load_config(args) -> dict:
    raw = None
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    cfg = resolve(raw, args.preset)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    model = build_model(cfg)
    n = args.n or cfg["n_list"][-1]
    dn = cfg["T"] / n
    R = cfg["refine"]
    times = np.arange(n * R + 1) * (dn / R)
    from .volmodels import simulate_vol_path

    vol = simulate_vol_path(model.vol_model, times, cfg["seed"])
    drift = None
    if cfg["drift"]["kind"] == "constant":
        drift = np.asarray(cfg["drift"]["vector"], dtype=float)
    elif cfg["drift"]["kind"] == "hjm":
        drift = model.space.to_ortho(hjm_drift(vol, model.Q, model.space))
    traj = simulate_mild_path(model.semigroup, vol, model.Q, None, dn, cfg["T"], R, seed=cfg["seed"], drift=drift)
    traj.meta["config"] = cfg
    out = _out_dir(args)
    (out / "trajectory.csv").write_text(write_trajectory_csv(traj))
    (out / "qv.csv").write_text(write_operator_path_csv(true_qv(vol, model.Q, dn, cfg["T"], R)))
    print(f"wrote {out / 'trajectory.csv'} and {out / 'qv.csv'} (n={n}, d={traj.dim})")
    return 0


def cmd_estimate(args) -> int:
    try:
        traj = read_trajectory_csv(Path(args.trajectory).read_text())
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"trajectory: {exc}") from exc
    cfg = traj.meta.get("config")
    if cfg is not None:
        S = build_model(resolve(cfg)).semigroup
    else:
        S = semigroup_from_spec(traj.meta.get("semigroup", {"kind": "identity"}), traj.dim)
    est = sarcv(traj, S)
    out = _out_dir(args)
    (out / "sarcv.csv").write_text(write_operator_path_csv(est))
    msg = f"wrote {out / 'sarcv.csv'}"
    qv_path = Path(args.qv) if args.qv else Path(args.trajectory).with_name("qv.csv")
    if qv_path.exists():
        err = sup_hs_error(est, read_operator_path_csv(qv_path.read_text()))
        msg += f"; sup HS error against {qv_path.name}: {err:.6g}"
    print(msg)
    return 0


def cmd_converge(args) -> int:
    cfg = _load_config(args)
    res = convergence_study(cfg, threads=args.threads)
    out = _out_dir(args)
    (out / "study.csv").write_text(res.csv())
    (out / "study.json").write_text(res.json())
    (out / "timings.csv").write_text(res.timings_csv())
    for n, e, s in zip(res.n_list, res.mean_err, res.stderr):
        print(f"n={n:6d}  mean sup error {e:.5g} +- {s:.2g}")
    if res.slope is not None:
        print(f"slope {res.slope:.3f} (stderr {res.slope_stderr:.3f})")
    if cfg["drift"]["kind"] != "none" and args.drift_gap:
        dres = drift_study(cfg, threads=args.threads, preset=None)
        (out / "drift.csv").write_text(dres.csv())
        print(f"drift gap slope {dres.slope:.3f}")
    failed = [k for k, v in res.flags.items() if k != "strictly_decreasing" and not v]
    if failed:
        print("checks failed: " + ", ".join(failed))
    return 0


def cmd_bn(args) -> int:
    cfg = _load_config(args)
    rows = bn_sweep(cfg)
    out = _out_dir(args)
    keys = ["delta_n", "bn_hat", "refinement_delta"] + (["bound"] if "bound" in rows[0] else [])
    lines = [",".join(keys)] + [",".join(repr(float(r[k])) for k in keys) for r in rows]
    (out / "bn.csv").write_text("\n".join(lines) + "\n")
    for r in rows:
        print("  ".join(f"{k}={r[k]:.5g}" for k in keys))
    return 0


def cmd_check(args) -> int:
    cfg = _load_config(args)
    model = build_model(cfg)
    alg = operator_algebra_suite(pairs=args.pairs, seed=cfg["seed"])
    mom = moment_check(model.Q, args.delta, samples=args.samples, seed=cfg["seed"])
    report = {"operator_algebra": alg, "moments": mom, "backend": kernels.BACKEND}
    out = _out_dir(args)
    (out / "check.json").write_text(json.dumps(report, sort_keys=True, indent=2, default=float) + "\n")
    print(f"operator algebra: {'ok' if alg['pass'] else 'FAILED'} ({alg['pairs']} pairs, {alg['seconds']:.2f}s)")
    f = mom["fourth"]
    print(f"fourth moment: sample {f['sample']:.6g} vs {f['theory']:.6g} (rel err {f['rel_err']:.3%})")
    return 0 if alg["pass"] else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sarcv", description="SARCV simulation and estimation lab")
    p.add_argument("--version", action="version", version=f"sarcv {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON study config")
            sp.add_argument("--preset", help="named preset: martingale, uniform, shift, hjm, bns")
            sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default=".", help="output directory")

    sp = sub.add_parser("simulate", help="simulate one trajectory and its quadratic variation")
    common(sp)
    sp.add_argument("--n", type=int, help="observation count (default: largest n in the config)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="compute SARCV from a trajectory CSV")
    common(sp, config=False)
    sp.add_argument("trajectory")
    sp.add_argument("--qv", help="quadratic variation CSV to compare against")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("converge", help="Monte Carlo convergence study")
    common(sp)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--drift-gap", action="store_true", help="also run the drift-on/off comparison")
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("bn", help="b_n sweep over delta_list")
    common(sp)
    sp.set_defaults(func=cmd_bn)

    sp = sub.add_parser("check", help="operator-algebra and noise-moment checks")
    common(sp)
    sp.add_argument("--pairs", type=int, default=1000)
    sp.add_argument("--samples", type=int, default=10 ** 6)
    sp.add_argument("--delta", type=float, default=0.1)
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PsdViolation, np.linalg.LinAlgError, StudyCellError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
