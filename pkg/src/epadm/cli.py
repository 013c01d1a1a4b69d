"""Command-line entry point: ``epadm run`` and ``epadm verify``.

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 runtime invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .diagnostics import DiagnosticsError, MaterialLoop, relative_drift
from .dynamics import RecoveryError, StepRejected
from .eos import Eos, EosError
from .frames import FrameError, frame_equivalence_check, make_frame
from .geometry import BackgroundError
from .kinematics import KinematicsError
from .lagrangian import SubluminalError
from .oracles import SUITES, run_suite
from .runner import OutputSink, integrate
from .scenarios import ScenarioError, make_scenario

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("epadm")


def _thread_limit():
    value = os.environ.get("EPADM_THREADS")
    if not value:
        return nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"EPADM_THREADS must be a positive integer, got {value!r}")
    if n < 1:
        raise ConfigError("EPADM_THREADS must be a positive integer")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def build_scenario(cfg: RunConfig):
    name = cfg.get("scenario", "name")
    if name is None:
        raise ConfigError("[scenario] name is required")
    params = {k: v for k, v in cfg.section("scenario").items() if k != "name"}
    params.update(cfg.section("grid"))
    if "extent" in params and not np.isscalar(params["extent"]):
        raise ConfigError("grid.extent must be a single number (cubic domains)")
    eos_sec = cfg.section("eos")
    if eos_sec:
        try:
            params["eos"] = Eos(**eos_sec)
        except (TypeError, EosError) as exc:
            raise ConfigError(f"[eos]: {exc}") from exc
    if cfg.get("background", "name") is not None:
        params["background"] = cfg.get("background", "name")
    num = cfg.section("numerics")
    for key in ("safety", "dt", "hyperdissipation"):
        if key in num:
            params[key] = num[key]
    try:
        sc = make_scenario(name, **params)
    except (ScenarioError, BackgroundError, EosError, TypeError) as exc:
        raise ConfigError(f"scenario {name!r}: {exc}") from exc
    fr = cfg.section("frame")
    if fr:
        kind = fr.get("kind", "identity")
        try:
            frame = make_frame(kind, sc.grid.dim, sc.grid.extent, fr.get("velocity"),
                               fr.get("amplitude", 0.05), fr.get("omega", 2 * np.pi))
        except FrameError as exc:
            raise ConfigError(f"[frame]: {exc}") from exc
        sc.frame = None if kind == "identity" and name != "moving_frame_twin" else frame
    for lname, spec in cfg.loops().items():
        try:
            sc.loops.append(MaterialLoop.circle(spec["center"], float(spec["radius"]),
                                                int(spec.get("markers", 256)), sc.grid.extent,
                                                name=lname))
        except (KeyError, DiagnosticsError, TypeError, ValueError) as exc:
            raise ConfigError(f"[loop.{lname}]: {exc}") from exc
    out = cfg.section("output")
    if out.get("cadence") is not None:
        sc.output_every = float(out["cadence"])
    return sc


def _model(sc, cfg, frame):
    num = cfg.section("numerics")
    model = sc.build_model(frame)
    model.hyper_order = int(num.get("hyper_order", model.hyper_order))
    return model


def _run_one(sc, cfg, model, outdir, label, quiet):
    out = cfg.section("output")
    fields = out.get("fields", ("J0", "u"))
    fields = (fields,) if isinstance(fields, str) else tuple(fields)
    state = sc.initial_state(model)
    sink = OutputSink(outdir, model, sc.loops, fields, bool(out.get("snapshots", True)))
    t0 = time.time()
    try:
        res = integrate(model, state, sc.t_end, sc.loops, dt=sc.dt, safety=sc.safety,
                        every=sc.output_every, quadrature=int(cfg.get("numerics", "quadrature", 3)),
                        on_output=sink, keep_outputs=True)
    finally:
        sink.close()
    if not quiet:
        log.info("%s: %d steps to t=%.6g in %.2fs", label, res.steps, res.state.t, time.time() - t0)
    return res


def _summary(sc, results, path, extra=""):
    lines = [f"scenario: {sc.name}", f"grid: {sc.grid.points} extent {sc.grid.extent}",
             f"eos: {sc.eos}", f"background: {sc.background.name}"]
    for label, res in results:
        recs = res.records
        mass = [r["mass"] for r in recs]
        lines.append(f"[{label}] steps: {res.steps}  final t: {res.state.t:.17g}")
        lines.append(f"[{label}] mass drift (relative): {relative_drift(mass):.3e}")
        for key in recs[0]:
            if key.startswith("circ_"):
                lines.append(f"[{label}] {key} drift (relative): {relative_drift([r[key] for r in recs]):.3e}")
        lines.append(f"[{label}] final constraint residuals: ham {recs[-1]['ham_res_L2']:.3e}"
                     f"  mom {recs[-1]['mom_res_L2']:.3e}")
    text = "\n".join(lines) + "\n" + extra
    Path(path).write_text(text)
    return text


def cmd_run(cfg: RunConfig, outdir: Path, quiet: bool) -> int:
    sc = build_scenario(cfg)
    outdir.mkdir(parents=True, exist_ok=True)
    if sc.name == "moving_frame_twin":
        frame, sc.frame = sc.frame, None
        inertial = _run_one(sc, cfg, _model(sc, cfg, None), outdir / "inertial", "inertial", quiet)
        sc.frame = frame
        moving = _run_one(sc, cfg, _model(sc, cfg, frame), outdir / "moving", "moving", quiet)
        report = frame_equivalence_check(sc.grid, inertial.outputs, moving.outputs, frame)
        with open(outdir / "twin_report.csv", "w") as fh:
            fh.write("t,max_err_u,max_err_J0\n")
            for r in report:
                fh.write(f"{r['t']!r},{r['u']!r},{r['J0']!r}\n")
        worst = max(max(r["u"], r["J0"]) for r in report)
        text = _summary(sc, [("inertial", inertial), ("moving", moving)], outdir / "summary.txt",
                        f"frame equivalence max discrepancy: {worst:.3e}\n")
    else:
        res = _run_one(sc, cfg, _model(sc, cfg, sc.frame), outdir, "run", quiet)
        text = _summary(sc, [("run", res)], outdir / "summary.txt")
    if not quiet:
        print(text, end="")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, suite: str, quiet: bool) -> int:
    seed = int(cfg.get("verify", "seed", 0))
    checks = run_suite(suite, seed=seed)
    failed = [c for c in checks if not c.passed]
    for c in checks:
        if not quiet or not c.passed:
            print(c.line())
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed (suite {suite}, seed {seed})")
    return EXIT_OK if not failed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epadm", description="Euler-Poincare fluid on fixed ADM backgrounds")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI configuration file")
    common.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable)")
    common.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    common.add_argument("--quiet", action="store_true", help="print failures and errors only")
    sub.add_parser("run", parents=[common], help="run a scenario")
    pv = sub.add_parser("verify", parents=[common], help="run an oracle suite")
    pv.add_argument("suite", nargs="?", default=None, help=f"one of {sorted(SUITES) + ['all']}")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.override)
        with _thread_limit():
            if args.command == "verify":
                suite = args.suite or cfg.get("verify", "suite", "all")
                if suite != "all" and suite not in SUITES:
                    raise ConfigError(f"unknown suite {suite!r}; expected one of {sorted(SUITES) + ['all']}")
                return cmd_verify(cfg, suite, args.quiet)
            outdir = args.out or Path(cfg.get("output", "directory", "epadm_out"))
            return cmd_run(cfg, Path(outdir), args.quiet)
    except ConfigError as exc:
        print(f"epadm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepRejected, RecoveryError, SubluminalError, DiagnosticsError, KinematicsError,
            FrameError, FloatingPointError) as exc:
        print(f"epadm: runtime invariant violation: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
