"""Command-line runner: one subcommand per operation, JSON configs in,
CSV/JSON artifacts and a run manifest out.

Exit codes: 0 all asserted invariants hold, 2 bad config, 3 capacity or
frame ambiguity, 4 invariant failure (details in failure.json).
Flags may also come from LATTICESFE_CONFIG, LATTICESFE_THREADS,
LATTICESFE_OUT_DIR and LATTICESFE_SEED; explicit flags win.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import free_energy as fe
from .errors import AmbiguityError, CapacityError, ConfigError, DomainError, OptimizationError
from .lattice import Window, block, make_box
from .measures import DensityTable, _fmt, point_mass
from .models import BoundaryCondition, check_consistency, diam_B, kernel, model_from_json

log = logging.getLogger("latticesfe")
ENV_PREFIX = "LATTICESFE_"
SUBCOMMANDS = ("kernel", "diam", "consistency", "sfe", "superadd", "finite-energy", "dlr",
               "sample", "verify-all")

CONFIG_KEYS = {"model", "window", "delta", "frame", "boundary", "mu", "n_max", "parts",
               "sweeps", "chains", "stride", "thin", "tolerances", "seed", "expect", "quick"}
TOLERANCE_KEYS = {"consistency", "gap", "slack", "dlr", "sandwich"}
DEFAULT_TOL = {"consistency": 1e-10, "gap": 1e-9, "slack": 1e-8, "dlr": 1e-10, "sandwich": 1e-8}


# ---------------------------------------------------------------------------
# config parsing


def _check_keys(obj: dict, allowed: set, where: str):
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def parse_window(spec, d: int) -> Window:
    if not isinstance(spec, dict):
        raise ConfigError("a window is an object with 'box', 'block' or 'sites'")
    _check_keys(spec, {"box", "block", "origin", "sites"}, "window")
    if "box" in spec:
        return make_box(int(spec["box"]), d)
    if "block" in spec:
        return block(spec["block"], spec.get("origin"))
    if "sites" in spec:
        return Window.of(spec["sites"])
    raise ConfigError("window needs one of 'box', 'block', 'sites'")


def parse_mu(spec, model, d: int):
    _check_keys(spec, {"kind", "single", "beta", "h", "p", "window", "states", "seed"}, "mu")
    kind = spec.get("kind")
    if kind == "product":
        return fe.ProductField(model.alphabet, spec.get("single"), d)
    if kind == "ising_chain":
        return fe.IsingChainField(spec["beta"], spec.get("h", 0.0))
    if kind == "griffiths_window":
        w = parse_window(spec["window"], d)
        return fe.griffiths_window_measure(spec["p"], spec["beta"], w)
    if kind == "point_mass":
        w = parse_window(spec["window"], d)
        states = spec.get("states", [model.tail_index] * len(w))
        return point_mass(w, model.alphabet, states)
    if kind == "gibbs":
        w = parse_window(spec["window"], d)
        return kernel(model, w, BoundaryCondition.tail_filled(model, w))
    if kind == "random":
        w = parse_window(spec["window"], d)
        rng = np.random.default_rng(spec.get("seed", 0))
        return DensityTable.from_log_weights(w, model.alphabet,
                                             rng.normal(size=len(model.alphabet) ** len(w)))
    raise ConfigError(f"unknown mu kind {kind!r}")


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(cfg, CONFIG_KEYS, "config")
    tol = dict(DEFAULT_TOL)
    if "tolerances" in cfg:
        _check_keys(cfg["tolerances"], TOLERANCE_KEYS, "tolerances")
        tol.update(cfg["tolerances"])
    cfg["tolerances"] = tol
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# output helpers


class Run:
    def __init__(self, out_dir: Path, cfg: dict, command: str, threads: int, seed):
        self.out_dir, self.cfg, self.command = out_dir, cfg, command
        self.threads, self.seed = threads, seed
        self.stages: list = []
        self.invariants: list = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def stage(self, name, fn, *args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        self.stages.append({"stage": name, "seconds": time.perf_counter() - t0})
        return out

    def check(self, name, passed, value=None, bound=None):
        rec = {"invariant": name, "passed": bool(passed)}
        if value is not None:
            rec["value"] = _fmt(value)
        if bound is not None:
            rec["bound"] = _fmt(bound)
        self.invariants.append(rec)
        log.info("%s %s", "PASS" if passed else "FAIL", name)

    def write_csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in r])
        (self.out_dir / name).write_text(buf.getvalue())

    def write_json(self, name, obj):
        (self.out_dir / name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def manifest(self, code):
        self.write_json("manifest.json", {
            "command": self.command, "config_hash": config_hash(self.cfg),
            "version": __version__, "threads": self.threads, "seed": self.seed,
            "stages": self.stages, "invariants": self.invariants, "exit_code": code,
        })


def _model_and_d(cfg):
    if "model" not in cfg:
        raise ConfigError("config needs a 'model'")
    model = model_from_json(cfg["model"])
    return model, model.d


def _boundaries(cfg, model, lam, frame, rng):
    spec = cfg.get("boundary", {"kind": "tail"})
    _check_keys(spec, {"kind", "count", "states"}, "boundary")
    kind = spec.get("kind", "tail")
    if kind == "tail":
        return [BoundaryCondition.tail_filled(model, lam, frame)]
    if kind == "states":
        return [BoundaryCondition.from_states(model, lam, frame, spec["states"])]
    if kind == "random":
        out = [BoundaryCondition.tail_filled(model, lam, frame)]
        k = len(model.alphabet)
        n_out = len(frame) - len(lam)
        for v in range(k):
            out.append(BoundaryCondition.from_states(model, lam, frame, [v] * n_out))
        while len(out) < int(spec.get("count", 20)):
            out.append(BoundaryCondition.random(model, lam, frame, rng))
        return out
    raise ConfigError(f"unknown boundary kind {kind!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_kernel(run: Run):
    cfg = run.cfg
    model, d = _model_and_d(cfg)
    lam = parse_window(cfg["window"], d)
    frame = parse_window(cfg["frame"], d) if "frame" in cfg else model.required_frame(lam)
    rng = np.random.default_rng(run.seed)
    bc = _boundaries(cfg, model, lam, frame, rng)[0]
    table = run.stage("kernel", kernel, model, lam, bc)
    (run.out_dir / "kernel.csv").write_text(table.to_csv())
    run.write_json("kernel.json", {"window": table.window.to_json(), "log_z": _fmt(table.log_z),
                                   "boundary": bc.to_json()})
    run.check("kernel normalized", abs(table.mass - 1) <= 1e-12, table.mass, 1.0)


def cmd_diam(run: Run):
    cfg = run.cfg
    model, d = _model_and_d(cfg)
    lam = parse_window(cfg["window"], d)
    frame = parse_window(cfg["frame"], d) if "frame" in cfg else model.required_frame(lam)
    val = run.stage("diam", diam_B, model, lam, frame, threads=run.threads)
    bound = model.boundary_bound(lam)
    run.write_csv("diam.csv", ["window_size", "frame_size", "diam", "bound", "slack"],
                  [[len(lam), len(frame), float(val), float(bound), float(bound - val)]])
    run.check("diameter within proven bound", val <= bound + 1e-9, val, bound)


def cmd_consistency(run: Run):
    cfg = run.cfg
    model, d = _model_and_d(cfg)
    lam = parse_window(cfg["window"], d)
    delta = parse_window(cfg.get("delta", cfg["window"]), d)
    frame = parse_window(cfg["frame"], d) if "frame" in cfg else model.required_frame(delta)
    rng = np.random.default_rng(run.seed)
    bcs = _boundaries(cfg, model, delta, frame, rng)
    res = run.stage("consistency", lambda: [check_consistency(model, lam, delta, b) for b in bcs])
    run.write_csv("consistency.csv", ["boundary", "residual"], [[i, float(r)] for i, r in enumerate(res)])
    tol = cfg["tolerances"]["consistency"]
    run.check("consistency residual", max(res) <= tol, max(res), tol)


def _mu(cfg, model, d):
    if "mu" not in cfg:
        raise ConfigError("config needs a 'mu'")
    return parse_mu(cfg["mu"], model, d)


def cmd_sfe(run: Run):
    cfg = run.cfg
    model, d = _model_and_d(cfg)
    mu = _mu(cfg, model, d)
    n_max = int(cfg.get("n_max", 2))
    tol = cfg["tolerances"]
    rep = run.stage("sfe", fe.sfe_report, mu, model, n_max, tol=tol["gap"], threads=run.threads)
    (run.out_dir / "sfe.csv").write_text(rep.to_csv())
    bad = rep.sandwich_violations(tol["sandwich"])
    run.check("sandwich", not bad, float(len(bad)), 0.0)


def cmd_superadd(run: Run):
    cfg = run.cfg
    model, d = _model_and_d(cfg)
    mu = _mu(cfg, model, d)
    parts = [parse_window(p, d) for p in cfg.get("parts", [])]
    if not parts:
        raise ConfigError("superadd needs 'parts'")
    slack = run.stage("superadd", fe.superadditivity_check, mu, model, parts,
                      tol=cfg["tolerances"]["gap"])
    run.write_csv("superadd.csv", ["parts", "slack"], [[len(parts), float(slack)]])
    tol = cfg["tolerances"]["slack"]
    run.check("superadditivity slack", slack >= -tol, slack, -tol)


def cmd_finite_energy(run: Run):
    cfg = run.cfg
    model, d = _model_and_d(cfg)
    mu = _mu(cfg, model, d)
    if not isinstance(mu, DensityTable):
        mu = mu.marginal(parse_window(cfg["mu"].get("window", {"box": 1}), d))
    lam = parse_window(cfg["window"], d)
    frame = parse_window(cfg["frame"], d) if "frame" in cfg else None
    eps, ok = run.stage("finite-energy", fe.finite_energy_check, mu, model, lam, frame)
    run.write_csv("finite_energy.csv", ["epsilon", "passes"], [[float(eps), int(ok)]])
    expect = bool(cfg.get("expect", True))
    run.check("finite energy outcome as expected", ok == expect, float(ok), float(expect))


def cmd_dlr(run: Run):
    cfg = run.cfg
    model, d = _model_and_d(cfg)
    mu = _mu(cfg, model, d)
    if not isinstance(mu, DensityTable):
        mu = mu.marginal(parse_window(cfg["mu"].get("window", {"box": 1}), d))
    lam = parse_window(cfg["window"], d)
    res = run.stage("dlr", fe.dlr_residual, mu, model, lam)
    run.write_csv("dlr.csv", ["residual"], [[float(res)]])
    tol = cfg["tolerances"]["dlr"]
    if cfg.get("expect", True):
        run.check("dlr residual", res <= tol, res, tol)
    else:
        run.check("dlr residual positive", res > tol, res, tol)


def cmd_sample(run: Run):
    cfg = run.cfg
    model, d = _model_and_d(cfg)
    lam = parse_window(cfg["window"], d)
    seed = run.seed if run.seed is not None else 0
    chains = run.stage("sample", fe.run_chains, model, lam, int(cfg.get("sweeps", 1000)), seed,
                       int(cfg.get("chains", 1)), threads=run.threads,
                       thin=int(cfg.get("thin", 1)), stride=int(cfg.get("stride", 0)))
    rows = []
    for c, res in enumerate(chains):
        for code, n in enumerate(res.counts):
            rows.append([c, code, int(n)])
        if res.snapshots:
            run.write_json(f"snapshots_chain{c}.json", res.snapshots)
    run.write_csv("samples.csv", ["chain", "code", "count"], rows)
    run.write_json("trajectories.json", {"digests": [r.digest for r in chains]})
    run.check("chains finished", True)


def cmd_verify_all(run: Run):
    from .suite import run_suite
    for name, passed, value, bound in run.stage("verify-all", run_suite, quick=run.cfg.get("quick", True)):
        run.check(name, passed, value, bound)


COMMANDS = {"kernel": cmd_kernel, "diam": cmd_diam, "consistency": cmd_consistency,
            "sfe": cmd_sfe, "superadd": cmd_superadd, "finite-energy": cmd_finite_energy,
            "dlr": cmd_dlr, "sample": cmd_sample, "verify-all": cmd_verify_all}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latticesfe", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=os.environ.get(ENV_PREFIX + "CONFIG"))
        sp.add_argument("--threads", type=int, default=int(os.environ.get(ENV_PREFIX + "THREADS", 1)))
        sp.add_argument("--out-dir", default=os.environ.get(ENV_PREFIX + "OUT_DIR", "out"))
        seed = os.environ.get(ENV_PREFIX + "SEED")
        sp.add_argument("--seed", type=int, default=int(seed) if seed is not None else None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    out_dir = Path(args.out_dir)
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.command == "verify-all":
            cfg = {"tolerances": dict(DEFAULT_TOL)}
        else:
            raise ConfigError("--config is required")
        seed = args.seed if args.seed is not None else cfg.get("seed")
        run = Run(out_dir, cfg, args.command, max(1, args.threads), seed)
        COMMANDS[args.command](run)
    except (ConfigError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CapacityError, AmbiguityError) as exc:
        print(f"capacity/ambiguity: {exc}", file=sys.stderr)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "failure.json").write_text(json.dumps({"kind": type(exc).__name__,
                                                          "message": str(exc)}) + "\n")
        return 3
    except (DomainError, OptimizationError) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "failure.json").write_text(json.dumps({"kind": type(exc).__name__,
                                                          "message": str(exc)}) + "\n")
        return 4
    failed = [r for r in run.invariants if not r["passed"]]
    code = 4 if failed else 0
    if failed:
        run.write_json("failure.json", {"failed": failed})
    run.manifest(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
