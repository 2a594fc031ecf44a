"""Command-line entry point: design, simulate and evaluate slow-time codes.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure
(a ``diagnostic.json`` is written to the output directory).
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import sys
import time
from dataclasses import asdict, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    Code,
    CodeSet,
    DesignConfig,
    SlowcodeError,
    ValidationError,
    ConfigError,
    deserialize_codebook,
    design_config_from_dict,
    load_json,
    random_code_set,
    random_unimodular_code,
    serialize_codebook,
)
from .fmcw_sim import (
    peak_table,
    range_doppler_map,
    scenario_from_dict,
    synthesize_samples,
    write_rd_binary,
    write_rd_csv,
)
from .metrics import RegionSpec, metric_report, write_cut_csv
from .mimo import build_split_operators, design_mimo
from .pcaf import objective_siso, pcaf_grid
from .siso import SisoDesignResult, design_siso, doppler_shift_pair

log = logging.getLogger("slowcode")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class UsageError(SlowcodeError):
    """Bad flag values that argparse cannot catch on its own."""


# --- manifest -------------------------------------------------------------


def git_blob_hash(data: bytes) -> str:
    """Content hash in the style of ``git hash-object``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Collects outputs of one command and writes its manifest."""

    def __init__(self, command: str, out: Path, inputs: Sequence[Path], argv: Sequence[str]):
        self.command = command
        self.out = out
        self.argv = list(argv)
        self.inputs = [Path(p) for p in inputs]
        self.outputs: list[Path] = []
        self.started = datetime.now(timezone.utc).isoformat()
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(p)
        return p

    def write_json(self, name: str, obj) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(obj, indent=2) + "\n")
        return p

    def finish(self, config: dict, seeds: Sequence[int]) -> Path:
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "config": config,
            "seeds": list(seeds),
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "inputs": [{"path": str(p), "git_blob": git_blob_hash(p.read_bytes())} for p in self.inputs],
            "outputs": [{"path": str(p), "sha256": sha256_file(p)} for p in self.outputs],
        }
        p = self.out / "manifest.json"
        p.write_text(json.dumps(manifest, indent=2) + "\n")
        return p


# --- helpers --------------------------------------------------------------


def _load_design_config(path: str) -> DesignConfig:
    return design_config_from_dict(load_json(path))


def _code_labels(sets: Sequence[CodeSet]) -> list[tuple[str, Code]]:
    out = []
    for si, s in enumerate(sets):
        base = s.label or f"set{si}"
        for i, c in enumerate(s.codes):
            out.append((f"{base}{i}", c))
    return out


def _design_meta(cfg: DesignConfig) -> dict:
    return {"p_max": cfg.p_max, "n_f": cfg.n_f}


def _pair_exports(run: Run, cfg: DesignConfig, pairs, region: RegionSpec) -> list[dict]:
    reports = []
    for (la, a), (lb, b) in pairs:
        grid = pcaf_grid(a, b, cfg.p_max, cfg.n_f)
        reg = region.with_mainlobe_excluded() if la == lb else region
        stem = f"{la}_{lb}"
        grid.to_csv(run.path(f"pcaf_{stem}.csv"), run.path(f"pcaf_{stem}_db.csv"))
        write_cut_csv(grid, run.path(f"cut_{stem}.csv"))
        reports.append(metric_report(grid, reg, [la, lb]))
    return reports


# --- commands -------------------------------------------------------------


def cmd_design_siso(args: argparse.Namespace) -> int:
    cfg = _load_design_config(args.config)
    if args.restarts < 1:
        raise UsageError("--restarts must be >= 1")
    run = Run("design-siso", Path(args.out), [Path(args.config)], args.argv)
    seeds = [cfg.seed + r for r in range(args.restarts)]
    if args.mode == "doppler":
        x, y = doppler_shift_pair(cfg.n_len)
        best = SisoDesignResult(x, y, (objective_siso(x, y, cfg),), 0, True)
        finals, seeds = [], []
    else:
        single = args.mode == "single-sided"
        results = []
        for seed in seeds:
            rng = np.random.default_rng(seed)
            x0 = random_unimodular_code(cfg.n_len, rng)
            y0 = Code(np.ones(cfg.n_len, dtype=complex)) if single else random_unimodular_code(cfg.n_len, rng)
            t0 = time.perf_counter()
            res = design_siso(replace(cfg, seed=seed), x0, y0, single_sided=single)
            log.info("restart seed=%d: J=%.6e after %d passes (%.1f s)", seed, res.final_objective,
                     res.outer_iters, time.perf_counter() - t0)
            results.append(res)
        finals = [r.final_objective for r in results]
        best = results[int(np.argmin(finals))]  # argmin keeps the first on ties
    sets = [CodeSet((best.x,), "x"), CodeSet((best.y,), "y")]
    serialize_codebook(sets, run.path("codebook.json"), _design_meta(cfg))
    doc = best.to_dict()
    doc.update(mode=args.mode, restart_finals=finals, restart_seeds=seeds)
    run.write_json("result.json", doc)
    grid = pcaf_grid(best.x, best.y, cfg.p_max, cfg.n_f)
    write_cut_csv(grid, run.path("cut.csv"))
    run.write_json("metrics.json", metric_report(grid, RegionSpec(lags=(0,)), ["x0", "y0"]))
    run.finish(asdict(cfg), seeds)
    return EXIT_OK


def cmd_design_mimo(args: argparse.Namespace) -> int:
    cfg = _load_design_config(args.config)
    if args.m < 1 or args.k < 1 or args.restarts < 1:
        raise UsageError("--m, --k and --restarts must be >= 1")
    inputs = [Path(args.config)]
    warm = None
    if args.warm_start:
        inputs.append(Path(args.warm_start))
        sets = deserialize_codebook(args.warm_start)
        if len(sets) != 2 or sets[0].count != args.m or sets[1].count != args.k:
            raise ConfigError(f"warm start must hold two sets of {args.m} and {args.k} codes")
        if sets[0].n_len != cfg.n_len:
            raise ConfigError(f"warm start codes have length {sets[0].n_len}, config says {cfg.n_len}")
        warm = sets
    run = Run("design-mimo", Path(args.out), inputs, args.argv)
    ops = build_split_operators(cfg)
    seeds = [cfg.seed + r for r in range(args.restarts)]
    results = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        if warm is None:
            X0 = random_code_set(args.m, cfg.n_len, rng, "X")
            Y0 = random_code_set(args.k, cfg.n_len, rng, "Y")
        else:
            X0, Y0 = warm
        t0 = time.perf_counter()
        res = design_mimo(replace(cfg, seed=seed), X0, Y0, ops=ops, rng=rng)
        log.info("restart seed=%d: surrogate=%.6e quartic=%.6e after %d passes (%.1f s)", seed,
                 res.surrogate_trace[-1], res.quartic_trace[-1], res.outer_iters, time.perf_counter() - t0)
        results.append(res)
    finals = [r.surrogate_trace[-1] for r in results]
    best = results[int(np.argmin(finals))]
    sets = [best.X, best.Y]
    serialize_codebook(sets, run.path("codebook.json"), _design_meta(cfg))
    doc = best.to_dict()
    doc.update(restart_finals=finals, restart_seeds=seeds, warm_start=args.warm_start)
    run.write_json("result.json", doc)
    pairs = list(itertools.combinations(_code_labels(sets), 2))
    reports = _pair_exports(run, cfg, pairs, RegionSpec())
    run.write_json("metrics.json", reports)
    run.finish(asdict(cfg), seeds)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    inputs = [Path(args.scenario)]
    x = y = None
    if args.codebook:
        inputs.append(Path(args.codebook))
        sets = deserialize_codebook(args.codebook)
        if len(sets) < 2:
            raise ConfigError("simulation codebook needs a victim set and an interferer set")
        x, y = sets[0].codes[0], sets[1].codes[0]
    sc, opts = scenario_from_dict(load_json(args.scenario), x, y)
    run = Run("simulate", Path(args.out), inputs, args.argv)
    samples = synthesize_samples(sc)
    rd = range_doppler_map(samples, sc.params, opts["pad_m"], opts["pad_n"], opts["window"])
    write_rd_csv(rd, run.path("rd.csv"))
    sidecar = write_rd_binary(rd, run.path("rd.bin"))
    run.outputs.append(sidecar)
    run.write_json("peaks.json", peak_table(rd, opts["peaks"]))
    config = {
        "params": asdict(sc.params),
        "emitters": [asdict(e) for e in sc.emitters],
        "coding": sc.coding,
        "noise_power": sc.noise_power,
        "include_noise": sc.include_noise,
        **opts,
    }
    run.finish(config, [sc.seed])
    return EXIT_OK


def parse_region(text: str, p_default: int) -> RegionSpec:
    """``zero-delay``, ``full`` or ``key=value`` items joined by ``;``.

    Keys: ``lags`` (``all``, ``a:b`` inclusive range, or comma list) and
    ``p_max`` (integer). Example: ``lags=-3:3;p_max=20``.
    """
    if text == "zero-delay":
        return RegionSpec(lags=(0,), p_max=p_default)
    if text == "full":
        return RegionSpec(p_max=p_default)
    lags, p_max = None, p_default
    for item in filter(None, text.split(";")):
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"bad region item {item!r}")
        key, val = key.strip(), val.strip()
        try:
            if key == "lags":
                if val == "all":
                    lags = None
                elif ":" in val:
                    lo, hi = (int(v) for v in val.split(":"))
                    lags = tuple(range(lo, hi + 1))
                else:
                    lags = tuple(int(v) for v in val.split(","))
            elif key == "p_max":
                p_max = int(val)
            else:
                raise UsageError(f"unknown region key {key!r}")
        except ValueError as exc:
            raise UsageError(f"bad region value in {item!r}") from exc
    if p_max > p_default:
        raise UsageError(f"region p_max {p_max} exceeds the design P={p_default}")
    return RegionSpec(lags=lags, p_max=p_max)


def cmd_evaluate(args: argparse.Namespace) -> int:
    path = Path(args.codebook)
    sets = deserialize_codebook(path)
    meta = load_json(path).get("design")
    if not isinstance(meta, dict) or "p_max" not in meta or "n_f" not in meta:
        raise ConfigError(f"{path}: codebook lacks the 'design' block with p_max and n_f")
    cfg = DesignConfig(sets[0].n_len, int(meta["p_max"]), int(meta["n_f"]))
    labelled = dict(_code_labels(sets))
    if args.pairs == "all":
        pairs = list(itertools.combinations(labelled.items(), 2))
    else:
        pairs = []
        for item in args.pairs.split(","):
            a, sep, b = item.partition(":")
            if not sep:
                raise UsageError(f"pair {item!r} is not of the form a:b")
            for lab in (a, b):
                if lab not in labelled:
                    raise UsageError(f"unknown code label {lab!r}; known: {sorted(labelled)}")
            pairs.append(((a, labelled[a]), (b, labelled[b])))
    region = parse_region(args.region, cfg.p_max)
    run = Run("evaluate", Path(args.out), [path], args.argv)
    reports = _pair_exports(run, cfg, pairs, region)
    run.write_json("metrics.json", reports)
    run.finish({"p_max": cfg.p_max, "n_f": cfg.n_f, "region": region.to_dict(), "pairs": args.pairs}, [])
    return EXIT_OK


# --- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slowcode", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="debug-level progress on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("design-siso", help="design a victim/interferer code pair")
    s.add_argument("config", help="design config JSON")
    s.add_argument("--mode", choices=["doppler", "optimize", "single-sided"], default="optimize")
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_design_siso)

    s = sub.add_parser("design-mimo", help="design two MIMO code sets")
    s.add_argument("config", help="design config JSON")
    s.add_argument("--m", type=int, required=True, help="codes in set X")
    s.add_argument("--k", type=int, required=True, help="codes in set Y")
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--warm-start", dest="warm_start", default=None, help="codebook to start from")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_design_mimo)

    s = sub.add_parser("simulate", help="synthesize samples and a range-Doppler map")
    s.add_argument("scenario", help="scenario JSON")
    s.add_argument("--codebook", default=None, help="codebook with victim set first, interferer set second")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("evaluate", help="PCAF metrics for stored codes")
    s.add_argument("codebook")
    s.add_argument("--pairs", default="all", help="'all' or a comma list like x0:y0,x0:x0")
    s.add_argument("--region", default="zero-delay", help="zero-delay, full, or 'lags=a:b;p_max=P'")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"slowcode: numerical failure: {exc}", file=sys.stderr)
        out = Path(getattr(args, "out", "."))
        out.mkdir(parents=True, exist_ok=True)
        diag = {"command": args.command, "error": type(exc).__name__, "message": str(exc), "argv": argv}
        (out / "diagnostic.json").write_text(json.dumps(diag, indent=2) + "\n")
        return EXIT_NUMERICAL
    except (ConfigError, UsageError, ValidationError, ValueError, FileNotFoundError) as exc:
        # ValueError also covers CodebookParseError and InvalidDimensionError.
        print(f"slowcode: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
