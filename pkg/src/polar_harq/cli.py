"""Command-line front end: FER sweeps, single sessions, cost reports and self-checks.

Configuration is a flat YAML mapping with a ``schema_version`` key.  Command
line flags and ``--set key=value`` pairs override file values.

Exit codes: 0 ok, 1 usage error, 2 self-check failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import channel_sim as cs
from . import complexity_model as cm
from .polar_core import CodeConfig, encode
from .scl_decoder import QuantSpec

log = logging.getLogger("polar_harq")

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_RUNTIME = 0, 1, 2, 3
SCHEMA_VERSION = 1
MODES = ("fer_sweep", "single_session", "complexity_report", "self_check")
WORKER_CAP_ENV = "POLAR_HARQ_MAX_WORKERS"


class UsageError(Exception):
    pass


# key -> (type, default); lists are written as YAML sequences
_SCHEMA = {
    "schema_version": (int, SCHEMA_VERSION),
    "mode": (str, "self_check"),
    "N": (int, 256),
    "k": (int, 128),
    "crc_len": (int, 8),
    "design_snr_db": (float, 2.0),
    "schedule": (list, None),
    "list_size": (int, 8),
    "quantized": (bool, True),
    "Qe": (int, 5),
    "Qi": (int, 8),
    "Qm": (int, 11),
    "llr_scale": (float, 2.0),
    "crc_select": (bool, True),
    "min_node_size": (int, 1),
    "esn0_db": (list, [0.0]),
    "frames": (int, 1000),
    "stop_errors": (int, None),
    "stop_tx": (int, None),
    "batch_size": (int, 50),
    "seed": (int, 0),
    "workers": (int, None),
    "output": (str, None),
    "preset": (str, "n1024"),
    "L_a": (int, 4),
    "N_v": (int, 16),
    "sp": (int, 1),
}


@dataclass
class RunSpec:
    mode: str
    code: CodeConfig
    schedule: tuple
    decoder: cs.DecoderConfig
    snr_grid: list
    frames: int
    seed: int
    stop_errors: int | None
    stop_tx: int | None
    batch_size: int
    workers: int
    output_path: str | None
    report: dict = field(default_factory=dict)


def _coerce(key, value, where):
    typ = _SCHEMA[key][0]
    if value is None:
        return None
    if typ is list:
        if key == "esn0_db":
            value = value if isinstance(value, list) else [value]
            return [_coerce_scalar(float, v, f"{where} ({key})") for v in value]
        if not isinstance(value, list):
            raise UsageError(f"{where}: {key} must be a list")
        return [_coerce_scalar(int, v, f"{where} ({key})") for v in value]
    return _coerce_scalar(typ, value, f"{where}: {key}")


def _coerce_scalar(typ, value, where):
    if typ is bool:
        if not isinstance(value, bool):
            raise UsageError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(value, (list, dict)) or (typ is not str and isinstance(value, bool)):
        raise UsageError(f"{where}: expected {typ.__name__}, got {value!r}")
    try:
        if typ is int and isinstance(value, float) and not value.is_integer():
            raise ValueError
        return typ(value)
    except (TypeError, ValueError):
        raise UsageError(f"{where}: expected {typ.__name__}, got {value!r}") from None


def load_config(text: str, source: str = "<config>") -> dict:
    """Parse a flat YAML mapping, reporting the line of any bad field."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise UsageError(f"{source}: not valid YAML: {exc}") from None
    if root is None:
        return {}
    if not isinstance(root, yaml.MappingNode):
        raise UsageError(f"{source}: top level must be a key/value mapping")
    out = {}
    for knode, vnode in root.value:
        where = f"{source}:{knode.start_mark.line + 1}"
        key = knode.value
        if key not in _SCHEMA:
            raise UsageError(f"{where}: unknown field {key!r}")
        if isinstance(vnode, yaml.MappingNode):
            raise UsageError(f"{where}: field {key!r} must not be a nested mapping")
        value = yaml.safe_load(yaml.serialize(vnode))
        out[key] = _coerce(key, value, where)
    version = out.get("schema_version")
    if version is None:
        raise UsageError(f"{source}: missing schema_version")
    if version != SCHEMA_VERSION:
        raise UsageError(f"{source}: unsupported schema_version {version}")
    return out


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in _SCHEMA:
            raise UsageError(f"--set: unknown field {key!r}")
        out[key] = _coerce(key, yaml.safe_load(raw), "--set")
    return out


def _worker_count(requested: int | None) -> int:
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(WORKER_CAP_ENV)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise UsageError(f"{WORKER_CAP_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def build_spec(values: dict) -> RunSpec:
    v = {k: d for k, (_, d) in _SCHEMA.items()}
    v.update(values)
    if v["mode"] not in MODES:
        raise UsageError(f"mode must be one of {', '.join(MODES)}, got {v['mode']!r}")
    try:
        code = CodeConfig.for_length(v["N"], v["k"], v["crc_len"], v["design_snr_db"])
        quant = QuantSpec(v["Qe"], v["Qi"], v["Qm"], v["llr_scale"]) if v["quantized"] else None
        dec = cs.DecoderConfig(v["list_size"], quant, v["min_node_size"], v["crc_select"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    schedule = tuple(v["schedule"] or (v["N"],))
    if schedule[0] != v["N"]:
        raise UsageError("schedule must start with N")
    if v["mode"] == "fer_sweep" and not v["esn0_db"]:
        raise UsageError("fer_sweep needs at least one esn0_db point")
    if v["frames"] < 1:
        raise UsageError("frames must be >= 1")
    report = {"preset": v["preset"], "L_a": v["L_a"], "N_v": v["N_v"], "sp": v["sp"]}
    if "preset" not in values:
        report["params"] = dict(N=v["N"], L=v["list_size"], Qe=v["Qe"], Qi=v["Qi"], Qm=v["Qm"])
    return RunSpec(v["mode"], code, schedule, dec, list(v["esn0_db"]), v["frames"], v["seed"],
                   v["stop_errors"], v["stop_tx"], v["batch_size"], _worker_count(v["workers"]),
                   v["output"], report)


# --------------------------------------------------------------------------- modes

def _session_cfg(spec: RunSpec, esn0: float, point: int) -> cs.SessionConfig:
    try:
        return cs.SessionConfig(esn0, spec.schedule, spec.seed, spec.frames, spec.stop_errors,
                                None, spec.stop_tx, spec.batch_size, point)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def run_fer_sweep(spec: RunSpec, out=sys.stdout) -> int:
    rows, status = [], EXIT_OK
    cfgs = [_session_cfg(spec, esn0, i) for i, esn0 in enumerate(spec.snr_grid)]
    for cfg in cfgs:
        try:
            res = cs.run_harq_session(cfg, spec.code, spec.decoder, workers=spec.workers)
        except Exception as exc:  # worker crash or decoder fault
            log.error("point %s dB failed: %s", cfg.esn0_db, exc)
            status = EXIT_RUNTIME
            break
        rows.extend(cs.fer_rows(cfg.esn0_db, spec.code, cfg, res))
        log.info("Es/N0 %g dB: %d frames, errors per tx %s", cfg.esn0_db, res.frames,
                 res.errors.tolist())
    truncated = status != EXIT_OK
    if spec.output_path:
        cs.write_fer_csv(rows, spec.output_path, truncated)
    else:
        w = csv.DictWriter(out, fieldnames=cs.CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        if truncated:
            out.write(cs.TRUNCATION_MARKER + "\n")
    return status


def run_single_session(spec: RunSpec, out=sys.stdout) -> int:
    cfg = _session_cfg(spec, spec.snr_grid[0], 0)
    res = cs.run_harq_session(cfg, spec.code, spec.decoder, workers=spec.workers)
    for row in cs.fer_rows(cfg.esn0_db, spec.code, cfg, res):
        out.write(f"tx {row['tx_index']}: rate {row['rate']} errors {row['errors']}/"
                  f"{row['frames']} fer {row['fer']} +/- {row['ci_halfwidth']}\n")
    out.write(f"average transmissions per frame: {res.avg_transmissions:.4f}\n")
    out.write(f"undetected errors: {res.undetected}\n")
    if spec.output_path:
        cs.write_fer_csv(cs.fer_rows(cfg.esn0_db, spec.code, cfg, res), spec.output_path)
    return EXIT_OK


def run_complexity_report(spec: RunSpec, out=sys.stdout) -> int:
    r = spec.report
    params = r.get("params")
    if params is None:
        if r["preset"] not in cm.PRESETS:
            raise UsageError(f"unknown preset {r['preset']!r}; choose {', '.join(cm.PRESETS)}")
        params = cm.PRESETS[r["preset"]]
    try:
        rows = cm.complexity_report(**params, N_v=r["N_v"], L_a=r["L_a"], sp=r["sp"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out.write(cm.format_table(rows))
    if spec.output_path:
        with open(spec.output_path, "w", newline="") as fh:
            fh.write(cm.report_csv(rows))
    return EXIT_OK


def self_check_results() -> list[tuple[str, bool]]:
    """Built-in checks of the reference constants."""
    from .nodes import NodeKind
    from .scl_decoder import base_candidates, shifted_candidates

    checks = []
    p1, p2 = cm.PRESETS["n1024"], cm.PRESETS["n8192"]
    checks.append(("memory n=1024 totals 72712 / 19456 bits",
                   cm.mem_scl(**p1) == 72712 and cm.memory_overhead(p1["N"], p1["L"]) == 19456))
    checks.append(("memory overhead n=1024 rounds to 27%",
                   round(100 * cm.overhead_ratio(**p1)) == 27))
    checks.append(("memory overhead n=8192 rounds to 25%",
                   round(100 * cm.overhead_ratio(**p2)) == 25))
    pc = np.zeros(16, dtype=np.uint8)
    pc[1] = 1
    shift = encode(pc)
    cands = {"".join(map(str, c)) for c in shifted_candidates(base_candidates(NodeKind.REP, 16), shift)}
    checks.append(("REP-16 PC ascent gives 1100000000000000",
                   "".join(map(str, shift)) == "1100000000000000"))
    checks.append(("REP-16 shifted candidates",
                   cands == {"0011111111111111", "1100000000000000"}))
    return checks


def run_self_check(spec: RunSpec | None = None, out=sys.stdout) -> int:
    status = EXIT_OK
    for name, ok in self_check_results():
        out.write(f"{'PASS' if ok else 'FAIL'}  {name}\n")
        status = status if ok else EXIT_CHECK
    return status


RUNNERS = {
    "fer_sweep": run_fer_sweep,
    "single_session": run_single_session,
    "complexity_report": run_complexity_report,
    "self_check": run_self_check,
}


def run(spec: RunSpec, out=None) -> int:
    return RUNNERS[spec.mode](spec, sys.stdout if out is None else out)


# --------------------------------------------------------------------------- entry point

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polar-harq", description=__doc__.splitlines()[0])
    p.add_argument("config", nargs="?", help="YAML run configuration")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--esn0", help="comma-separated Es/N0 points in dB")
    p.add_argument("--output", help="CSV output path")
    p.add_argument("--workers", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                   help="override a config field (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        values = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    values = load_config(fh.read(), args.config)
            except OSError as exc:
                raise UsageError(f"cannot read {args.config}: {exc.strerror}") from None
        values.update(_parse_set(args.set))
        for key, val in (("mode", args.mode), ("seed", args.seed), ("frames", args.frames),
                         ("output", args.output), ("workers", args.workers)):
            if val is not None:
                values[key] = val
        if args.esn0 is not None:
            try:
                values["esn0_db"] = [float(x) for x in args.esn0.split(",") if x.strip()]
            except ValueError:
                raise UsageError(f"--esn0: not a list of numbers: {args.esn0!r}") from None
        spec = build_spec(values)
        return run(spec)
    except UsageError as exc:
        print(f"polar-harq: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"polar-harq: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
