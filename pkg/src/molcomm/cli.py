"""Command-line entry point.

Subcommands::

    molcomm channel   build (or load) the P-vector and write the cache file
    molcomm code      build the LDPC code and write it as alist
    molcomm run       BER sweep for the configured scheme
    molcomm compare   single vs diversity and diversity vs pre-equalization sweeps
    molcomm schema    print the configuration JSON schema

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 construction failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import diffusion, harness, ldpc
from ._backend import BACKEND
from .errors import ConfigurationError, ConstructionError, ContractError, ParameterError
from .harness import BerCurve, BerPoint, SimConfig

logger = logging.getLogger("molcomm")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_CONSTRUCTION = 0, 2, 3, 4
CSV_HEADER = ["scheme", "mm", "frames", "bit_errors", "frame_errors", "ber", "fer", "stopped_by"]

_UNITS = {
    "total_time": "s", "diffusion_coeff": "um^2/s", "tx_distance": "um (centre to centre)",
    "receiver_radius": "um", "sim_step": "s", "slot_width": "s", "memory_duration": "s",
    "mm_sweep": "molecules per bit-1", "threshold": "molecules",
}


def config_schema() -> dict:
    """JSON schema of the flat configuration file."""
    props = {}
    defaults = SimConfig()
    for f in dataclasses.fields(SimConfig):
        base = f.type.replace(" | None", "") if isinstance(f.type, str) else f.type
        kind = {"int": "integer", "float": "number", "str": "string", "bool": "boolean",
                "tuple": "array"}.get(base, "string")
        entry = {"type": [kind, "null"] if "None" in str(f.type) else kind}
        if kind == "array":
            entry["items"] = {"type": "number", "minimum": 0}
        if f.name == "scheme":
            entry["enum"] = list(harness.SCHEMES)
        default = getattr(defaults, f.name)
        entry["default"] = list(default) if isinstance(default, tuple) else default
        if f.name in _UNITS:
            entry["description"] = f"unit: {_UNITS[f.name]}"
        props[f.name] = entry
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "molcomm simulation configuration",
        "type": "object",
        "additionalProperties": False,
        "properties": props,
    }


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        if "," in raw:
            return [float(v) for v in raw.split(",") if v.strip()]
        return raw


def parse_config(path=None, overrides=()) -> SimConfig:
    """Load a JSON config, apply ``key=value`` overrides and validate.

    Missing fields take their defaults, so ``{}`` is the reference setup.
    """
    data = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            data = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigurationError(
                f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: top level must be a JSON object")
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"override {item!r}: expected key=value")
        data[key.strip()] = _parse_value(raw.strip())
    try:
        return SimConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def _fmt(value: float) -> str:
    if value is None or not np.isfinite(value):
        return "nan"
    # fixed 10 significant digits, never scientific notation
    return np.format_float_positional(value, precision=10, unique=False, fractional=False,
                                      trim="k")


def _fmt_mm(value: float) -> str:
    return np.format_float_positional(float(value), trim="-")


def _sorted_curves(curves):
    return sorted(curves, key=lambda c: c.scheme)


def emit_csv(curves, path) -> Path:
    """One row per BER point, grouped by scheme, ascending molecule budget."""
    curves = list(curves)
    if not curves:
        raise ContractError("no curves to write")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for curve in _sorted_curves(curves):
            for p in sorted(curve.points, key=lambda p: p.mm):
                writer.writerow([curve.scheme, _fmt_mm(p.mm), p.frames, p.bit_errors,
                                 p.frame_errors, _fmt(p.ber), _fmt(p.fer), p.stopped_by])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def emit_plotdata(curves, path) -> Path:
    """Whitespace-separated ``mm ber`` blocks, one per scheme, blank-line separated."""
    curves = list(curves)
    if not curves:
        raise ContractError("no curves to write")
    blocks = []
    for curve in _sorted_curves(curves):
        rows = [f"# scheme {curve.scheme}"]
        rows += [f"{_fmt_mm(p.mm)} {_fmt(p.ber)}" for p in sorted(curve.points, key=lambda p: p.mm)]
        blocks.append("\n".join(rows))
    text = "# BER vs molecules per bit-1; plot both axes on log scale\n" + "\n\n".join(blocks) + "\n"
    path = Path(path)
    path.write_text(text)
    return path


@dataclass
class RunManifest:
    config_digest: str
    config: dict
    tool_version: str
    backend: str
    timestamp: str
    channel_file: str | None = None
    code_file: str | None = None
    outputs: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _short_hash(*parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()[:12]


def _ensure_channel_file(config: SimConfig, out: Path, workers: int) -> Path:
    """Path of a P-vector file for ``config``, simulating it if not cached."""
    params = config.channel_params
    if config.channel_file:
        path = Path(config.channel_file)
        if path.exists():
            return path
    else:
        source = "analytic" if config.analytic_channel else "particle"
        key = _short_hash(dataclasses.asdict(params), config.channel_seed,
                          config.bridge_correction, source)
        path = out / f"channel-{key}.txt"
        if path.exists():
            logger.info("reusing cached channel response %s", path)
            return path
    if config.analytic_channel:
        response = diffusion.analytic_channel_response(params)
    else:
        logger.info("simulating channel response with %d particles", params.n_particles)
        response = diffusion.simulate_channel_response(
            params, config.channel_seed, workers=workers,
            bridge_correction=config.bridge_correction)
    path.parent.mkdir(parents=True, exist_ok=True)
    diffusion.write_channel_file(path, response)
    return path


def _ensure_code_file(config: SimConfig, out: Path) -> Path:
    if config.code_file:
        path = Path(config.code_file)
        if path.exists():
            return path
    else:
        path = out / f"code-n{config.n}-k{config.k}-s{config.code_seed}.alist"
        if path.exists():
            return path
    code = ldpc.build_regular_code(config.n, config.k, config.code_seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    ldpc.write_alist(path, code.H)
    return path


def _resolve(args) -> tuple[SimConfig, Path]:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"master_seed={args.seed}")
    if args.analytic_channel:
        overrides.append("analytic_channel=true")
    if args.channel_file:
        overrides.append(f"channel_file={json.dumps(str(args.channel_file))}")
    if args.code_file:
        overrides.append(f"code_file={json.dumps(str(args.code_file))}")
    config = parse_config(args.config, overrides)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return config, out


def _pin_inputs(config: SimConfig, out: Path, workers: int) -> SimConfig:
    channel = _ensure_channel_file(config, out, workers)
    code = _ensure_code_file(config, out)
    return config.replace(channel_file=str(channel), code_file=str(code))


def _manifest(config: SimConfig, pinned: SimConfig) -> RunManifest:
    return RunManifest(
        config_digest=config.digest,
        config=config.to_dict(),
        tool_version=_version(),
        backend=BACKEND,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        channel_file=pinned.channel_file,
        code_file=pinned.code_file,
    )


def _describe(curve: BerCurve) -> dict:
    return {
        "metadata": curve.metadata,
        "raw_ber": [p.raw_ber for p in curve.points] if curve.scheme == "hard_threshold" else None,
    }


def cmd_channel(args) -> int:
    config, out = _resolve(args)
    path = _ensure_channel_file(config, out, args.workers)
    response = diffusion.read_channel_file(path, memory_duration=config.memory_duration)
    print(f"channel response written to {path}")
    for i, value in enumerate(response.p, start=1):
        print(f"P{i} = {value:.6f}")
    print(f"memory L = {response.memory} slots")
    return EXIT_OK


def cmd_code(args) -> int:
    config, out = _resolve(args)
    path = _ensure_code_file(config, out)
    code = ldpc.load_code(path)
    print(f"code written to {path}: n={code.n} k={code.k} four_cycles={code.metadata['four_cycles']}")
    return EXIT_OK


def _run_curves(configs: list[SimConfig], workers: int) -> list[BerCurve]:
    return [harness.run_sweep(cfg, workers=workers) for cfg in configs]


def cmd_run(args) -> int:
    config, out = _resolve(args)
    pinned = _pin_inputs(config, out, args.workers)
    curve = harness.run_sweep(pinned, workers=args.workers)
    curve.config_digest = config.digest
    manifest = _manifest(config, pinned)
    stem = f"ber_{config.scheme}"
    manifest.outputs = {
        "csv": str(emit_csv([curve], out / f"{stem}.csv")),
        "plotdata": str(emit_plotdata([curve], out / f"{stem}.dat")),
    }
    manifest.curves = {curve.scheme: _describe(curve)}
    manifest.write(out / "manifest.json")
    _print_curves([curve])
    return EXIT_OK


def cmd_compare(args) -> int:
    config, out = _resolve(args)
    pinned = _pin_inputs(config, out, args.workers)
    curves = {s: harness.run_sweep(pinned.replace(scheme=s), workers=args.workers)
              for s in ("single", "diversity", "preequalized")}
    for curve in curves.values():
        curve.config_digest = config.replace(scheme=curve.scheme).digest
    manifest = _manifest(config, pinned)
    for stem, schemes in (("single_vs_diversity", ("single", "diversity")),
                          ("diversity_vs_preequalized", ("diversity", "preequalized"))):
        chosen = [curves[s] for s in schemes]
        manifest.outputs[f"{stem}_csv"] = str(emit_csv(chosen, out / f"{stem}.csv"))
        manifest.outputs[f"{stem}_plotdata"] = str(emit_plotdata(chosen, out / f"{stem}.dat"))
    manifest.curves = {s: _describe(c) for s, c in curves.items()}
    manifest.write(out / "manifest.json")
    _print_curves(curves.values())
    return EXIT_OK


def cmd_schema(args) -> int:
    print(json.dumps(config_schema(), indent=2))
    return EXIT_OK


def _print_curves(curves) -> None:
    for curve in curves:
        print(f"[{curve.scheme}]")
        for p in curve.points:
            print(f"  mm={p.mm:<12.6g} frames={p.frames:<8d} ber={p.ber:.4e} fer={p.fer:.4e} "
                  f"({p.stopped_by})")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a configuration field (repeatable)")
    common.add_argument("--channel-file", type=Path, help="P-vector cache file (read or written)")
    common.add_argument("--code-file", type=Path, help="alist code file (read or written)")
    common.add_argument("--out", type=Path, default=Path("molcomm-out"), help="output directory")
    common.add_argument("--analytic-channel", action="store_true",
                        help="use the closed-form channel response instead of particle simulation")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--workers", type=int, default=1,
                        help="worker processes (results do not depend on this)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="molcomm", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_text in (
        ("channel", cmd_channel, "build and cache the channel response"),
        ("code", cmd_code, "build and cache the LDPC code"),
        ("run", cmd_run, "run a BER sweep"),
        ("compare", cmd_compare, "run the scheme comparison sweeps"),
        ("schema", cmd_schema, "print the configuration schema"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except ConstructionError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except (ConfigurationError, ParameterError, ContractError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
