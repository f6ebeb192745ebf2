"""Command-line runner.

``nvgmi <experiment> --config cfg.yaml --out DIR`` writes the trace files,
``report.json`` and ``manifest.json`` into DIR.  ``nvgmi presets`` prints
the built-in catalog.  Exit status is 0 on success, 1 on a model or fit
failure and 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from . import presets as P
from .config import EXPERIMENTS, load_config
from .errors import ConfigError, NvGmiError

EXIT_OK, EXIT_MODEL, EXIT_CONFIG = 0, 1, 2


def _serialize(table, fmt):
    if fmt == "csv":
        return table.to_csv()
    if hasattr(table, "to_json"):
        return table.to_json()
    from .experiments import report_json

    return report_json(table.to_document())


def write_outputs(result, cfg, out_dir: Path, fmt="csv") -> dict:
    """Write tables, report and manifest; return the manifest document."""
    from .experiments import report_json

    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, table in result.tables.items():
        fname = f"{name}.{fmt}"
        files[fname] = _serialize(table, fmt)
    files["report.json"] = report_json({"experiment": result.experiment, **result.report})
    hashes = {}
    for fname in sorted(files):
        data = files[fname].encode()
        (out_dir / fname).write_bytes(data)
        hashes[fname] = hashlib.sha256(data).hexdigest()
    manifest = {
        "experiment": result.experiment,
        "config_sha256": cfg.source_sha256,
        "seed": cfg.seed,
        "presets": dict(cfg.presets),
        "software": "nvgmi",
        "version": __version__,
        "format": fmt,
        "files": hashes,
    }
    (out_dir / "manifest.json").write_bytes((json.dumps(manifest, sort_keys=True, indent=1) + "\n").encode())
    return manifest


def _parser():
    ap = argparse.ArgumentParser(prog="nvgmi", description="NV-GMI hybrid magnetometer simulator")
    ap.add_argument("--version", action="version", version=f"nvgmi {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENTS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", required=True, type=Path, help="YAML experiment config")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: config 'output' or ./out-<kind>)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    p = sub.add_parser("presets", help="list built-in presets")
    p.add_argument("--format", choices=("text", "json"), default="text")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "presets":
        sys.stdout.write(P.catalog_json() if args.format == "json" else P.format_catalog())
        return EXIT_OK
    try:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {args.config}: {exc.strerror}") from exc
        cfg = load_config(text, seed_override=args.seed)
        if cfg.experiment != args.command:
            raise ConfigError("experiment", f"config is for {cfg.experiment!r}, not {args.command!r}")
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
    except ConfigError as exc:
        print(f"nvgmi: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from .experiments import run_experiment

    try:
        result = run_experiment(cfg, args.threads)
    except ConfigError as exc:
        print(f"nvgmi: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NvGmiError as exc:
        tb = exc.__traceback__
        while tb.tb_next is not None:
            tb = tb.tb_next
        where = f"{tb.tb_frame.f_globals.get('__name__', '?')}.{tb.tb_frame.f_code.co_name}"
        print(f"nvgmi: {args.command} failed in {where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    out = args.out or Path(cfg.output or f"out-{args.command}")
    manifest = write_outputs(result, cfg, out, args.format)
    print(f"wrote {len(manifest['files']) + 1} files to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
