"""Command-line entry point: fit, condition, sample, mode, synth, eval, serve.

Every subcommand is a thin wrapper over the library API so each CLI path can
be differentially tested against a direct call; the CLI adds only argument
parsing, file placement and exit-code mapping. All commands taking --seed are
bit-deterministic, and every output file is written atomically (temp file in
the target directory, then rename).

Exit codes: 0 success, 2 usage, 70 internal; library error classes map to the
stable codes in errors.EXIT_CODES and print one line ``error: <Class>: <msg>``
to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from pathlib import Path

from .benchmark import run_reconstruction_experiment
from .errors import ConjointError, FormatError, INTERNAL_EXIT, USAGE_EXIT, exit_code
from .meshdata import load_cohort
from .model import FitConfig, fit_joint_model
from .serialize import load_model, save_model
from .service import (
    build_condition_report,
    canonical_json,
    make_server,
    mode_report,
    resolve_assignments,
    sample_report,
)
from .specs import VariableSpec
from .synthetic import SyntheticConfig, indicator_specs_for, write_cohort

__all__ = ["main"]


def _atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_assignments(pairs: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise _Usage(f"--set expects name=value, got {pair!r}")
        out[name] = value
    return out


def _block_sigma(args: argparse.Namespace) -> dict[str, float]:
    return {
        "coordinate": args.sigma_shape,
        "feature": args.sigma_feature,
        "indicator": args.sigma_indicator,
    }


class _Usage(Exception):
    """Command-line usage error (exit 2)."""


def _load_indicator_specs(path: str | None, indicators_file: str) -> list[VariableSpec]:
    """Indicator specs from --specs, or specs.json next to the table, or default."""
    if path is None:
        sibling = Path(indicators_file).parent / "specs.json"
        if not sibling.is_file():
            from .synthetic import default_indicator_specs

            return list(default_indicator_specs())
        path = str(sibling)
    try:
        entries = json.loads(Path(path).read_text(encoding="utf-8"))
        return [VariableSpec.from_dict(e) for e in entries]
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise FormatError(f"{path}: cannot read indicator specs: {e}") from None


# ---------------------------------------------------------------------------
# subcommands


def _cmd_fit(args) -> int:
    specs = _load_indicator_specs(args.specs, args.indicators)
    cohort = load_cohort(args.meshes, args.indicators, specs)
    config = FitConfig(
        rankings=args.rankings, seed=args.seed, rank=args.rank, jitter=args.jitter
    )
    model = fit_joint_model(cohort.Y, cohort.specs, config)
    model = dataclasses.replace(
        model,
        metadata={
            **model.metadata,
            "topology_checksum": cohort.topology_checksum,
            "faces": cohort.faces.tolist(),
            "instance_ids": list(cohort.ids),
        },
    )
    save_model(model, args.out)
    lead = ", ".join(repr(float(v)) for v in model.latent.eigenvalues[:5])
    print(f"M={cohort.Y.shape[1]} d={model.dimension} r={model.rank}")
    print(f"leading eigenvalues: {lead}")
    print(f"model written to {args.out}")
    return 0


def _cmd_condition(args) -> int:
    if not args.set:
        raise _Usage("condition requires at least one --set name=value")
    model = load_model(args.model)
    assignments = resolve_assignments(model, _parse_assignments(args.set))
    report = build_condition_report(
        model,
        assignments=assignments,
        sigma=_block_sigma(args),
        samples=args.samples,
        modes=args.modes,
        bins=args.bins,
        seed=args.seed,
        rank=args.rank,
    )
    payload = canonical_json(report)
    if args.out:
        _atomic_write_bytes(args.out, payload)
        for name, value in sorted(report["prediction"]["indicators"].items()):
            print(f"{name} = {value!r} (stddev {report['stddev']['indicator'][name]!r})")
        print(f"report written to {args.out}")
    else:
        sys.stdout.write(payload.decode("utf-8"))
    return 0


def _cmd_sample(args) -> int:
    model = load_model(args.model)
    variables = args.vars.split(",") if args.vars else None
    report = sample_report(model, variables, n=args.n, seed=args.seed)
    names = report["variables"]
    lines = [",".join(names)]
    columns = [report["values"][v] for v in names]
    for i in range(report["n"]):
        lines.append(",".join(repr(col[i]) for col in columns))
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    if args.out:
        _atomic_write_bytes(args.out, payload)
        print(f"{report['n']} samples of {len(names)} variables written to {args.out}")
    else:
        sys.stdout.write(payload.decode("utf-8"))
    return 0


def _cmd_mode(args) -> int:
    model = load_model(args.model)
    report = mode_report(model, args.k, args.t)
    payload = canonical_json(report)
    if args.out:
        _atomic_write_bytes(args.out, payload)
        print(f"mode {args.k} at t={args.t} written to {args.out}")
    else:
        sys.stdout.write(payload.decode("utf-8"))
    return 0


def _cmd_synth(args) -> int:
    config = SyntheticConfig(
        instances=args.instances,
        vertices=args.vertices,
        factors=args.factors,
        seed=args.seed,
    )
    mesh_dir, table = write_cohort(config, args.out)
    specs_path = Path(args.out) / "specs.json"
    entries = [s.to_dict() for s in indicator_specs_for(config)]
    _atomic_write_bytes(
        specs_path, (json.dumps(entries, indent=1, sort_keys=True) + "\n").encode()
    )
    print(f"meshes: {mesh_dir}")
    print(f"indicators: {table}")
    print(f"specs: {specs_path}")
    print(f"M={config.instances} N={config.vertices} K={len(entries)}")
    return 0


def _cmd_eval(args) -> int:
    specs = _load_indicator_specs(args.specs, args.indicators)
    cohort = load_cohort(args.meshes, args.indicators, specs)
    config = FitConfig(
        rankings=args.rankings, seed=args.seed, rank=args.rank, jitter=args.jitter
    )
    report = run_reconstruction_experiment(
        cohort,
        train_count=args.train,
        config=config,
        sigma=_block_sigma(args),
        split_seed=args.seed,
    )
    sys.stdout.write(report.format_table())
    if args.out:
        _atomic_write_bytes(args.out, report.to_dsv().encode("utf-8"))
        print(f"report written to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    model = load_model(args.model)
    server = make_server(model, host=args.host, port=args.port, ui_dir=args.ui)
    host, port = server.server_address[:2]
    print(f"serving model {args.model} on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conjoint",
        description="Joint shape/feature/indicator model: fit, explore, benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_fit_flags(p):
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--rank", type=int, default=None)
        p.add_argument("--jitter", type=float, default=1e-6)
        p.add_argument("--rankings", type=int, default=50)

    def add_sigma_flags(p, default=0.0):
        p.add_argument("--sigma-shape", type=float, default=default)
        p.add_argument("--sigma-feature", type=float, default=default)
        p.add_argument("--sigma-indicator", type=float, default=default)

    p = sub.add_parser("fit", help="fit a model from a mesh cohort")
    p.add_argument("--meshes", required=True)
    p.add_argument("--indicators", required=True)
    p.add_argument("--specs", default=None, help="indicator specs JSON")
    p.add_argument("--out", required=True)
    add_fit_flags(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("condition", help="condition on name=value assignments")
    p.add_argument("--model", required=True)
    p.add_argument("--set", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--modes", type=int, default=5)
    p.add_argument("--bins", type=int, default=30)
    add_sigma_flags(p)
    p.set_defaults(func=_cmd_condition)

    p = sub.add_parser("sample", help="draw deterministic samples")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--vars", default=None, help="comma-separated variable names")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("mode", help="instance along a principal mode")
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_mode)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--out", required=True)
    p.add_argument("--instances", type=int, default=120)
    p.add_argument("--vertices", type=int, default=20)
    p.add_argument("--factors", type=int, default=3)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("eval", help="run the reconstruction benchmark")
    p.add_argument("--meshes", required=True)
    p.add_argument("--indicators", required=True)
    p.add_argument("--specs", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--train", type=int, default=None)
    add_fit_flags(p)
    add_sigma_flags(p, default=0.2)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="serve a model over HTTP")
    p.add_argument("--model", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", default=None, help="static directory for the browser client")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except _Usage as e:
        print(f"usage error: {e}", file=sys.stderr)
        return USAGE_EXIT
    except ConjointError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return exit_code(e)
    except BrokenPipeError:
        return 0
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return INTERNAL_EXIT


if __name__ == "__main__":
    sys.exit(main())
