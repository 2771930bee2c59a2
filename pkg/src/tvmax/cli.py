"""Command-line interface: apply attention transforms to score grids.

Subcommands
-----------
transform   read a grid (CSV or JSON), write the distribution as JSON and
            optionally a PGM heatmap
vjp         backward pass: map an output cotangent to an input cotangent
check       certify the fast path against the reference solvers

Exit codes: 0 success, 1 check deviation above threshold, 2 malformed
input file, 3 invalid flag combination or shape mismatch, 4 numerical
failure.  Errors print one machine-parseable line to stderr of the form
``error: <category>: <detail>``.

All numbers are serialized with 17 significant digits so that emitted JSON
round-trips bit-exactly and repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .attention import extract_groups, fusedmax1d_forward, tvmax_forward, tvmax_vjp
from .exceptions import (
    InvalidInputError,
    InvalidParameterError,
    OracleUncertifiedError,
    TvmaxError,
    UnsupportedSizeError,
)
from .graph import FusionGraph
from .oracle import OracleConfig, oracle_constrained, subgradient_residual
from .simplex import softmax, softmax_vjp, sparsemax, sparsemax_vjp
from .tv import DEFAULT_MAX_ITER, DEFAULT_TOL

TRANSFORMS = ("softmax", "sparsemax", "fusedmax1d", "tvmax")
CHECK_DEVIATION_LIMIT = 1e-5

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_MALFORMED_INPUT = 2
EXIT_INVALID_FLAGS = 3
EXIT_NUMERICAL_FAILURE = 4


class CliError(Exception):
    def __init__(self, code: int, category: str, message: str):
        super().__init__(message)
        self.code = code
        self.category = category


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def format_number(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def dumps(obj) -> str:
    """Deterministic JSON with 17-significant-digit floats."""
    if isinstance(obj, dict):
        inner = ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    return format_number(obj)


def write_pgm(path: str, probabilities: np.ndarray) -> None:
    """Max-normalized ASCII PGM heatmap: 255 at the peak cell(s)."""
    rows, cols = probabilities.shape
    peak = float(probabilities.max())
    if peak > 0.0:
        pixels = np.rint(255.0 * probabilities / peak).astype(int)
    else:
        pixels = np.zeros((rows, cols), dtype=int)
    lines = ["P2", f"{cols} {rows}", "255"]
    for r in range(rows):
        lines.append(" ".join(str(int(v)) for v in pixels[r]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# input parsing
# ---------------------------------------------------------------------------

def _detect_format(path: str, explicit: str | None) -> str:
    if explicit:
        return explicit
    ext = os.path.splitext(path)[1].lower()
    if ext == ".csv":
        return "csv"
    if ext == ".json":
        return "json"
    raise CliError(
        EXIT_INVALID_FLAGS, "invalid-flags",
        f"cannot infer format from {path!r}; pass --format csv|json",
    )


def read_grid(path: str, fmt: str | None) -> np.ndarray:
    fmt = _detect_format(path, fmt)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(EXIT_MALFORMED_INPUT, "malformed-input", f"cannot read {path!r}: {exc}")
    if fmt == "csv":
        return _parse_csv(text, path)
    return _parse_json(text, path)


def _parse_csv(text: str, path: str) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(cell) for cell in line.split(",")])
        except ValueError:
            raise CliError(
                EXIT_MALFORMED_INPUT, "malformed-input",
                f"{path}:{lineno}: not a comma-separated row of numbers",
            )
    if not rows:
        raise CliError(EXIT_MALFORMED_INPUT, "malformed-input", f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise CliError(EXIT_MALFORMED_INPUT, "malformed-input", f"{path}: rows have unequal arity")
    grid = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(grid)):
        raise CliError(EXIT_MALFORMED_INPUT, "malformed-input", f"{path}: non-finite values")
    return grid


def _parse_json(text: str, path: str) -> np.ndarray:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_MALFORMED_INPUT, "malformed-input", f"{path}: invalid JSON ({exc.msg})")
    if not isinstance(payload, dict):
        raise CliError(EXIT_MALFORMED_INPUT, "malformed-input", f"{path}: expected a JSON object")
    try:
        rows = int(payload["rows"])
        cols = int(payload["cols"])
        data = payload["data"]
    except (KeyError, TypeError, ValueError):
        raise CliError(
            EXIT_MALFORMED_INPUT, "malformed-input",
            f"{path}: need integer 'rows', 'cols' and array 'data'",
        )
    if rows < 1 or cols < 1 or not isinstance(data, list) or len(data) != rows * cols:
        raise CliError(
            EXIT_MALFORMED_INPUT, "malformed-input",
            f"{path}: 'data' must hold rows*cols numbers",
        )
    try:
        grid = np.asarray([float(v) for v in data], dtype=np.float64).reshape(rows, cols)
    except (TypeError, ValueError):
        raise CliError(EXIT_MALFORMED_INPUT, "malformed-input", f"{path}: non-numeric data")
    if not np.all(np.isfinite(grid)):
        raise CliError(EXIT_MALFORMED_INPUT, "malformed-input", f"{path}: non-finite values")
    return grid


def _emit(payload: dict, output: str | None) -> None:
    text = dumps(payload) + "\n"
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _apply_transform(grid: np.ndarray, args):
    """Run the selected transform; returns (distribution, result_or_None)."""
    name = args.transform
    if name == "softmax":
        return softmax(grid), None
    if name == "sparsemax":
        return sparsemax(grid), None
    if name == "fusedmax1d":
        if min(grid.shape) != 1 and not args.flatten:
            raise CliError(
                EXIT_INVALID_FLAGS, "invalid-flags",
                "fusedmax1d needs a single-row or single-column grid, or --flatten",
            )
        result = fusedmax1d_forward(grid.ravel(), args.lam)
        return result.distribution.reshape(grid.shape), result
    result = tvmax_forward(grid, args.lam, tol=args.tol, max_iter=args.max_iter)
    return result.distribution, result


def cmd_transform(args) -> int:
    grid = read_grid(args.input, args.format)
    distribution, result = _apply_transform(grid, args)
    payload = {
        "rows": grid.shape[0],
        "cols": grid.shape[1],
        "data": list(distribution.ravel()),
        "transform": args.transform,
    }
    if args.transform in ("fusedmax1d", "tvmax"):
        payload["lambda"] = args.lam
    diagnostics = {
        "iterations": result.iterations if result is not None else 0,
        "residual": result.residual if result is not None else 0.0,
        "converged": result.converged if result is not None else True,
        "support_size": int(np.count_nonzero(distribution > 0.0)),
    }
    payload["diagnostics"] = diagnostics
    if args.groups:
        if result is not None:
            partition = result.partition
        else:
            partition = extract_groups(distribution, fuse_tol=0.0)
        payload["num_groups"] = partition.num_groups
        payload["group_ids"] = [int(v) for v in partition.labels.ravel()]
    _emit(payload, args.output)
    if args.heatmap:
        write_pgm(args.heatmap, distribution.reshape(grid.shape))
    return EXIT_OK


def cmd_vjp(args) -> int:
    grid = read_grid(args.input, args.format)
    cotangent = read_grid(args.cotangent, args.format_cotangent or args.format)
    if cotangent.shape != grid.shape:
        raise CliError(
            EXIT_INVALID_FLAGS, "invalid-flags",
            f"cotangent shape {cotangent.shape} does not match grid shape {grid.shape}",
        )
    distribution, result = _apply_transform(grid, args)
    if args.transform == "softmax":
        grad = softmax_vjp(distribution, cotangent)
    elif args.transform == "sparsemax":
        grad = sparsemax_vjp(distribution, cotangent)
    else:
        grad = tvmax_vjp(result, cotangent.reshape(result.distribution.shape))
        grad = grad.reshape(grid.shape)
    payload = {
        "rows": grid.shape[0],
        "cols": grid.shape[1],
        "data": list(np.asarray(grad).ravel()),
        "transform": args.transform,
    }
    if args.transform in ("fusedmax1d", "tvmax"):
        payload["lambda"] = args.lam
    _emit(payload, args.output)
    return EXIT_OK


def _oracle_config_from_env() -> OracleConfig:
    cfg = OracleConfig()
    budget = os.environ.get("TVMAX_ORACLE_ITERS")
    if budget:
        try:
            cfg.max_iterations = max(int(budget), 1)
        except ValueError:
            raise CliError(
                EXIT_INVALID_FLAGS, "invalid-flags",
                f"TVMAX_ORACLE_ITERS must be an integer, got {budget!r}",
            )
        cfg.fallback_iterations = min(cfg.fallback_iterations, cfg.max_iterations)
    return cfg


def cmd_check(args) -> int:
    grid = read_grid(args.input, args.format)
    cfg = _oracle_config_from_env()
    if grid.size > cfg.small_instance_limit:
        raise CliError(
            EXIT_INVALID_FLAGS, "invalid-flags",
            f"grid with {grid.size} cells exceeds the oracle limit {cfg.small_instance_limit}",
        )
    graph = FusionGraph.grid(*grid.shape)
    fast = tvmax_forward(grid, args.lam, tol=args.tol, max_iter=args.max_iter)
    reference = oracle_constrained(grid.ravel(), graph, args.lam, cfg)
    deviation = float(np.max(np.abs(fast.distribution.ravel() - reference)))
    report = subgradient_residual(grid.ravel(), fast.prox_w_star.ravel(), graph, args.lam)
    sys.stdout.write(f"deviation: {format_number(deviation)}\n")
    sys.stdout.write(f"kkt_residual: {format_number(report.kkt_residual)}\n")
    return EXIT_OK if deviation <= CHECK_DEVIATION_LIMIT else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvmax",
        description="Sparse and structured attention transforms over score grids.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_transform=True):
        p.add_argument("--input", required=True, help="grid file (CSV or JSON)")
        p.add_argument("--format", choices=("csv", "json"), default=None,
                       help="input format; default: inferred from the extension")
        if with_transform:
            p.add_argument("--transform", choices=TRANSFORMS, default="tvmax")
            p.add_argument("--flatten", action="store_true",
                           help="treat a multi-row grid as one chain (fusedmax1d)")
        p.add_argument("--lambda", dest="lam", type=float, default=0.01,
                       help="fusion strength (default 0.01)")
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
        p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)

    t = sub.add_parser("transform", help="apply a transform to a score grid")
    common(t)
    t.add_argument("--output", default=None, help="output JSON path (default stdout)")
    t.add_argument("--heatmap", default=None, help="optional PGM heatmap path")
    t.add_argument("--groups", action="store_true", help="include fused-group labels")
    t.set_defaults(func=cmd_transform)

    v = sub.add_parser("vjp", help="backward pass for a grid and a cotangent")
    common(v)
    v.add_argument("--cotangent", required=True, help="cotangent file, same shape as the grid")
    v.add_argument("--format-cotangent", choices=("csv", "json"), default=None)
    v.add_argument("--output", default=None)
    v.set_defaults(func=cmd_vjp)

    c = sub.add_parser("check", help="certify the fast path against the oracle")
    common(c, with_transform=False)
    c.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc.category}: {exc}\n")
        return exc.code
    except OracleUncertifiedError as exc:
        sys.stderr.write(f"error: numerical-failure: {exc}\n")
        return EXIT_NUMERICAL_FAILURE
    except (UnsupportedSizeError, InvalidParameterError) as exc:
        sys.stderr.write(f"error: invalid-flags: {exc}\n")
        return EXIT_INVALID_FLAGS
    except InvalidInputError as exc:
        sys.stderr.write(f"error: malformed-input: {exc}\n")
        return EXIT_MALFORMED_INPUT
    except TvmaxError as exc:
        sys.stderr.write(f"error: numerical-failure: {exc}\n")
        return EXIT_NUMERICAL_FAILURE


if __name__ == "__main__":
    sys.exit(main())
