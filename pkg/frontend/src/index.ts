/**
 * Array-in/array-out bindings for the tvmax attention transforms.
 *
 * Every function delegates to the `tvmax` command-line tool over its JSON
 * file interface; no numerics are re-implemented here.  Shapes and
 * semantics match the primary library exactly, and primary-library errors
 * surface as thrown `Error`s carrying the same message text.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Must match the primary library's version string. */
export const VERSION = "0.1.0";

export interface BoundGrid {
  readonly rows: number;
  readonly cols: number;
  /** Row-major cell values; length must equal rows * cols. */
  readonly data: readonly number[] | Float64Array;
}

export interface TvmaxDiagnostics {
  readonly iterations: number;
  readonly residual: number;
  readonly converged: boolean;
  readonly supportSize: number;
}

export interface TvmaxOutput {
  readonly distribution: number[];
  readonly diagnostics: TvmaxDiagnostics;
  /** Opaque handle for the backward pass. */
  readonly handle: TvmaxHandle;
}

/**
 * Opaque forward-pass handle: carries everything the backward pass needs
 * (the input grid and the transform parameters), mirroring the primary
 * API's forward/backward split.
 */
export class TvmaxHandle {
  constructor(
    readonly grid: BoundGrid,
    readonly lam: number,
    readonly tol: number,
    readonly maxIter: number,
  ) {}
}

function validateGrid(grid: BoundGrid, name: string): void {
  if (!Number.isInteger(grid.rows) || !Number.isInteger(grid.cols) || grid.rows < 1 || grid.cols < 1) {
    throw new Error(`${name} must declare positive integer rows and cols`);
  }
  if (!Array.isArray(grid.data) && !ArrayBuffer.isView(grid.data)) {
    throw new Error(`${name}.data must be an array of numbers`);
  }
  if (grid.data.length !== grid.rows * grid.cols) {
    throw new Error(
      `${name}.data has length ${grid.data.length}, expected rows*cols = ${grid.rows * grid.cols}`,
    );
  }
  for (const value of grid.data) {
    if (typeof value !== "number" || !Number.isFinite(value)) {
      throw new Error(`${name} must be finite (no NaN or Inf)`);
    }
  }
}

function cliCommand(): string[] {
  const override = process.env.TVMAX_CLI;
  if (override && override.trim().length > 0) {
    return override.trim().split(/\s+/);
  }
  return ["tvmax"];
}

function runCli(args: string[]): string {
  let command = cliCommand();
  let proc = spawnSync(command[0], [...command.slice(1), ...args], { encoding: "utf8" });
  if (proc.error && (proc.error as NodeJS.ErrnoException).code === "ENOENT" && !process.env.TVMAX_CLI) {
    command = ["python3", "-m", "tvmax"];
    proc = spawnSync(command[0], [...command.slice(1), ...args], { encoding: "utf8" });
  }
  if (proc.error) {
    throw new Error(`failed to launch the tvmax CLI (${command.join(" ")}): ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    // CLI errors are one line: "error: <category>: <message>"
    const line = (proc.stderr ?? "").trim().split("\n")[0] ?? "";
    const match = line.match(/^error: [^:]+: (.*)$/);
    throw new Error(match ? match[1] : `tvmax CLI exited with code ${proc.status}: ${line}`);
  }
  return proc.stdout;
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "tvmax-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

function writeGridFile(dir: string, name: string, grid: BoundGrid): string {
  const path = join(dir, name);
  // Array.from keeps typed-array inputs from serializing as objects
  writeFileSync(
    path,
    JSON.stringify({ rows: grid.rows, cols: grid.cols, data: Array.from(grid.data) }),
  );
  return path;
}

interface CliTransformPayload {
  rows: number;
  cols: number;
  data: number[];
  diagnostics?: {
    iterations: number;
    residual: number;
    converged: boolean;
    support_size: number;
  };
}

/** TVmax transform of a 2D score grid; lam = 0 recovers sparsemax exactly. */
export function boundTvmax(
  grid: BoundGrid,
  lam = 0.01,
  tol = 1e-7,
  maxIter = 100,
): TvmaxOutput {
  validateGrid(grid, "grid");
  const payload = withTempDir((dir) => {
    const input = writeGridFile(dir, "grid.json", grid);
    const stdout = runCli([
      "transform",
      "--input", input,
      "--format", "json",
      "--transform", "tvmax",
      "--lambda", String(lam),
      "--tol", String(tol),
      "--max-iter", String(maxIter),
    ]);
    return JSON.parse(stdout) as CliTransformPayload;
  });
  const diag = payload.diagnostics;
  return {
    distribution: payload.data,
    diagnostics: {
      iterations: diag?.iterations ?? 0,
      residual: diag?.residual ?? 0,
      converged: diag?.converged ?? true,
      supportSize: diag?.support_size ?? 0,
    },
    handle: new TvmaxHandle(grid, lam, tol, maxIter),
  };
}

/** Euclidean projection of a score vector onto the probability simplex. */
export function boundSparsemax(values: readonly number[] | Float64Array): number[] {
  const grid: BoundGrid = { rows: 1, cols: values.length, data: values };
  validateGrid(grid, "values");
  return withTempDir((dir) => {
    const input = writeGridFile(dir, "vector.json", grid);
    const stdout = runCli([
      "transform",
      "--input", input,
      "--format", "json",
      "--transform", "sparsemax",
    ]);
    return (JSON.parse(stdout) as CliTransformPayload).data;
  });
}

/** Backward pass: map an output cotangent through the cached forward pass. */
export function boundTvmaxVjp(
  handle: TvmaxHandle,
  cotangent: readonly number[] | Float64Array,
): number[] {
  if (!(handle instanceof TvmaxHandle)) {
    throw new Error("handle must come from boundTvmax");
  }
  const cotangentGrid: BoundGrid = {
    rows: handle.grid.rows,
    cols: handle.grid.cols,
    data: cotangent,
  };
  validateGrid(cotangentGrid, "cotangent");
  return withTempDir((dir) => {
    const input = writeGridFile(dir, "grid.json", handle.grid);
    const cot = writeGridFile(dir, "cotangent.json", cotangentGrid);
    const stdout = runCli([
      "vjp",
      "--input", input,
      "--format", "json",
      "--cotangent", cot,
      "--transform", "tvmax",
      "--lambda", String(handle.lam),
      "--tol", String(handle.tol),
      "--max-iter", String(handle.maxIter),
    ]);
    return (JSON.parse(stdout) as CliTransformPayload).data;
  });
}

/** Version string reported by the primary library's CLI. */
export function primaryVersion(): string {
  const parts = runCli(["--version"]).trim().split(/\s+/);
  return parts[parts.length - 1];
}
