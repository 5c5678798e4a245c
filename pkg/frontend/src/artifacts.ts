/**
 * Readers for the artifacts a simulation run writes: the per-tick trace,
 * the wall-clock solve timings, and the exported road/obstacle geometry.
 * Format versions are checked here so the renderers can assume clean data.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";

export const SUPPORTED_TRACE_VERSION = 1;
export const SUPPORTED_GEOMETRY_VERSION = 1;

export class ArtifactError extends Error {}

export interface TraceRecord {
  time: number;
  vehicle: number;
  s: number;
  r: number;
  v: number;
  theta: number;
  k: number;
  a: number;
  kappa: number;
  e_s: number;
  e_r: number;
  e: number;
  x: number;
  y: number;
}

export interface Trace {
  scenario: string;
  formatVersion: number;
  aborted: string | null;
  records: TraceRecord[];
  vehicles: number[];
}

export interface TimingRecord {
  time: number;
  vehicle: number;
  solveMs: number;
}

export interface ObstacleGeometry {
  side: string;
  triangleXy: Array<[number, number]>;
  parabolaXy: Array<[number, number]>;
}

export interface Geometry {
  formatVersion: number;
  centerlineXy: Array<[number, number]>;
  leftBoundXy: Array<[number, number]>;
  rightBoundXy: Array<[number, number]>;
  obstacles: ObstacleGeometry[];
}

const NUMERIC_COLUMNS = [
  "time", "vehicle", "s", "r", "v", "theta", "k", "a", "kappa",
  "e_s", "e_r", "e", "x", "y",
] as const;

/** Parse the delimited trace; comment lines carry version and metadata. */
export function readTrace(path: string): Trace {
  const text = readFileSync(path, "utf8");
  let formatVersion: number | null = null;
  let scenario = "";
  let aborted: string | null = null;
  let header: string[] | null = null;
  const records: TraceRecord[] = [];
  for (const line of text.split("\n")) {
    if (!line.trim()) continue;
    if (line.startsWith("#")) {
      const body = line.slice(1).trim();
      if (body.startsWith("roadformation-trace")) {
        formatVersion = Number(body.split("format_version=")[1]);
      } else if (body.startsWith("scenario=")) {
        scenario = body.slice("scenario=".length);
      } else if (body.startsWith("aborted=")) {
        aborted = body.slice("aborted=".length);
      }
      continue;
    }
    if (header === null) {
      header = line.split(",");
      const missing = NUMERIC_COLUMNS.filter((c) => !header!.includes(c));
      if (missing.length) {
        throw new ArtifactError(`${path}: trace is missing columns: ${missing.join(", ")}`);
      }
      continue;
    }
    const parts = line.split(",");
    const row: Record<string, number> = {};
    for (const column of NUMERIC_COLUMNS) {
      row[column] = Number(parts[header.indexOf(column)]);
    }
    records.push(row as unknown as TraceRecord);
  }
  if (formatVersion === null) {
    throw new ArtifactError(`${path}: not a roadformation trace (no format header)`);
  }
  if (formatVersion !== SUPPORTED_TRACE_VERSION) {
    throw new ArtifactError(
      `${path}: unsupported trace format_version=${formatVersion} (supported: ${SUPPORTED_TRACE_VERSION})`,
    );
  }
  if (records.length === 0) {
    throw new ArtifactError(`${path}: trace contains no records`);
  }
  const vehicles = [...new Set(records.map((r) => r.vehicle))].sort((a, b) => a - b);
  return { scenario, formatVersion, aborted, records, vehicles };
}

export function readTimings(path: string): TimingRecord[] {
  const text = readFileSync(path, "utf8");
  const records: TimingRecord[] = [];
  let header: string[] | null = null;
  for (const line of text.split("\n")) {
    if (!line.trim() || line.startsWith("#")) continue;
    if (header === null) {
      header = line.split(",");
      for (const needed of ["time", "vehicle", "solve_ms"]) {
        if (!header.includes(needed)) {
          throw new ArtifactError(`${path}: timings file is missing column ${needed}`);
        }
      }
      continue;
    }
    const parts = line.split(",");
    records.push({
      time: Number(parts[header.indexOf("time")]),
      vehicle: Number(parts[header.indexOf("vehicle")]),
      solveMs: Number(parts[header.indexOf("solve_ms")]),
    });
  }
  return records;
}

export function readGeometry(path: string): Geometry {
  const raw = JSON.parse(readFileSync(path, "utf8"));
  if (raw.format_version !== SUPPORTED_GEOMETRY_VERSION) {
    throw new ArtifactError(
      `${path}: unsupported geometry format_version=${raw.format_version}`,
    );
  }
  return {
    formatVersion: raw.format_version,
    centerlineXy: raw.centerline_xy,
    leftBoundXy: raw.left_bound_xy,
    rightBoundXy: raw.right_bound_xy,
    obstacles: (raw.obstacles ?? []).map((o: any) => ({
      side: o.side,
      triangleXy: o.triangle_xy,
      parabolaXy: o.parabola_xy,
    })),
  };
}

export interface RunArtifacts {
  trace: Trace;
  geometry: Geometry;
  timings: TimingRecord[];
}

/** Load the standard artifact set from a run directory. */
export function readRun(runDir: string): RunArtifacts {
  return {
    trace: readTrace(join(runDir, "trace.csv")),
    geometry: readGeometry(join(runDir, "geometry.json")),
    timings: readTimings(join(runDir, "timings.csv")),
  };
}
