/**
 * The four panel renderers.  Each consumes run artifacts and returns one
 * SVG string; nothing here recomputes vehicle physics or road geometry.
 */

import { RunArtifacts, TraceRecord } from "./artifacts.js";
import { SvgDocument, dataExtent, legend, makeFrame, vehicleColor } from "./svg.js";

export const PANELS = ["trajectories", "speeds", "errors", "solvetimes"] as const;
export type PanelName = (typeof PANELS)[number];

const WIDTH = 860;
const HEIGHT = 460;

function byVehicle(records: TraceRecord[]): Map<number, TraceRecord[]> {
  const out = new Map<number, TraceRecord[]>();
  for (const rec of records) {
    const rows = out.get(rec.vehicle);
    if (rows) rows.push(rec);
    else out.set(rec.vehicle, [rec]);
  }
  return out;
}

export function renderTrajectories(run: RunArtifacts): string {
  const doc = new SvgDocument(WIDTH, HEIGHT);
  const { geometry, trace } = run;
  const xs: number[] = [];
  const ys: number[] = [];
  for (const poly of [geometry.leftBoundXy, geometry.rightBoundXy]) {
    for (const [x, y] of poly) {
      xs.push(x);
      ys.push(y);
    }
  }
  for (const rec of trace.records) {
    xs.push(rec.x);
    ys.push(rec.y);
  }
  const frame = makeFrame(
    doc,
    dataExtent(xs),
    dataExtent(ys),
    `${trace.scenario}: planar trajectories`,
    "x [m]",
    "y [m]",
  );
  const toPx = (pts: Array<[number, number]>): Array<[number, number]> =>
    pts.map(([x, y]) => [frame.x.map(x), frame.y.map(y)]);

  doc.polyline(toPx(geometry.leftBoundXy), "stroke:#444444;stroke-width:1.5");
  doc.polyline(toPx(geometry.rightBoundXy), "stroke:#444444;stroke-width:1.5");
  doc.polyline(toPx(geometry.centerlineXy), "stroke:#bbbbbb;stroke-width:1;stroke-dasharray:6 5");
  for (const obstacle of geometry.obstacles) {
    doc.polygon(toPx(obstacle.triangleXy), "fill:#f2b5a0;stroke:#9c4a2f;stroke-width:1");
    doc.polyline(toPx(obstacle.parabolaXy), "stroke:#9c4a2f;stroke-width:1.5;stroke-dasharray:4 3");
  }
  const groups = byVehicle(trace.records);
  for (const [vehicle, rows] of groups) {
    doc.polyline(
      toPx(rows.map((r) => [r.x, r.y] as [number, number])),
      `stroke:${vehicleColor(vehicle)};stroke-width:1.8`,
    );
  }
  legend(doc, frame, [...groups.keys()].map((v) => [`vehicle ${v}`, vehicleColor(v)]));
  return doc.render();
}

export function renderSpeeds(run: RunArtifacts): string {
  const doc = new SvgDocument(WIDTH, HEIGHT);
  const { trace } = run;
  const frame = makeFrame(
    doc,
    dataExtent(trace.records.map((r) => r.time)),
    dataExtent(trace.records.map((r) => r.v)),
    `${trace.scenario}: vehicle speeds`,
    "t [s]",
    "v [m/s]",
  );
  const groups = byVehicle(trace.records);
  for (const [vehicle, rows] of groups) {
    doc.polyline(
      rows.map((r) => [frame.x.map(r.time), frame.y.map(r.v)] as [number, number]),
      `stroke:${vehicleColor(vehicle)};stroke-width:1.5`,
    );
  }
  legend(doc, frame, [...groups.keys()].map((v) => [`vehicle ${v}`, vehicleColor(v)]));
  return doc.render();
}

export function renderErrors(run: RunArtifacts): string {
  const doc = new SvgDocument(WIDTH, HEIGHT);
  const { trace } = run;
  const followers = trace.records.filter((r) => r.vehicle !== 0);
  const rows = followers.length ? followers : trace.records;
  const frame = makeFrame(
    doc,
    dataExtent(rows.map((r) => r.time)),
    dataExtent(rows.map((r) => r.e)),
    `${trace.scenario}: formation error`,
    "t [s]",
    "e [m]",
  );
  const groups = byVehicle(rows);
  for (const [vehicle, vehicleRows] of groups) {
    doc.polyline(
      vehicleRows.map((r) => [frame.x.map(r.time), frame.y.map(r.e)] as [number, number]),
      `stroke:${vehicleColor(vehicle)};stroke-width:1.5`,
    );
  }
  legend(doc, frame, [...groups.keys()].map((v) => [`vehicle ${v}`, vehicleColor(v)]));
  return doc.render();
}

export function renderSolvetimes(run: RunArtifacts): string {
  const doc = new SvgDocument(WIDTH, HEIGHT);
  const { timings, trace } = run;
  const frame = makeFrame(
    doc,
    dataExtent(timings.map((r) => r.time)),
    dataExtent([0, ...timings.map((r) => r.solveMs)]),
    `${trace.scenario}: per-replan solve time`,
    "t [s]",
    "solve [ms]",
  );
  const groups = new Map<number, typeof timings>();
  for (const rec of timings) {
    const rows = groups.get(rec.vehicle);
    if (rows) rows.push(rec);
    else groups.set(rec.vehicle, [rec]);
  }
  for (const [vehicle, rows] of groups) {
    doc.polyline(
      rows.map((r) => [frame.x.map(r.time), frame.y.map(r.solveMs)] as [number, number]),
      `stroke:${vehicleColor(vehicle)};stroke-width:1.2`,
    );
  }
  legend(doc, frame, [...groups.keys()].map((v) => [`vehicle ${v}`, vehicleColor(v)]));
  return doc.render();
}

export const RENDERERS: Record<PanelName, (run: RunArtifacts) => string> = {
  trajectories: renderTrajectories,
  speeds: renderSpeeds,
  errors: renderErrors,
  solvetimes: renderSolvetimes,
};
