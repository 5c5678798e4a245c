/** Plot-spec orchestration: which panels, where to write, in what format. */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { readRun } from "./artifacts.js";
import { PANELS, PanelName, RENDERERS } from "./panels.js";

export interface PlotSpec {
  runDir: string;
  outDir: string;
  panels: PanelName[];
  format: "svg";
}

export class PlotSpecError extends Error {}

export function parsePanels(value: string | undefined): PanelName[] {
  if (!value || value === "all") return [...PANELS];
  const requested = value.split(",").map((p) => p.trim()) as PanelName[];
  for (const panel of requested) {
    if (!PANELS.includes(panel)) {
      throw new PlotSpecError(`unknown panel ${panel}; choose from ${PANELS.join(", ")}`);
    }
  }
  return requested;
}

/** Render every requested panel; returns the written file paths. */
export function render(spec: PlotSpec): string[] {
  if (spec.format !== "svg") {
    throw new PlotSpecError(`unsupported image format ${spec.format}; only svg is produced`);
  }
  const run = readRun(spec.runDir);
  mkdirSync(spec.outDir, { recursive: true });
  const written: string[] = [];
  for (const panel of spec.panels) {
    const svg = RENDERERS[panel](run);
    const path = join(spec.outDir, `${panel}.svg`);
    writeFileSync(path, svg);
    written.push(path);
  }
  return written;
}
