#!/usr/bin/env node
/**
 * traceplot --run <run-dir> --out <dir> [--panels a,b,...] [--format svg]
 *
 * Renders plot panels from the artifacts a simulation run wrote
 * (trace.csv, geometry.json, timings.csv).
 */

import process from "node:process";

import { ArtifactError } from "./artifacts.js";
import { PANELS } from "./panels.js";
import { PlotSpecError, parsePanels, render } from "./render.js";

function usage(): string {
  return `usage: traceplot --run <run-dir> [--out <dir>] [--panels ${PANELS.join(",")}|all] [--format svg]`;
}

export function main(argv: string[]): number {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      console.error(usage());
      return 2;
    }
    args.set(key.slice(2), argv[i + 1]);
  }
  const runDir = args.get("run");
  if (!runDir) {
    console.error(usage());
    return 2;
  }
  try {
    const written = render({
      runDir,
      outDir: args.get("out") ?? runDir,
      panels: parsePanels(args.get("panels")),
      format: (args.get("format") ?? "svg") as "svg",
    });
    for (const path of written) console.log(path);
    return 0;
  } catch (err) {
    if (err instanceof ArtifactError || err instanceof PlotSpecError) {
      console.error(`traceplot: ${err.message}`);
      return 1;
    }
    if (err instanceof Error && "code" in err && (err as any).code === "ENOENT") {
      console.error(`traceplot: missing artifact: ${(err as any).path}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
