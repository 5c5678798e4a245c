export { readRun, readTrace, readTimings, readGeometry, ArtifactError } from "./artifacts.js";
export { PANELS, RENDERERS } from "./panels.js";
export { render, parsePanels, PlotSpecError } from "./render.js";
export type { PlotSpec } from "./render.js";
