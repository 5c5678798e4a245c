/**
 * Minimal deterministic SVG assembly: fixed-precision coordinates, no
 * timestamps, insertion-ordered elements, so repeated renders of the same
 * inputs are byte-identical.
 */

export interface Extent {
  min: number;
  max: number;
}

export function dataExtent(values: number[], pad = 0.05): Extent {
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (Number.isFinite(v)) {
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  if (!Number.isFinite(min)) {
    min = 0;
    max = 1;
  }
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  const span = max - min;
  return { min: min - pad * span, max: max + pad * span };
}

export class LinearScale {
  constructor(
    readonly domain: Extent,
    readonly range: [number, number],
  ) {}

  map(value: number): number {
    const t = (value - this.domain.min) / (this.domain.max - this.domain.min);
    return this.range[0] + t * (this.range[1] - this.range[0]);
  }

  /** Round tick positions at a step of 1/2/5 x 10^n covering the domain. */
  ticks(target = 6): number[] {
    const span = this.domain.max - this.domain.min;
    const rawStep = span / Math.max(target, 2);
    const power = Math.floor(Math.log10(rawStep));
    const base = 10 ** power;
    let step = base;
    for (const mult of [1, 2, 5, 10]) {
      if (mult * base >= rawStep) {
        step = mult * base;
        break;
      }
    }
    const first = Math.ceil(this.domain.min / step) * step;
    const out: number[] = [];
    for (let v = first; v <= this.domain.max + 1e-12; v += step) {
      out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
    }
    return out;
  }
}

export const fmt = (v: number): string => {
  const rounded = Number(v.toFixed(2));
  return Object.is(rounded, -0) ? "0" : String(rounded);
};

export const tickLabel = (v: number): string => {
  const rounded = Number(v.toPrecision(6));
  return Object.is(rounded, -0) ? "0" : String(rounded);
};

export const VEHICLE_COLORS = ["#1f6f8b", "#d1495b", "#2e933c", "#8f2d56", "#e09f3e", "#54478c"];

export function vehicleColor(vehicle: number): string {
  return VEHICLE_COLORS[vehicle % VEHICLE_COLORS.length];
}

export class SvgDocument {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  push(element: string): void {
    this.parts.push(element);
  }

  polyline(points: Array<[number, number]>, style: string): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(`<polyline points="${pts}" style="${style}" fill="none"/>`);
  }

  polygon(points: Array<[number, number]>, style: string): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(`<polygon points="${pts}" style="${style}"/>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, style: string): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" style="${style}"/>`,
    );
  }

  text(x: number, y: number, content: string, style: string): void {
    this.parts.push(`<text x="${fmt(x)}" y="${fmt(y)}" style="${style}">${content}</text>`);
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect width="${this.width}" height="${this.height}" fill="#ffffff"/>`,
      ...this.parts,
      `</svg>`,
      ``,
    ].join("\n");
  }
}

export interface Frame {
  x: LinearScale;
  y: LinearScale;
  plotLeft: number;
  plotRight: number;
  plotTop: number;
  plotBottom: number;
}

const AXIS_STYLE = "stroke:#333333;stroke-width:1";
const GRID_STYLE = "stroke:#dddddd;stroke-width:0.5";
const LABEL_STYLE = "font-family:monospace;font-size:11px;fill:#333333";
const TITLE_STYLE = "font-family:monospace;font-size:13px;fill:#111111";

/** Draw axes/grid/labels and return the data-to-pixel scales. */
export function makeFrame(
  doc: SvgDocument,
  xDomain: Extent,
  yDomain: Extent,
  title: string,
  xLabel: string,
  yLabel: string,
): Frame {
  const left = 62;
  const right = doc.width - 16;
  const top = 30;
  const bottom = doc.height - 40;
  const x = new LinearScale(xDomain, [left, right]);
  const y = new LinearScale(yDomain, [bottom, top]);
  doc.text(left, 18, title, TITLE_STYLE);
  for (const tick of x.ticks()) {
    const px = x.map(tick);
    doc.line(px, top, px, bottom, GRID_STYLE);
    doc.text(px - 8, bottom + 14, tickLabel(tick), LABEL_STYLE);
  }
  for (const tick of y.ticks()) {
    const py = y.map(tick);
    doc.line(left, py, right, py, GRID_STYLE);
    doc.text(6, py + 4, tickLabel(tick), LABEL_STYLE);
  }
  doc.line(left, bottom, right, bottom, AXIS_STYLE);
  doc.line(left, top, left, bottom, AXIS_STYLE);
  doc.text(Math.round((left + right) / 2) - 20, doc.height - 8, xLabel, LABEL_STYLE);
  doc.text(6, 18, yLabel, LABEL_STYLE);
  return { x, y, plotLeft: left, plotRight: right, plotTop: top, plotBottom: bottom };
}

export function legend(doc: SvgDocument, frame: Frame, entries: Array<[string, string]>): void {
  let ly = frame.plotTop + 12;
  for (const [label, color] of entries) {
    doc.line(frame.plotRight - 92, ly - 4, frame.plotRight - 74, ly - 4, `stroke:${color};stroke-width:2`);
    doc.text(frame.plotRight - 70, ly, label, LABEL_STYLE);
    ly += 14;
  }
}
