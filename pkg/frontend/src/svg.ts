/** Minimal deterministic SVG chart builder: same inputs, same bytes. */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
  "#393b79", "#ad494a",
];

function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  const s = x.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export function niceTicks(lo: number, hi: number, count = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / Math.max(1, count);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  let step = mag;
  for (const m of [1, 2, 5, 10]) {
    if (step0 <= m * mag) {
      step = m * mag;
      break;
    }
  }
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) {
    ticks.push(Math.abs(v) < 1e-12 ? 0 : v);
  }
  return ticks;
}

export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e5 || a < 1e-3) return v.toExponential(0).replace("+", "");
  if (Number.isInteger(v)) return String(v);
  return String(Number(v.toPrecision(4)));
}

export class Chart {
  readonly width: number;
  readonly height: number;
  readonly margin: Margin;
  private body: string[] = [];
  private xLo = 0;
  private xHi = 1;
  private yLo = 0;
  private yHi = 1;
  private logY = false;

  constructor(width = 860, height = 480,
              margin: Margin = { top: 40, right: 24, bottom: 48, left: 64 }) {
    this.width = width;
    this.height = height;
    this.margin = margin;
  }

  domain(xLo: number, xHi: number, yLo: number, yHi: number, logY = false): void {
    this.xLo = xLo;
    this.xHi = xHi > xLo ? xHi : xLo + 1;
    this.logY = logY;
    if (logY) {
      this.yLo = Math.max(yLo, 0.5);
      this.yHi = Math.max(yHi, this.yLo * 10);
    } else {
      this.yLo = yLo;
      this.yHi = yHi > yLo ? yHi : yLo + 1;
    }
  }

  x(v: number): number {
    const w = this.width - this.margin.left - this.margin.right;
    return this.margin.left + ((v - this.xLo) / (this.xHi - this.xLo)) * w;
  }

  y(v: number): number {
    const h = this.height - this.margin.top - this.margin.bottom;
    let t: number;
    if (this.logY) {
      const vv = Math.max(v, this.yLo);
      t = (Math.log(vv) - Math.log(this.yLo)) / (Math.log(this.yHi) - Math.log(this.yLo));
    } else {
      t = (v - this.yLo) / (this.yHi - this.yLo);
    }
    return this.height - this.margin.bottom - t * h;
  }

  title(text: string): void {
    this.body.push(
      `<text x="${fmt(this.width / 2)}" y="22" text-anchor="middle" ` +
      `font-size="15" font-family="sans-serif" font-weight="bold">${esc(text)}</text>`);
  }

  axes(xLabel: string, yLabel: string): void {
    const { left, bottom } = { left: this.margin.left, bottom: this.height - this.margin.bottom };
    const right = this.width - this.margin.right;
    const top = this.margin.top;
    this.body.push(`<line x1="${fmt(left)}" y1="${fmt(bottom)}" x2="${fmt(right)}" y2="${fmt(bottom)}" stroke="black"/>`);
    this.body.push(`<line x1="${fmt(left)}" y1="${fmt(top)}" x2="${fmt(left)}" y2="${fmt(bottom)}" stroke="black"/>`);
    for (const t of niceTicks(this.xLo, this.xHi)) {
      const px = this.x(t);
      this.body.push(`<line x1="${fmt(px)}" y1="${fmt(bottom)}" x2="${fmt(px)}" y2="${fmt(bottom + 5)}" stroke="black"/>`);
      this.body.push(`<text x="${fmt(px)}" y="${fmt(bottom + 18)}" text-anchor="middle" font-size="11" font-family="sans-serif">${tickLabel(t)}</text>`);
    }
    const yTicks = this.logY ? this.logTicks() : niceTicks(this.yLo, this.yHi);
    for (const t of yTicks) {
      const py = this.y(t);
      this.body.push(`<line x1="${fmt(left - 5)}" y1="${fmt(py)}" x2="${fmt(left)}" y2="${fmt(py)}" stroke="black"/>`);
      this.body.push(`<text x="${fmt(left - 8)}" y="${fmt(py + 4)}" text-anchor="end" font-size="11" font-family="sans-serif">${tickLabel(t)}</text>`);
    }
    this.body.push(
      `<text x="${fmt((left + right) / 2)}" y="${fmt(this.height - 8)}" text-anchor="middle" ` +
      `font-size="12" font-family="sans-serif">${esc(xLabel)}</text>`);
    this.body.push(
      `<text x="16" y="${fmt((top + bottom) / 2)}" text-anchor="middle" font-size="12" ` +
      `font-family="sans-serif" transform="rotate(-90 16 ${fmt((top + bottom) / 2)})">${esc(yLabel)}</text>`);
  }

  private logTicks(): number[] {
    const ticks: number[] = [];
    let v = Math.pow(10, Math.ceil(Math.log10(this.yLo)));
    while (v <= this.yHi * 1.0001) {
      ticks.push(v);
      v *= 10;
    }
    return ticks;
  }

  polyline(points: Array<[number, number]>, color: string, width = 1.5, dash?: string): void {
    if (points.length === 0) return;
    const pts = points.map(([px, py]) => `${fmt(this.x(px))},${fmt(this.y(py))}`).join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.body.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="${width}"${dashAttr}/>`);
  }

  dot(px: number, py: number, color: string, r = 2.5): void {
    this.body.push(`<circle cx="${fmt(this.x(px))}" cy="${fmt(this.y(py))}" r="${r}" fill="${color}"/>`);
  }

  bar(px0: number, px1: number, py: number, color: string): void {
    const x0 = this.x(px0);
    const x1 = this.x(px1);
    const y0 = this.y(py);
    const base = this.y(this.logY ? this.yLo : Math.max(0, this.yLo));
    const h = Math.max(0, base - y0);
    this.body.push(
      `<rect x="${fmt(x0)}" y="${fmt(y0)}" width="${fmt(Math.max(0.5, x1 - x0))}" ` +
      `height="${fmt(h)}" fill="${color}" fill-opacity="0.8"/>`);
  }

  hline(py: number, color: string, dash: string, label: string): void {
    const y = this.y(py);
    this.body.push(
      `<line x1="${fmt(this.margin.left)}" y1="${fmt(y)}" x2="${fmt(this.width - this.margin.right)}" ` +
      `y2="${fmt(y)}" stroke="${color}" stroke-width="1.2" stroke-dasharray="${dash}"/>`);
    this.body.push(
      `<text x="${fmt(this.width - this.margin.right - 4)}" y="${fmt(y - 4)}" text-anchor="end" ` +
      `font-size="11" font-family="sans-serif" fill="${color}">${esc(label)}</text>`);
  }

  legend(entries: Array<[string, string]>): void {
    const x = this.margin.left + 10;
    let y = this.margin.top + 8;
    for (const [label, color] of entries) {
      this.body.push(`<line x1="${fmt(x)}" y1="${fmt(y)}" x2="${fmt(x + 18)}" y2="${fmt(y)}" stroke="${color}" stroke-width="2.5"/>`);
      this.body.push(`<text x="${fmt(x + 24)}" y="${fmt(y + 4)}" font-size="11" font-family="sans-serif">${esc(label)}</text>`);
      y += 16;
    }
  }

  raw(element: string): void {
    this.body.push(element);
  }

  toString(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect width="${this.width}" height="${this.height}" fill="white"/>`,
      ...this.body,
      "</svg>",
      "",
    ].join("\n");
  }
}

export function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
