// Minimal deterministic SVG plotting: linear scales, axes, markers,
// a fixed decay-rate color ramp.  All numbers are emitted with fixed
// precision and nothing depends on time or environment, so identical
// inputs give byte-identical files.

export function fmt(x: number): string {
  if (!Number.isFinite(x)) {
    return "0";
  }
  const s = x.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export class LinearScale {
  constructor(
    public d0: number,
    public d1: number,
    public r0: number,
    public r1: number,
  ) {
    if (d1 === d0) {
      this.d1 = d0 + 1;
    }
  }

  map(x: number): number {
    return (
      this.r0 + ((x - this.d0) / (this.d1 - this.d0)) * (this.r1 - this.r0)
    );
  }

  ticks(n = 5): number[] {
    const span = this.d1 - this.d0;
    const step = Math.pow(10, Math.floor(Math.log10(span / n)));
    const err = (span / n) / step;
    const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
    const s = step * mult;
    const t0 = Math.ceil(this.d0 / s) * s;
    const out: number[] = [];
    for (let v = t0; v <= this.d1 + 1e-12 * Math.abs(span); v += s) {
      out.push(Math.abs(v) < 1e-12 * Math.abs(span) ? 0 : v);
    }
    return out;
  }
}

export function extent(values: number[], pad = 0.05): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (Number.isFinite(v)) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  if (!Number.isFinite(lo)) {
    lo = 0;
    hi = 1;
  }
  const span = hi - lo || 1;
  return [lo - pad * span, hi + pad * span];
}

// dark blue (long lived) to yellow (decaying at the single-emitter rate),
// clamped at one linewidth
export function decayColor(gamma: number): string {
  const t = Math.max(0, Math.min(1, gamma));
  const r = Math.round(30 + 225 * t);
  const g = Math.round(40 + 180 * t);
  const b = Math.round(120 - 90 * t);
  return `rgb(${r},${g},${b})`;
}

export interface Frame {
  width: number;
  height: number;
  margin: { l: number; r: number; t: number; b: number };
  x: LinearScale;
  y: LinearScale;
}

export function makeFrame(
  xdom: [number, number],
  ydom: [number, number],
  width = 640,
  height = 440,
): Frame {
  const margin = { l: 64, r: 16, t: 28, b: 46 };
  return {
    width,
    height,
    margin,
    x: new LinearScale(xdom[0], xdom[1], margin.l, width - margin.r),
    y: new LinearScale(ydom[0], ydom[1], height - margin.b, margin.t),
  };
}

export class Svg {
  private parts: string[] = [];

  constructor(public frame: Frame) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" ` +
        `height="${frame.height}" viewBox="0 0 ${frame.width} ${frame.height}">`,
      `<rect width="${frame.width}" height="${frame.height}" fill="white"/>`,
    );
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  axes(xlabel: string, ylabel: string, title = ""): void {
    const { x, y, margin, width, height } = this.frame;
    const x0 = margin.l;
    const x1 = width - margin.r;
    const y0 = height - margin.b;
    const y1 = margin.t;
    this.parts.push(
      `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" ` +
        `fill="none" stroke="black" stroke-width="1"/>`,
    );
    for (const t of x.ticks()) {
      const px = fmt(x.map(t));
      this.parts.push(
        `<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`,
        `<text x="${px}" y="${y0 + 18}" font-size="11" text-anchor="middle">` +
          `${trimTick(t)}</text>`,
      );
    }
    for (const t of y.ticks()) {
      const py = fmt(y.map(t));
      this.parts.push(
        `<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`,
        `<text x="${x0 - 8}" y="${py}" font-size="11" text-anchor="end" ` +
          `dominant-baseline="middle">${trimTick(t)}</text>`,
      );
    }
    this.parts.push(
      `<text x="${fmt((x0 + x1) / 2)}" y="${y0 + 36}" font-size="13" ` +
        `text-anchor="middle">${xlabel}</text>`,
      `<text x="16" y="${fmt((y0 + y1) / 2)}" font-size="13" ` +
        `text-anchor="middle" transform="rotate(-90 16 ${fmt(
          (y0 + y1) / 2,
        )})">${ylabel}</text>`,
    );
    if (title) {
      this.parts.push(
        `<text x="${fmt((x0 + x1) / 2)}" y="18" font-size="14" ` +
          `text-anchor="middle">${title}</text>`,
      );
    }
  }

  clipped(body: () => void): void {
    const { margin, width, height } = this.frame;
    const id = `plot${this.parts.length}`;
    this.parts.push(
      `<clipPath id="${id}"><rect x="${margin.l}" y="${margin.t}" ` +
        `width="${width - margin.l - margin.r}" ` +
        `height="${height - margin.t - margin.b}"/></clipPath>`,
      `<g clip-path="url(#${id})">`,
    );
    body();
    this.parts.push("</g>");
  }

  circle(px: number, py: number, r: number, fill: string): void {
    this.parts.push(
      `<circle cx="${fmt(px)}" cy="${fmt(py)}" r="${fmt(r)}" fill="${fill}"/>`,
    );
  }

  diamond(px: number, py: number, r: number, fill: string): void {
    const p = [
      `${fmt(px)},${fmt(py - r)}`,
      `${fmt(px + r)},${fmt(py)}`,
      `${fmt(px)},${fmt(py + r)}`,
      `${fmt(px - r)},${fmt(py)}`,
    ].join(" ");
    this.parts.push(`<polygon points="${p}" fill="${fill}"/>`);
  }

  square(px: number, py: number, r: number, fill: string): void {
    this.parts.push(
      `<rect x="${fmt(px - r)}" y="${fmt(py - r)}" width="${fmt(2 * r)}" ` +
        `height="${fmt(2 * r)}" fill="${fill}"/>`,
    );
  }

  polyline(pts: Array<[number, number]>, stroke: string, width = 1.5,
           dash = ""): void {
    const d = pts.map(([a, b]) => `${fmt(a)},${fmt(b)}`).join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${d}" fill="none" stroke="${stroke}" ` +
        `stroke-width="${width}"${dashAttr}/>`,
    );
  }

  vline(xval: number, stroke: string, dash = "6,4"): void {
    const { y } = this.frame;
    const px = fmt(this.frame.x.map(xval));
    this.parts.push(
      `<line x1="${px}" y1="${fmt(y.map(y.d0))}" x2="${px}" ` +
        `y2="${fmt(y.map(y.d1))}" stroke="${stroke}" ` +
        `stroke-dasharray="${dash}"/>`,
    );
  }

  hband(ylo: number, yhi: number, fill: string): void {
    const { x, y } = this.frame;
    const top = Math.min(y.map(ylo), y.map(yhi));
    const h = Math.abs(y.map(ylo) - y.map(yhi));
    this.parts.push(
      `<rect x="${fmt(x.map(x.d0))}" y="${fmt(top)}" ` +
        `width="${fmt(x.map(x.d1) - x.map(x.d0))}" height="${fmt(h)}" ` +
        `fill="${fill}" opacity="0.35"/>`,
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function trimTick(t: number): string {
  const s = t.toPrecision(6);
  return String(Number(s));
}
