// One renderer per figure family.  Each takes the artifact directory
// produced by the simulation CLI and returns a complete SVG document.

import { readdirSync } from "fs";

import {
  SchemaError,
  column,
  loadCsv,
  loadJson,
  requireKeys,
  textColumn,
} from "./csv.js";
import {
  Svg,
  decayColor,
  extent,
  fmt,
  makeFrame,
} from "./svg.js";

function groupBy<T>(keys: number[], values: T[]): Map<number, T[]> {
  const out = new Map<number, T[]>();
  keys.forEach((k, i) => {
    const bucket = out.get(k);
    if (bucket) {
      bucket.push(values[i]);
    } else {
      out.set(k, [values[i]]);
    }
  });
  return out;
}

// band diagram along the symmetry path: decay-rate colored dots per band,
// dashed verticals where the path crosses the light circle, gap band shaded
export function renderBands(dir: string): string {
  const table = loadCsv(dir, "bands.csv");
  const meta = loadJson(dir, "bands.json");
  requireKeys(meta, ["light_cone_k"], "bands.json");
  const arc = column(table, "arc_len");
  const band = column(table, "band");
  const re = column(table, "re_E");
  const gamma = column(table, "gamma");
  const kx = column(table, "kx");
  const ky = column(table, "ky");
  const frame = makeFrame(extent(arc, 0), extent(re));
  const svg = new Svg(frame);

  // indirect gap between the second and third band over the sampled path
  const re2 = re.filter((_, i) => band[i] === 1);
  const re3 = re.filter((_, i) => band[i] === 2);
  const lo = Math.max(...re2);
  const hi = Math.min(...re3);

  svg.clipped(() => {
    if (hi > lo) {
      svg.hband(lo, hi, "#d9d9d9");
    }
    const kl = meta.light_cone_k as number;
    const path = band
      .map((b, i) => ({ b, i }))
      .filter(({ b }) => b === 0)
      .map(({ i }) => ({ arc: arc[i], k: Math.hypot(kx[i], ky[i]) }));
    for (let i = 1; i < path.length; i++) {
      if ((path[i].k - kl) * (path[i - 1].k - kl) < 0) {
        svg.vline(path[i].arc, "green");
      }
    }
    for (let i = 0; i < arc.length; i++) {
      svg.circle(frame.x.map(arc[i]), frame.y.map(re[i]), 2,
        decayColor(gamma[i]));
    }
  });
  svg.axes("arc length along path (1/wavelength)",
    "detuning (linewidths)", "Bloch bands");
  return svg.render();
}

// gap against magnetic field
export function renderGap(dir: string): string {
  const table = loadCsv(dir, "gap_vs_field.csv");
  const meta = loadJson(dir, "gapscan.json");
  requireKeys(meta, ["delta_max", "field_at_max"], "gapscan.json");
  const mu = column(table, "mu_b");
  const delta = column(table, "delta");
  const frame = makeFrame(extent(mu, 0), extent(delta.concat([0])));
  const svg = new Svg(frame);
  svg.clipped(() => {
    svg.polyline(
      mu.map((m, i) => [frame.x.map(m), frame.y.map(delta[i])]),
      "steelblue", 2);
    svg.vline(meta.field_at_max as number, "gray", "3,3");
  });
  svg.axes("Zeeman shift (linewidths)", "gap (linewidths)",
    `gap vs field, max ${fmt(meta.delta_max as number)}`);
  return svg.render();
}

// maximum gap and dipolar coupling against spacing, log-log with slopes
export function renderSpacing(dir: string): string {
  const table = loadCsv(dir, "spacing_scan.csv");
  const meta = loadJson(dir, "spacing_scan.json");
  requireKeys(meta, ["slope_delta", "slope_coupling"], "spacing_scan.json");
  const a = column(table, "spacing").map(Math.log10);
  const d = column(table, "delta_max").map(Math.log10);
  const j = column(table, "coupling").map(Math.log10);
  const frame = makeFrame(extent(a), extent(d.concat(j)));
  const svg = new Svg(frame);
  svg.clipped(() => {
    svg.polyline(a.map((x, i) => [frame.x.map(x), frame.y.map(d[i])]),
      "steelblue", 2, "5,3");
    svg.polyline(a.map((x, i) => [frame.x.map(x), frame.y.map(j[i])]),
      "magenta", 2);
    for (let i = 0; i < a.length; i++) {
      svg.circle(frame.x.map(a[i]), frame.y.map(d[i]), 3, "steelblue");
    }
  });
  svg.axes("log10 spacing (wavelengths)", "log10 energy (linewidths)",
    `max gap slope ${fmt(meta.slope_delta as number)}, coupling slope ` +
    `${fmt(meta.slope_coupling as number)}`);
  return svg.render();
}

// stripe spectrum: diamonds on the top edge, squares on the bottom edge,
// dots in the bulk, decay-rate colored, light-circle verticals, gap band
export function renderStripe(dir: string): string {
  const table = loadCsv(dir, "stripe.csv");
  const meta = loadJson(dir, "stripe.json");
  requireKeys(meta,
    ["window_lo", "window_hi", "light_cone_k_period_over_pi", "edge_type"],
    "stripe.json");
  const k = column(table, "k_period_over_pi");
  const re = column(table, "re_E");
  const gamma = column(table, "gamma");
  const cls = textColumn(table, "classification");
  const frame = makeFrame([-1.05, 1.05], extent(re));
  const svg = new Svg(frame);
  svg.clipped(() => {
    svg.hband(meta.window_lo as number, meta.window_hi as number, "#d9d9d9");
    const kl = meta.light_cone_k_period_over_pi as number;
    if (kl < 1) {
      svg.vline(kl, "green");
      svg.vline(-kl, "green");
    }
    for (let i = 0; i < k.length; i++) {
      const px = frame.x.map(k[i]);
      const py = frame.y.map(re[i]);
      const color = decayColor(gamma[i]);
      if (cls[i] === "top-edge") {
        svg.diamond(px, py, 4, color);
      } else if (cls[i] === "bottom-edge") {
        svg.square(px, py, 3, color);
      } else {
        svg.circle(px, py, 1.5, color);
      }
    }
  });
  svg.axes("quasi-momentum (pi / period)", "detuning (linewidths)",
    `${meta.edge_type} stripe spectrum`);
  return svg.render();
}

// real-space snapshot of the driven lattice
export function renderSnapshot(dir: string, snapshotName?: string): string {
  let name = snapshotName ?? "";
  if (!name) {
    const candidates = readdirSync(dir)
      .filter((f) => /^(snapshot_.*|bound_snapshot)\.csv$/.test(f))
      .sort();
    if (candidates.length === 0) {
      throw new SchemaError("no snapshot CSV found in artifact directory");
    }
    name = candidates[0];
  }
  const table = loadCsv(dir, name);
  const x = column(table, "x");
  const y = column(table, "y");
  const p = column(table, "p");
  const [xlo, xhi] = extent(x);
  const [ylo, yhi] = extent(y);
  const span = Math.max(xhi - xlo, yhi - ylo);
  const frame = makeFrame([xlo, xlo + span], [ylo, ylo + span], 560, 560);
  const svg = new Svg(frame);
  const pmax = Math.max(...p, 1e-300);
  svg.clipped(() => {
    for (let i = 0; i < x.length; i++) {
      // log intensity scale over four decades
      const t = Math.max(0, 1 + Math.log10(p[i] / pmax + 1e-12) / 4);
      svg.circle(frame.x.map(x[i]), frame.y.map(y[i]), 2.2, decayColor(t));
    }
  });
  let title = "excitation snapshot";
  try {
    const metrics = loadJson(dir, "metrics.json");
    if ("forward_fraction" in metrics) {
      title = `excitation snapshot, forward fraction ${fmt(
        metrics.forward_fraction as number)}`;
    }
    if ("source_x" in metrics && "source_y" in metrics) {
      svg.diamond(frame.x.map(metrics.source_x as number),
        frame.y.map(metrics.source_y as number), 6, "red");
    }
  } catch {
    // metrics are optional for bound-state snapshots
  }
  svg.axes("x (wavelengths)", "y (wavelengths)", title);
  return svg.render();
}

// average in-gap decay rate against atom number, log-log with fit line
export function renderLifetimes(dir: string): string {
  const table = loadCsv(dir, "lifetimes.csv");
  const meta = loadJson(dir, "lifetimes.json");
  requireKeys(meta, ["exponent"], "lifetimes.json");
  const n = column(table, "n_atoms").map(Math.log10);
  const g = column(table, "gamma_avg").map(Math.log10);
  const frame = makeFrame(extent(n), extent(g));
  const svg = new Svg(frame);
  const p = meta.exponent as number;
  // fit line through the centroid with slope -p
  const cx = n.reduce((s, v) => s + v, 0) / n.length;
  const cy = g.reduce((s, v) => s + v, 0) / g.length;
  svg.clipped(() => {
    svg.polyline(
      [
        [frame.x.map(frame.x.d0), frame.y.map(cy - p * (frame.x.d0 - cx))],
        [frame.x.map(frame.x.d1), frame.y.map(cy - p * (frame.x.d1 - cx))],
      ],
      "gray", 1.5);
    for (let i = 0; i < n.length; i++) {
      svg.circle(frame.x.map(n[i]), frame.y.map(g[i]), 4, "steelblue");
    }
  });
  svg.axes("log10 atom number", "log10 mean edge decay rate",
    `edge lifetime scaling, exponent ${fmt(p)}`);
  return svg.render();
}

// gap against position-fluctuation amplitude with error bars
export function renderFluct(dir: string): string {
  const table = loadCsv(dir, "fluct.csv");
  const r = column(table, "delta_a_ratio");
  const d = column(table, "delta");
  const e = column(table, "stderr");
  const frame = makeFrame(extent(r), extent(d.concat([0])));
  const svg = new Svg(frame);
  svg.clipped(() => {
    svg.polyline(r.map((x, i) => [frame.x.map(x), frame.y.map(d[i])]),
      "steelblue", 2);
    for (let i = 0; i < r.length; i++) {
      const px = frame.x.map(r[i]);
      svg.polyline(
        [
          [px, frame.y.map(d[i] - e[i])],
          [px, frame.y.map(d[i] + e[i])],
        ],
        "black", 1);
      svg.circle(px, frame.y.map(d[i]), 3, "steelblue");
    }
  });
  svg.axes("fluctuation amplitude (fraction of spacing)",
    "gap (linewidths)", "gap under position fluctuations");
  return svg.render();
}

export const RENDERERS: Record<string, (dir: string) => string> = {
  render_bands: renderBands,
  render_gap: renderGap,
  render_spacing: renderSpacing,
  render_stripe: renderStripe,
  render_snapshot: renderSnapshot,
  render_lifetimes: renderLifetimes,
  render_fluct: renderFluct,
};
