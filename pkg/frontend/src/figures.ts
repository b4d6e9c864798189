/** Figure renderers for the simulation sweep CSVs.
 *
 * Density-matrix panels use the square-fill-for-amplitude encoding: a full
 * square stands for an amplitude of 0.4, the fill color encodes the phase.
 * Curve panels show fidelity in blue and concurrence in red.
 */

import { num, parseCsv, requireColumns, Table } from "./csv.js";
import { Frame, Svg } from "./svg.js";

export type FigureId = "fig2" | "fig3" | "fig4a" | "fig4b" | "figS2" | "figS6";

export interface FigureRecipe {
  figure: FigureId;
  csvText: string;
  maxPanels?: number;
}

export const FULL_SQUARE_AMPLITUDE = 0.4;
const BASIS = ["gg", "ge", "eg", "ee", "fg", "fe"];
const BLUE = "#1f77b4";
const RED = "#d62728";
const GREYS = ["#444444", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];

export function phaseColor(phase: number): string {
  // hue wheel over (-pi, pi]; zero phase renders dark grey
  const deg = ((phase + Math.PI) / (2 * Math.PI)) * 360;
  return `hsl(${deg.toFixed(1)} 70% 45%)`;
}

export function amplitudeSide(amplitude: number, cell: number): number {
  const frac = Math.min(Math.abs(amplitude) / FULL_SQUARE_AMPLITUDE, 1.0);
  return frac * cell;
}

export function render(recipe: FigureRecipe): string {
  const table = parseCsv(recipe.csvText);
  switch (recipe.figure) {
    case "fig2":
      return renderBlocking(table);
    case "fig3":
      return renderHintonSeries(table, recipe.maxPanels ?? 5);
    case "fig4a":
    case "figS6":
      return renderFidelityConcurrence(table, recipe.figure, "eps_mhz", "Zeno drive amplitude (MHz)");
    case "fig4b":
      return renderFidelityConcurrence(table, recipe.figure, "fraction", "post-selection fraction");
    case "figS2":
      return renderRamseyShifts(table);
    default:
      throw new Error(`unknown figure id ${recipe.figure satisfies never}`);
  }
}

function seriesBy<T extends string>(rows: Record<string, string>[], key: T): Map<string, Record<string, string>[]> {
  const out = new Map<string, Record<string, string>[]>();
  for (const row of rows) {
    const k = row[key];
    if (!out.has(k)) out.set(k, []);
    out.get(k)!.push(row);
  }
  return out;
}

function renderBlocking(table: Table): string {
  requireColumns(table, "fig2", ["rabi_mhz", "eps_mhz", "model", "p_gg"]);
  const svg = new Svg(460, 330);
  const eps = table.rows.map((r) => num(r, "eps_mhz"));
  const frame = new Frame(svg, {
    xMin: 0,
    xMax: Math.max(...eps) * 1.05,
    yMin: 0,
    yMax: 1.0,
  });
  frame.axes("Zeno drive amplitude (MHz)", "P(gg)", ticks(0, Math.max(...eps)), [0, 0.5, 1]);
  let si = 0;
  for (const [label, rows] of seriesBy(table.rows, "rabi_mhz")) {
    for (const model of ["full-cavity", "ideal-markovian"]) {
      const pts = rows
        .filter((r) => r.model === model)
        .sort((a, b) => num(a, "eps_mhz") - num(b, "eps_mhz"))
        .map((r): [number, number] => [frame.x(num(r, "eps_mhz")), frame.y(num(r, "p_gg"))]);
      if (pts.length === 0) continue;
      const color = GREYS[si % GREYS.length];
      svg.polyline(pts, color, 1);
      for (const [x, y] of pts) {
        if (model === "full-cavity") {
          svg.rect(x - 3, y - 3, 6, 6, color); // squares: full simulation
        } else {
          svg.add(`<polygon points="${x},${y - 4} ${x - 4},${y + 3} ${x + 4},${y + 3}" fill="${color}"/>`);
        }
      }
      svg.text(frame.x(Math.max(...eps)) - 4, frame.y(0.08) - si * 14,
        `${label} MHz ${model === "full-cavity" ? "(full)" : "(ideal)"}`, 10, "end");
      si += 1;
    }
  }
  return svg.render();
}

function renderHintonSeries(table: Table, maxPanels: number): string {
  requireColumns(table, "fig3", ["time_us", "row", "col", "re", "im"]);
  const byTime = seriesBy(table.rows, "time_us");
  const times = [...byTime.keys()].sort((a, b) => Number(a) - Number(b));
  const chosen: string[] = [];
  const stride = Math.max(1, Math.floor(times.length / maxPanels));
  for (let i = 0; i < times.length && chosen.length < maxPanels; i += stride) {
    chosen.push(times[i]);
  }
  if (!chosen.includes(times[times.length - 1]) && chosen.length > 0) {
    chosen[chosen.length - 1] = times[times.length - 1];
  }
  const cell = 18;
  const panel = cell * 6 + 44;
  const svg = new Svg(panel * chosen.length + 20, panel + 40);
  chosen.forEach((t, p) => {
    const x0 = 20 + p * panel;
    const y0 = 34;
    svg.text(x0 + (cell * 6) / 2, y0 - 14, `t = ${t} µs`);
    for (const row of byTime.get(t)!) {
      const i = BASIS.indexOf(row.row);
      const j = BASIS.indexOf(row.col);
      if (i < 0 || j < 0) {
        throw new Error(`unknown basis label ${row.row},${row.col}`);
      }
      const re = num(row, "re");
      const im = num(row, "im");
      const amp = Math.hypot(re, im);
      const phase = Math.atan2(im, re);
      // cell outline, then the amplitude-filled phase-colored square
      svg.rect(x0 + j * cell, y0 + i * cell, cell, cell, "none", ' stroke="#bbb" stroke-width="0.5"');
      const side = amplitudeSide(amp, cell - 2);
      if (side > 0.01) {
        const off = (cell - side) / 2;
        svg.rect(x0 + j * cell + off, y0 + i * cell + off, side, side,
          amp < 1e-9 ? "#888888" : phaseColor(phase));
      }
    }
    BASIS.forEach((lab, i) => {
      svg.text(x0 - 8, y0 + i * cell + cell / 2 + 3, lab, 8, "end");
      svg.text(x0 + i * cell + cell / 2, y0 + 6 * cell + 12, lab, 8);
    });
  });
  return svg.render();
}

function renderFidelityConcurrence(table: Table, figure: string, xCol: string,
                                   xLabel: string): string {
  requireColumns(table, figure, [xCol, "fidelity", "concurrence"]);
  const svg = new Svg(460, 330);
  const xs = table.rows.map((r) => num(r, xCol));
  const frame = new Frame(svg, {
    xMin: Math.min(0, ...xs),
    xMax: Math.max(...xs) * 1.05,
    yMin: 0,
    yMax: 1.0,
  });
  frame.axes(xLabel, "fidelity (blue), concurrence (red)", ticks(0, Math.max(...xs)), [0, 0.5, 1]);
  const sorted = [...table.rows].sort((a, b) => num(a, xCol) - num(b, xCol));
  for (const [col, color] of [["fidelity", BLUE], ["concurrence", RED]] as const) {
    const pts = sorted.map((r): [number, number] => [frame.x(num(r, xCol)), frame.y(num(r, col))]);
    svg.polyline(pts, color);
    for (const [x, y] of pts) svg.rect(x - 3, y - 3, 6, 6, color);
  }
  return svg.render();
}

function renderRamseyShifts(table: Table): string {
  requireColumns(table, "figS2", ["eps_mhz", "pair", "symmetric_on", "shift_mhz"]);
  const svg = new Svg(460, 330);
  const xs = table.rows.map((r) => num(r, "eps_mhz"));
  const ys = table.rows.map((r) => num(r, "shift_mhz"));
  const pad = (Math.max(...ys) - Math.min(...ys)) * 0.1 + 1e-6;
  const frame = new Frame(svg, {
    xMin: 0,
    xMax: Math.max(...xs) * 1.05,
    yMin: Math.min(...ys) - pad,
    yMax: Math.max(...ys) + pad,
  });
  frame.axes("drive amplitude (MHz)", "Ramsey shift (MHz)", ticks(0, Math.max(...xs)),
             [Math.min(...ys), 0, Math.max(...ys)].filter((v, i, a) => a.indexOf(v) === i));
  let si = 0;
  for (const [key, rows] of seriesBy(table.rows, "pair")) {
    for (const sym of ["true", "false"]) {
      const pts = rows
        .filter((r) => r.symmetric_on === sym)
        .sort((a, b) => num(a, "eps_mhz") - num(b, "eps_mhz"))
        .map((r): [number, number] => [frame.x(num(r, "eps_mhz")), frame.y(num(r, "shift_mhz"))]);
      if (pts.length === 0) continue;
      const color = GREYS[si % GREYS.length];
      svg.polyline(pts, color, 1);
      for (const [x, y] of pts) {
        if (sym === "true") svg.rect(x - 3, y - 3, 6, 6, color);
        else svg.add(`<polygon points="${x},${y - 4} ${x - 4},${y + 3} ${x + 4},${y + 3}" fill="${color}"/>`);
      }
      svg.text(frame.x(0) + 6, 24 + si * 13, `${key} ${sym === "true" ? "sym on" : "sym off"}`, 10, "start");
      si += 1;
    }
  }
  return svg.render();
}

function ticks(lo: number, hi: number): number[] {
  const step = hi - lo > 4 ? 1 : 0.5;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-9; v += step) {
    out.push(Number(v.toFixed(6)));
  }
  return out;
}
