/** Minimal deterministic SVG builder: no timestamps, no randomness, so
 * re-rendering the same inputs reproduces the same bytes. */

export interface Bounds {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

export class Svg {
  private parts: string[] = [];
  constructor(readonly width: number, readonly height: number) {}

  add(fragment: string): void {
    this.parts.push(fragment);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, extra = ""): void {
    this.add(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"${extra}/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1): void {
    this.add(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${width}"/>`,
    );
  }

  polyline(points: [number, number][], stroke: string, width = 1.5): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.add(`<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${width}"/>`);
  }

  circle(cx: number, cy: number, r: number, fill: string): void {
    this.add(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" fill="${fill}"/>`);
  }

  text(x: number, y: number, s: string, size = 11, anchor = "middle"): void {
    this.add(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" text-anchor="${anchor}" font-family="sans-serif">${escapeXml(s)}</text>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

export function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toFixed(2);
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Linear data→pixel axes with ticks and labels for curve panels. */
export class Frame {
  constructor(
    readonly svg: Svg,
    readonly bounds: Bounds,
    readonly margin = 46,
  ) {}

  x(v: number): number {
    const { xMin, xMax } = this.bounds;
    return this.margin + ((v - xMin) / (xMax - xMin)) * (this.svg.width - 2 * this.margin);
  }

  y(v: number): number {
    const { yMin, yMax } = this.bounds;
    return (
      this.svg.height - this.margin - ((v - yMin) / (yMax - yMin)) * (this.svg.height - 2 * this.margin)
    );
  }

  axes(xLabel: string, yLabel: string, xTicks: number[], yTicks: number[]): void {
    const s = this.svg;
    s.line(this.x(this.bounds.xMin), this.y(this.bounds.yMin), this.x(this.bounds.xMax), this.y(this.bounds.yMin), "#000");
    s.line(this.x(this.bounds.xMin), this.y(this.bounds.yMin), this.x(this.bounds.xMin), this.y(this.bounds.yMax), "#000");
    for (const t of xTicks) {
      s.line(this.x(t), this.y(this.bounds.yMin), this.x(t), this.y(this.bounds.yMin) + 4, "#000");
      s.text(this.x(t), this.y(this.bounds.yMin) + 16, trimTick(t));
    }
    for (const t of yTicks) {
      s.line(this.x(this.bounds.xMin) - 4, this.y(t), this.x(this.bounds.xMin), this.y(t), "#000");
      s.text(this.x(this.bounds.xMin) - 8, this.y(t) + 4, trimTick(t), 11, "end");
    }
    s.text((this.x(this.bounds.xMin) + this.x(this.bounds.xMax)) / 2, s.height - 8, xLabel);
    s.add(
      `<text x="12" y="${fmt(s.height / 2)}" font-size="11" text-anchor="middle" ` +
      `font-family="sans-serif" transform="rotate(-90 12 ${fmt(s.height / 2)})">${yLabel}</text>`,
    );
  }
}

function trimTick(v: number): string {
  return Math.abs(v - Math.round(v)) < 1e-9 ? String(Math.round(v)) : String(v);
}
