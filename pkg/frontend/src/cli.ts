/** Thin file-in/file-out wrapper: --fig <id> --in <csv> --out <svg>.
 * Nothing is written when validation fails. */

import { readFileSync, writeFileSync } from "node:fs";
import { render, FigureId } from "./figures.js";

const FIGURES = ["fig2", "fig3", "fig4a", "fig4b", "figS2", "figS6"];

function parseArgs(argv: string[]): { fig: FigureId; input: string; output: string } {
  const opts: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key?.startsWith("--") || value === undefined) {
      throw new Error("usage: --fig <id> --in <csv> --out <svg>");
    }
    opts[key.slice(2)] = value;
  }
  const fig = opts["fig"];
  if (!fig || !FIGURES.includes(fig)) {
    throw new Error(`--fig must be one of ${FIGURES.join(", ")}`);
  }
  if (!opts["in"] || !opts["out"]) {
    throw new Error("--in and --out are required");
  }
  return { fig: fig as FigureId, input: opts["in"], output: opts["out"] };
}

export function main(argv: string[]): number {
  try {
    const { fig, input, output } = parseArgs(argv);
    const svg = render({ figure: fig, csvText: readFileSync(input, "utf8") });
    writeFileSync(output, svg);
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
