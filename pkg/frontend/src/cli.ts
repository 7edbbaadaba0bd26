/**
 * Usage: render --figure <F3..F11|all> --in <dir> --out <dir>
 *
 * Reads exported experiment files from the input directory and writes one
 * SVG per requested figure.  Inputs are never modified.
 */

import { mkdirSync, writeFileSync } from "fs";
import { join } from "path";

import { FIGURE_IDS, FigureId, renderFigure } from "./figures.js";

function parseArgs(argv: string[]): { figure: string; inDir: string; outDir: string } {
  const args: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i].replace(/^--/, "");
    args[key] = argv[i + 1];
  }
  if (!args.in || !args.out) {
    throw new Error("usage: render --figure <id|all> --in <dir> --out <dir>");
  }
  return { figure: args.figure ?? "all", inDir: args.in, outDir: args.out };
}

export function main(argv: string[]): number {
  const { figure, inDir, outDir } = parseArgs(argv);
  const ids: FigureId[] =
    figure === "all"
      ? [...FIGURE_IDS]
      : [figure as FigureId];
  for (const id of ids) {
    if (!FIGURE_IDS.includes(id)) {
      console.error(`unknown figure ${id}; expected one of ${FIGURE_IDS.join(", ")}`);
      return 2;
    }
  }
  mkdirSync(outDir, { recursive: true });
  for (const id of ids) {
    const svg = renderFigure(id, inDir);
    const path = join(outDir, `${id}.svg`);
    writeFileSync(path, svg);
    console.log(`wrote ${path}`);
  }
  return 0;
}

const isMain = process.argv[1]?.endsWith("cli.js");
if (isMain) {
  const argv = process.argv.slice(2);
  if (argv[0] === "render") argv.shift();
  try {
    process.exit(main(argv));
  } catch (err) {
    console.error(String(err));
    process.exit(1);
  }
}
