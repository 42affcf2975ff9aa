#!/usr/bin/env node
// Dispatcher for the render_* commands: reads CSV/JSON artifacts from
// --in DIR and writes a deterministic SVG to --out FILE.svg.

import { writeFileSync } from "fs";
import { basename } from "path";
import { SchemaError } from "./csv.js";
import { RENDERERS } from "./figures.js";

function parseArgs(argv: string[]): { indir: string; out: string } {
  let indir = "";
  let out = "";
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--in") {
      indir = argv[++i] ?? "";
    } else if (argv[i] === "--out") {
      out = argv[++i] ?? "";
    } else {
      throw new Error(`unknown argument ${argv[i]}`);
    }
  }
  if (!indir || !out) {
    throw new Error("usage: render_<family> --in DIR --out FILE.svg");
  }
  return { indir, out };
}

export function main(command: string, argv: string[]): number {
  const renderer = RENDERERS[command];
  if (!renderer) {
    console.error(
      `unknown command ${command}; expected one of ` +
        Object.keys(RENDERERS).join(", "),
    );
    return 2;
  }
  let args: { indir: string; out: string };
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 2;
  }
  try {
    const svg = renderer(args.indir);
    writeFileSync(args.out, svg);
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    throw err;
  }
  return 0;
}

const invoked = basename(process.argv[1] ?? "").replace(/\.js$/, "");
if (invoked === "cli") {
  // invoked as `node dist/cli.js render_bands --in ... --out ...`
  const [cmd, ...rest] = process.argv.slice(2);
  process.exit(main(cmd ?? "", rest));
} else if (invoked in RENDERERS) {
  process.exit(main(invoked, process.argv.slice(2)));
}
