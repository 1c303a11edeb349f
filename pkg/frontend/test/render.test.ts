import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SchemaError, readCsv, requireColumns } from "../src/csv";
import { buildSvg, render, KINDS, FigureKind } from "../src/render";
import { main } from "../src/cli";

const DATA = path.join(__dirname, "..", "testdata");
const MINUTES = path.join(DATA, "minutes.csv");
const CROSSINGS = path.join(DATA, "crossings.csv");
const TIMELINE = path.join(DATA, "timeline.csv");

let tmp: string;

beforeAll(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "plots-"));
});

afterAll(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

function inputFor(kind: FigureKind): string {
  if (kind === "minutes") return MINUTES;
  if (kind === "minute-bounds") return CROSSINGS;
  return TIMELINE;
}

describe("render smoke suite over all five kinds", () => {
  for (const kind of KINDS) {
    it(`renders ${kind} to a nonempty svg and png`, () => {
      const svgOut = path.join(tmp, `${kind}.svg`);
      const pngOut = path.join(tmp, `${kind}.png`);
      render({ kind, input: inputFor(kind), output: svgOut, options: { p: 0.1 } });
      render({ kind, input: inputFor(kind), output: pngOut, options: { p: 0.1 } });
      expect(fs.statSync(svgOut).size).toBeGreaterThan(500);
      expect(fs.statSync(pngOut).size).toBeGreaterThan(500);
      const svg = fs.readFileSync(svgOut, "utf8");
      expect(svg.startsWith("<svg ")).toBe(true);
      expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
      // PNG magic
      const png = fs.readFileSync(pngOut);
      expect(png.subarray(0, 4)).toEqual(Buffer.from([0x89, 0x50, 0x4e, 0x47]));
    });
  }
});

describe("determinism", () => {
  it("same csv gives byte-identical svg", () => {
    const a = buildSvg({ kind: "opinions", input: TIMELINE, output: "unused.svg" });
    const b = buildSvg({ kind: "opinions", input: TIMELINE, output: "unused.svg" });
    expect(a).toBe(b);
  });

  it("same csv gives byte-identical png (pinned resvg)", () => {
    const out1 = path.join(tmp, "det1.png");
    const out2 = path.join(tmp, "det2.png");
    render({ kind: "minutes", input: MINUTES, output: out1 });
    render({ kind: "minutes", input: MINUTES, output: out2 });
    expect(fs.readFileSync(out1).equals(fs.readFileSync(out2))).toBe(true);
  });
});

describe("schema validation", () => {
  it("names the missing column", () => {
    const bad = path.join(tmp, "bad.csv");
    fs.writeFileSync(bad, "parallel_time,minute\n0.0,1\n");
    expect(() => buildSvg({ kind: "minutes", input: bad, output: "x.svg" }))
      .toThrowError(/missing column 'fraction'/);
  });

  it("rejects non-numeric cells with row context", () => {
    const bad = path.join(tmp, "nan.csv");
    fs.writeFileSync(bad, "parallel_time,minute,fraction\n0.0,oops,0.5\n");
    expect(() => buildSvg({ kind: "minutes", input: bad, output: "x.svg" }))
      .toThrowError(/column 'minute' row 2/);
  });

  it("requireColumns passes on the goldens", () => {
    requireColumns(readCsv(CROSSINGS), ["minute", "t_plus", "t_01", "t_09"]);
  });

  it("opinions needs the projection from meta.json", () => {
    const orphan = path.join(tmp, "orphan.csv");
    fs.copyFileSync(TIMELINE, orphan);
    expect(() => buildSvg({ kind: "opinions", input: orphan, output: "x.svg" }))
      .toThrowError(SchemaError);
  });
});

describe("figure content", () => {
  it("opinions figure carries all four curves in the legend", () => {
    const svg = buildSvg({ kind: "opinions", input: TIMELINE, output: "x.svg" });
    for (const label of ["majority", "minority", "|difference|", "unbiased"]) {
      expect(svg).toContain(label);
    }
  });

  it("minute-bounds overlays both reference lines", () => {
    const svg = buildSvg({
      kind: "minute-bounds", input: CROSSINGS, output: "x.svg",
      options: { p: 0.1, window: [4, 12] },
    });
    expect(svg).toContain("lower 0.58");
    expect(svg).toContain("upper 2.11 + ln(1/p)/2 = 3.26");
  });

  it("timeline aggregates on the phase field by default", () => {
    const svg = buildSvg({ kind: "timeline", input: TIMELINE, output: "x.svg" });
    expect(svg).toContain("phase=0");
  });
});

describe("cli", () => {
  it("full invocation writes the file and exits 0", () => {
    const out = path.join(tmp, "cli.svg");
    const code = main(["timeline", "--in", TIMELINE, "--out", out, "--field", "role"]);
    expect(code).toBe(0);
    expect(fs.statSync(out).size).toBeGreaterThan(500);
  });

  it("schema violation exits nonzero via process.exit", () => {
    const bad = path.join(tmp, "cli-bad.csv");
    fs.writeFileSync(bad, "wrong,headers\n1,2\n");
    const calls: number[] = [];
    const orig = process.exit;
    // @ts-expect-error stubbing exit to observe the code
    process.exit = (code?: number) => {
      calls.push(code ?? 0);
      throw new Error("exit");
    };
    try {
      expect(() => main(["minutes", "--in", bad, "--out", path.join(tmp, "x.svg")]))
        .toThrowError("exit");
    } finally {
      process.exit = orig;
    }
    expect(calls).toEqual([1]);
  });
});
