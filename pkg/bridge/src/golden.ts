/** Writes the golden interop files: a captured wire stream plus a JSON
 * description of exactly what it must decode to. The consuming tracker's
 * test suite decodes frames.bin and checks it bit-exact against frames.json.
 * Deterministic: re-running must reproduce identical bytes. */

import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { Detection, NUM_KEYPOINTS } from "./coco.js";
import { encodeFrame, FrameHeader } from "./framing.js";
import { encodeKp17 } from "./kp17.js";

const f32 = Math.fround;

function person(seedU: number, seedV: number): Detection {
  const keypoints = [];
  for (let k = 0; k < NUM_KEYPOINTS; k++) {
    keypoints.push({
      x: f32(seedU + 7.25 * k + 0.1),
      y: f32(seedV - 9.5 * k + 0.2),
      conf: f32(0.05 * k + 0.1),
    });
  }
  return { keypoints };
}

export function buildGoldenFrames(): { header: FrameHeader; persons: Detection[] }[] {
  const base = { w: 640, h: 480, enc: "kp17" as const, cam: "bridge0" };
  return [
    { header: { ...base, seq: 0, ts_us: 0 }, persons: [] },
    { header: { ...base, seq: 1, ts_us: 33333 }, persons: [person(120.5, 410.75)] },
    {
      header: { ...base, seq: 2, ts_us: 66666 },
      persons: [person(130.0, 402.5), person(333.125, 444.0)],
    },
  ];
}

export function goldenBin(): Buffer {
  return Buffer.concat(
    buildGoldenFrames().map((f) => encodeFrame(f.header, encodeKp17(f.persons))),
  );
}

export function goldenJson(): string {
  const doc = buildGoldenFrames().map((f) => ({
    cam: f.header.cam,
    seq: f.header.seq,
    ts_us: f.header.ts_us,
    w: f.header.w,
    h: f.header.h,
    enc: f.header.enc,
    persons: f.persons.map((det) =>
      det.keypoints.map((kp) => [kp.x, kp.y, kp.conf]),
    ),
  }));
  return JSON.stringify(doc, null, 2) + "\n";
}

function main(): void {
  const here = path.dirname(fileURLToPath(import.meta.url));
  const outDir = path.resolve(here, "..", "golden");
  fs.mkdirSync(outDir, { recursive: true });
  fs.writeFileSync(path.join(outDir, "frames.bin"), goldenBin());
  fs.writeFileSync(path.join(outDir, "frames.json"), goldenJson());
  console.log(`wrote ${path.join(outDir, "frames.bin")} and frames.json`);
}

if (process.argv[1] && fileURLToPath(import.meta.url) === path.resolve(process.argv[1])) {
  main();
}
