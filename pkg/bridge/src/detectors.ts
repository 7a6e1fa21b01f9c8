/** Pose sources behind one interface.
 *
 * The synthetic walker and JSON replay run anywhere and keep the wire path
 * honest; `createLiveDetector` is the swap point where a real model (MoveNet,
 * YOLO-pose, ...) plugs in. All backends emit COCO-17 order, going through
 * the pinned remap tables when the native ordering differs. */

import * as fs from "node:fs";

import { Detection, Keypoint, LEFT_ANKLE, NUM_KEYPOINTS } from "./coco.js";

export interface Detector {
  readonly name: string;
  start(): Promise<void>;
  /** Detections for the frame captured at tSeconds. */
  detect(frameIndex: number, tSeconds: number): Promise<Detection[]>;
  stop(): Promise<void>;
}

const f32 = Math.fround;

/** Deterministic walking figure on a sine path across the lower image half. */
export class SyntheticWalker implements Detector {
  readonly name = "synthetic";

  constructor(
    private readonly width = 640,
    private readonly height = 480,
  ) {}

  async start(): Promise<void> {}

  async detect(_frameIndex: number, tSeconds: number): Promise<Detection[]> {
    const u = this.width * (0.5 + 0.35 * Math.sin(0.4 * tSeconds));
    const v = this.height * (0.75 + 0.15 * Math.sin(0.17 * tSeconds));
    const keypoints: Keypoint[] = [];
    for (let k = 0; k < NUM_KEYPOINTS - 2; k++) {
      keypoints.push({
        x: f32(u + (k % 2 === 0 ? -6 : 6)),
        y: f32(Math.max(0, v - 150 + 9 * k)),
        conf: f32(0.6),
      });
    }
    keypoints.push({ x: f32(u), y: f32(v), conf: f32(0.95) }); // left ankle
    keypoints.push({ x: f32(u), y: f32(v), conf: f32(0.95) }); // right ankle
    return [{ keypoints }];
  }

  async stop(): Promise<void> {}
}

interface ReplayFile {
  frames: { persons: number[][][] }[];
}

/** Replays detections from a JSON file: {frames:[{persons:[[[x,y,conf]x17]]}]}. */
export class JsonReplay implements Detector {
  readonly name = "json-replay";
  private frames: Detection[][] = [];

  constructor(private readonly path: string) {}

  async start(): Promise<void> {
    const doc = JSON.parse(fs.readFileSync(this.path, "utf-8")) as ReplayFile;
    if (!Array.isArray(doc.frames)) {
      throw new Error(`${this.path}: replay file needs a "frames" array`);
    }
    this.frames = doc.frames.map((frame, i) =>
      frame.persons.map((person) => {
        if (person.length !== NUM_KEYPOINTS) {
          throw new Error(
            `${this.path}: frame ${i} person has ${person.length} keypoints`,
          );
        }
        return {
          keypoints: person.map(([x, y, conf]) => ({
            x: f32(x), y: f32(y), conf: f32(conf),
          })),
        };
      }),
    );
  }

  async detect(frameIndex: number): Promise<Detection[]> {
    if (this.frames.length === 0) return [];
    return this.frames[frameIndex % this.frames.length];
  }

  async stop(): Promise<void> {}
}

/**
 * Swap point for a real pose model on a camera device. Loading model weights
 * needs assets this environment does not ship, so this fails with a clear
 * diagnostic; a deployment drops its model runner in here (emitting native
 * keypoints remapped through NATIVE_TO_COCO).
 */
export function createLiveDetector(deviceIndex: number): Detector {
  return {
    name: `live:${deviceIndex}`,
    async start() {
      throw new Error(
        `no pose model available for camera device ${deviceIndex}: ` +
          "install a detector backend (e.g. MoveNet weights) and wire it " +
          "into createLiveDetector()",
      );
    },
    async detect() {
      return [];
    },
    async stop() {},
  };
}

/** Drop detections whose ankles are both below the confidence floor. */
export function applyConfidenceFloor(
  detections: Detection[],
  floor: number,
): Detection[] {
  if (floor <= 0) return detections;
  return detections.filter((det) => {
    const left = det.keypoints[LEFT_ANKLE];
    const right = det.keypoints[LEFT_ANKLE + 1];
    return left.conf >= floor || right.conf >= floor;
  });
}
