/** The bridge run loop: paced capture into a latest-frame slot, and a send
 * loop that ships the newest frame over REQ/REP, blocking on each REP. */

import { Detector, applyConfidenceFloor } from "./detectors.js";
import { ReqRepClient } from "./client.js";
import { encodeFrame } from "./framing.js";
import { encodeKp17 } from "./kp17.js";
import { LatestSlot } from "./mailbox.js";

export interface BridgeConfig {
  host: string;
  port: number;
  cameraId: string;
  fps: number;
  durationS: number;
  width: number;
  height: number;
  confFloor: number;
  /** Send every frame instead of conflating to the newest. */
  lockstep: boolean;
  repTimeoutMs?: number;
}

export interface BridgeResult {
  captured: number;
  delivered: number;
  droppedAtSource: number;
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export async function runBridge(
  detector: Detector,
  config: BridgeConfig,
): Promise<BridgeResult> {
  await detector.start();
  const client = new ReqRepClient(config.host, config.port, {
    repTimeoutMs: config.repTimeoutMs,
  });
  await client.connect();

  const slot = new LatestSlot<Buffer>();
  const frameCount = Math.floor(config.durationS * config.fps) + 1;
  let captured = 0;
  let delivered = 0;

  const capture = async () => {
    const start = Date.now();
    for (let i = 0; i < frameCount; i++) {
      const target = start + (i / config.fps) * 1000;
      const delay = target - Date.now();
      if (delay > 0) await sleep(delay);
      const tSeconds = i / config.fps;
      const detections = applyConfidenceFloor(
        await detector.detect(i, tSeconds),
        config.confFloor,
      );
      const frame = encodeFrame(
        {
          cam: config.cameraId,
          seq: i,
          ts_us: Math.round(tSeconds * 1e6),
          w: config.width,
          h: config.height,
          enc: "kp17",
        },
        encodeKp17(detections),
      );
      captured++;
      if (config.lockstep) {
        while (!(await client.send(frame))) {
          /* REP timed out; in lockstep mode the frame is retried */
        }
        delivered++;
      } else {
        slot.put(frame);
      }
    }
    slot.close();
  };

  const send = async () => {
    if (config.lockstep) return;
    for (;;) {
      const frame = await slot.take();
      if (frame === undefined) return;
      if (await client.send(frame)) delivered++;
    }
  };

  try {
    await Promise.all([capture(), send()]);
  } finally {
    client.close();
    await detector.stop();
  }
  return { captured, delivered, droppedAtSource: slot.overwritten };
}
