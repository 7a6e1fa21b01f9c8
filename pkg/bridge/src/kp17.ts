/** kp17 payload codec: little-endian u16 person count, then per person
 * 17 x (f32 x, f32 y, f32 conf) in COCO-17 order. */

import { Detection, Keypoint, NUM_KEYPOINTS } from "./coco.js";

export const PERSON_RECORD_SIZE = NUM_KEYPOINTS * 12; // 204

export function encodeKp17(detections: Detection[]): Buffer {
  if (detections.length > 0xffff) {
    throw new Error(`too many detections: ${detections.length}`);
  }
  const buf = Buffer.alloc(2 + detections.length * PERSON_RECORD_SIZE);
  buf.writeUInt16LE(detections.length, 0);
  let off = 2;
  for (const det of detections) {
    if (det.keypoints.length !== NUM_KEYPOINTS) {
      throw new Error(`detection must carry ${NUM_KEYPOINTS} keypoints`);
    }
    for (const kp of det.keypoints) {
      buf.writeFloatLE(kp.x, off);
      buf.writeFloatLE(kp.y, off + 4);
      buf.writeFloatLE(kp.conf, off + 8);
      off += 12;
    }
  }
  return buf;
}

export function decodeKp17(payload: Buffer): Detection[] {
  if (payload.length < 2) {
    throw new Error(`kp17 payload too short: ${payload.length} bytes`);
  }
  const count = payload.readUInt16LE(0);
  const expected = 2 + count * PERSON_RECORD_SIZE;
  if (payload.length !== expected) {
    throw new Error(
      `kp17 payload length ${payload.length} != ${expected} for ${count} person(s)`,
    );
  }
  const detections: Detection[] = [];
  let off = 2;
  for (let p = 0; p < count; p++) {
    const keypoints: Keypoint[] = [];
    for (let k = 0; k < NUM_KEYPOINTS; k++) {
      keypoints.push({
        x: payload.readFloatLE(off),
        y: payload.readFloatLE(off + 4),
        conf: payload.readFloatLE(off + 8),
      });
      off += 12;
    }
    detections.push({ keypoints });
  }
  return detections;
}
