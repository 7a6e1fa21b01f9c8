/** COCO-17 keypoint ordering and detector-native index remapping. */

export const COCO_KEYPOINT_NAMES = [
  "nose", "left_eye", "right_eye", "left_ear", "right_ear",
  "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
  "left_wrist", "right_wrist", "left_hip", "right_hip",
  "left_knee", "right_knee", "left_ankle", "right_ankle",
] as const;

export const NUM_KEYPOINTS = 17;
export const LEFT_ANKLE = 15;
export const RIGHT_ANKLE = 16;

export interface Keypoint {
  x: number;
  y: number;
  conf: number;
}

export interface Detection {
  /** Exactly 17 keypoints, already in COCO-17 order. */
  keypoints: Keypoint[];
}

/**
 * Pinned remap tables: nativeOrder[cocoIndex] = index in the detector's
 * native output. Every backend goes through remapToCoco so the wire payload
 * is COCO-17 regardless of what the model emits.
 */
export const NATIVE_TO_COCO: Record<string, number[]> = {
  // MoveNet and YOLO-pose families emit COCO order natively.
  movenet: Array.from({ length: NUM_KEYPOINTS }, (_, i) => i),
  "yolo-pose": Array.from({ length: NUM_KEYPOINTS }, (_, i) => i),
};

export function remapToCoco(native: Keypoint[], nativeOrder: number[]): Keypoint[] {
  if (nativeOrder.length !== NUM_KEYPOINTS) {
    throw new Error(`remap table must have ${NUM_KEYPOINTS} entries`);
  }
  return nativeOrder.map((idx) => {
    const kp = native[idx];
    if (kp === undefined) {
      throw new Error(`native output has no keypoint at index ${idx}`);
    }
    return kp;
  });
}
