/** Wire framing: "GTK1" | u32 header_len | JSON header | u32 payload_len |
 * payload (lengths big-endian). REP is the single byte 0x01. */

export const MAGIC = Buffer.from("GTK1", "ascii");
export const REP_BYTE = 0x01;
export const WIRE_VERSION = 1;

export interface FrameHeader {
  cam: string;
  seq: number;
  ts_us: number;
  w: number;
  h: number;
  enc: "jpeg" | "raw8" | "kp17";
}

export function encodeFrame(header: FrameHeader, payload: Buffer): Buffer {
  const headerJson = Buffer.from(
    JSON.stringify({ v: WIRE_VERSION, ...header }),
    "utf-8",
  );
  const buf = Buffer.alloc(4 + 4 + headerJson.length + 4 + payload.length);
  MAGIC.copy(buf, 0);
  buf.writeUInt32BE(headerJson.length, 4);
  headerJson.copy(buf, 8);
  buf.writeUInt32BE(payload.length, 8 + headerJson.length);
  payload.copy(buf, 12 + headerJson.length);
  return buf;
}

export interface DecodedFrame {
  header: FrameHeader;
  payload: Buffer;
  /** total bytes this frame occupied */
  size: number;
}

/** Decode one frame from the start of buf; null when more bytes are needed. */
export function decodeFrameAt(buf: Buffer): DecodedFrame | null {
  if (buf.length < 8) return null;
  if (!buf.subarray(0, 4).equals(MAGIC)) {
    throw new Error(`bad magic ${buf.subarray(0, 4).toString("hex")}`);
  }
  const headerLen = buf.readUInt32BE(4);
  if (buf.length < 8 + headerLen + 4) return null;
  const headerJson = buf.subarray(8, 8 + headerLen).toString("utf-8");
  const payloadLen = buf.readUInt32BE(8 + headerLen);
  const total = 12 + headerLen + payloadLen;
  if (buf.length < total) return null;
  const doc = JSON.parse(headerJson);
  if (doc.v !== WIRE_VERSION) {
    throw new Error(`unsupported wire version ${doc.v}`);
  }
  const header: FrameHeader = {
    cam: doc.cam, seq: doc.seq, ts_us: doc.ts_us,
    w: doc.w, h: doc.h, enc: doc.enc,
  };
  return { header, payload: buf.subarray(12 + headerLen, total), size: total };
}

/** Decode a buffer of back-to-back frames (a captured stream). */
export function decodeFrameStream(buf: Buffer): DecodedFrame[] {
  const frames: DecodedFrame[] = [];
  let rest = buf;
  while (rest.length > 0) {
    const frame = decodeFrameAt(rest);
    if (frame === null) {
      throw new Error(`truncated frame stream (${rest.length} trailing bytes)`);
    }
    frames.push(frame);
    rest = rest.subarray(frame.size);
  }
  return frames;
}
