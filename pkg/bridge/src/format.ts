/**
 * Readers for the two binary interchange formats.
 *
 * `.eegn` recording files (the fallback interchange path): EEGN magic,
 * u32 version, u32 channel count, u64 sample count, f64 sampling rate,
 * u16-length-prefixed UTF-8 channel names, then f32 LE samples laid out
 * channel-major.  Subject metadata lives in a `.meta` sidecar of
 * `key=value` lines.
 *
 * `.eegw` window exports: EEGW magic, u32 version, u32 window count,
 * u32 channels, u32 samples, then f32 LE windows (window-major).  A JSON
 * manifest sidecar carries aligned labels and the SHA-256 of the payload.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

export interface Recording {
  id: string;
  channels: string[];
  fs: number;
  /** Channel-major samples: data[c * nSamples + s]. */
  data: Float32Array;
  nChannels: number;
  nSamples: number;
  meta: SubjectMeta;
}

export interface SubjectMeta {
  subjectId: string;
  age: number;
  gender: number;
  group: string;
}

export interface WindowLabel {
  recording_id: string;
  offset_samples: number;
  age: number;
  gender: number;
  group: string;
  flagged_channels: number[];
}

export interface WindowManifest {
  format: string;
  version: number;
  n_windows: number;
  n_channels: number;
  n_samples: number;
  window_len_s: number;
  plan: { recording: string; window: string };
  policy: string;
  payload_sha256: string;
  labels: WindowLabel[];
}

export interface WindowFile {
  nWindows: number;
  nChannels: number;
  nSamples: number;
  /** Window-major payload: window w starts at w * nChannels * nSamples. */
  payload: Float32Array;
  payloadBytes: Buffer;
  manifest: WindowManifest;
}

export function sha256Hex(bytes: Buffer | Uint8Array): string {
  return createHash("sha256").update(bytes).digest("hex");
}

function metaPath(path: string): string {
  return path.replace(/\.[^./\\]+$/, "") + ".meta";
}

function parseMeta(path: string): { id: string; meta: SubjectMeta } {
  const fields = new Map<string, string>();
  for (const raw of readFileSync(path, "utf-8").split("\n")) {
    const line = raw.trim();
    if (!line || line.startsWith("#")) continue;
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`malformed meta line in ${path}: ${line}`);
    fields.set(line.slice(0, eq).trim(), line.slice(eq + 1).trim());
  }
  for (const key of ["id", "subject_id", "age", "gender", "group"]) {
    if (!fields.has(key)) throw new Error(`meta file ${path} missing key ${key}`);
  }
  return {
    id: fields.get("id")!,
    meta: {
      subjectId: fields.get("subject_id")!,
      age: Number(fields.get("age")),
      gender: Number(fields.get("gender")),
      group: fields.get("group")!,
    },
  };
}

export function readRecording(path: string): Recording {
  const blob = readFileSync(path);
  if (blob.length < 28) throw new Error(`${path}: truncated header`);
  if (blob.toString("latin1", 0, 4) !== "EEGN") {
    throw new Error(`${path}: bad magic`);
  }
  const version = blob.readUInt32LE(4);
  if (version !== 1) throw new Error(`${path}: unsupported version ${version}`);
  const nChannels = blob.readUInt32LE(8);
  const nSamples = Number(blob.readBigUInt64LE(12));
  const fs = blob.readDoubleLE(20);

  let offset = 28;
  const channels: string[] = [];
  for (let c = 0; c < nChannels; c++) {
    if (offset + 2 > blob.length) throw new Error(`${path}: truncated name block`);
    const len = blob.readUInt16LE(offset);
    offset += 2;
    channels.push(blob.toString("utf-8", offset, offset + len));
    offset += len;
  }

  const expected = nChannels * nSamples * 4;
  if (blob.length - offset !== expected) {
    throw new Error(
      `${path}: payload is ${blob.length - offset} bytes, expected ${expected}`,
    );
  }
  const payload = blob.subarray(offset);
  const data = new Float32Array(
    payload.buffer.slice(payload.byteOffset, payload.byteOffset + expected),
  );
  const { id, meta } = parseMeta(metaPath(path));
  return { id, channels, fs, data, nChannels, nSamples, meta };
}

export function readWindowFile(path: string): WindowFile {
  const blob = readFileSync(path);
  if (blob.length < 20) throw new Error(`${path}: truncated header`);
  if (blob.toString("latin1", 0, 4) !== "EEGW") {
    throw new Error(`${path}: bad magic`);
  }
  const version = blob.readUInt32LE(4);
  if (version !== 1) throw new Error(`${path}: unsupported version ${version}`);
  const nWindows = blob.readUInt32LE(8);
  const nChannels = blob.readUInt32LE(12);
  const nSamples = blob.readUInt32LE(16);
  const expected = nWindows * nChannels * nSamples * 4;
  const payloadBytes = blob.subarray(20);
  if (payloadBytes.length !== expected) {
    throw new Error(
      `${path}: payload is ${payloadBytes.length} bytes, expected ${expected}`,
    );
  }
  const manifest = JSON.parse(
    readFileSync(path + ".manifest.json", "utf-8"),
  ) as WindowManifest;
  if (manifest.n_windows !== nWindows || manifest.n_channels !== nChannels) {
    throw new Error(`${path}: manifest disagrees with binary header`);
  }
  const payload = new Float32Array(
    payloadBytes.buffer.slice(
      payloadBytes.byteOffset,
      payloadBytes.byteOffset + expected,
    ),
  );
  return {
    nWindows,
    nChannels,
    nSamples,
    payload,
    payloadBytes: Buffer.from(payloadBytes),
    manifest,
  };
}

/** Median with linear interpolation (mean of the two central order stats). */
export function median(values: Float32Array | number[]): number {
  const sorted = Array.from(values).sort((a, b) => a - b);
  const n = sorted.length;
  if (n === 0) throw new Error("median of empty input");
  const mid = Math.floor(n / 2);
  return n % 2 === 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
}
