/**
 * Dataset bridge: opens a directory of recordings as a normalized window
 * stream by delegating every numeric step to the primary command-line tool.
 *
 * The bridge never reimplements normalization.  `openDataset` invokes the
 * CLI's `normalize` subcommand in a child process, loads the exported window
 * file, and verifies the manifest's SHA-256 against the bytes it actually
 * loaded, so batch contents are byte-identical (at f32) to what the primary
 * library produced.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import {
  WindowFile,
  WindowLabel,
  WindowManifest,
  readWindowFile,
  sha256Hex,
} from "./format.js";

const SCHEMES = new Set(["none", "all", "channel"]);

export interface OpenOptions {
  /** Directory containing .eegn recordings. */
  data: string;
  /** Normalization plan, "recording,window" with schemes none|all|channel. */
  plan: string;
  windowLenS: number;
  policy?: "error" | "flag_identity" | "propagate";
  /** Command prefix for the primary CLI, e.g. ["python3", "-m", "eegnorm"]. */
  command?: string[];
  env?: NodeJS.ProcessEnv;
}

export interface Batch {
  /** Window-major data: window b occupies [b*C*S, (b+1)*C*S). */
  data: Float32Array;
  size: number;
  channels: number;
  samples: number;
  labels: WindowLabel[];
}

export function validatePlan(plan: string): void {
  const parts = plan.split(",");
  const ok =
    parts.length === 2 &&
    SCHEMES.has(parts[0].trim()) &&
    SCHEMES.has(parts[1].trim());
  if (!ok) {
    throw new Error(
      `invalid plan ${JSON.stringify(plan)}: expected "recording,window" ` +
        `with schemes none|all|channel`,
    );
  }
}

export class DatasetHandle {
  private file: WindowFile;
  private cursor = 0;
  private tempDir: string | null;
  private open = true;

  constructor(file: WindowFile, tempDir: string | null) {
    this.file = file;
    this.tempDir = tempDir;
  }

  get length(): number {
    return this.file.nWindows;
  }

  get channels(): number {
    return this.file.nChannels;
  }

  get samples(): number {
    return this.file.nSamples;
  }

  get manifest(): WindowManifest {
    return this.file.manifest;
  }

  /** Float32 view of one window (C*S values, channel-major). */
  window(index: number): Float32Array {
    if (index < 0 || index >= this.length) {
      throw new RangeError(`window ${index} out of range 0..${this.length - 1}`);
    }
    const stride = this.channels * this.samples;
    return this.file.payload.subarray(index * stride, (index + 1) * stride);
  }

  /**
   * Next dense batch of up to `batchSize` windows with aligned labels, or
   * null once the stream is exhausted (an explicit end, not an error).
   */
  nextBatch(batchSize: number): Batch | null {
    if (!this.open) throw new Error("handle is closed");
    if (batchSize < 1) throw new Error("batchSize must be >= 1");
    if (this.cursor >= this.length) return null;
    const take = Math.min(batchSize, this.length - this.cursor);
    const stride = this.channels * this.samples;
    const start = this.cursor * stride;
    const batch: Batch = {
      data: this.file.payload.subarray(start, start + take * stride),
      size: take,
      channels: this.channels,
      samples: this.samples,
      labels: this.file.manifest.labels.slice(this.cursor, this.cursor + take),
    };
    this.cursor += take;
    return batch;
  }

  rewind(): void {
    this.cursor = 0;
  }

  close(): void {
    this.open = false;
    if (this.tempDir) {
      rmSync(this.tempDir, { recursive: true, force: true });
      this.tempDir = null;
    }
  }
}

export function openDataset(options: OpenOptions): DatasetHandle {
  validatePlan(options.plan);
  const command = options.command ?? ["python3", "-m", "eegnorm"];
  const tempDir = mkdtempSync(join(tmpdir(), "eegnorm-bridge-"));
  const outPath = join(tempDir, "windows.eegw");
  const argv = [
    ...command.slice(1),
    "normalize",
    "--data",
    options.data,
    "--plan",
    options.plan,
    "--window-len",
    String(options.windowLenS),
    "--policy",
    options.policy ?? "flag_identity",
    "--out",
    outPath,
  ];
  const proc = spawnSync(command[0], argv, {
    env: { ...process.env, ...options.env },
    encoding: "utf-8",
  });
  if (proc.error) {
    rmSync(tempDir, { recursive: true, force: true });
    throw proc.error;
  }
  if (proc.status !== 0) {
    rmSync(tempDir, { recursive: true, force: true });
    throw new Error(
      `primary CLI failed (exit ${proc.status}): ${proc.stderr.trim()}`,
    );
  }
  const file = readWindowFile(outPath);
  const digest = sha256Hex(file.payloadBytes);
  if (digest !== file.manifest.payload_sha256) {
    rmSync(tempDir, { recursive: true, force: true });
    throw new Error(
      `payload checksum mismatch: primary wrote ${file.manifest.payload_sha256}, ` +
        `loaded bytes hash to ${digest}`,
    );
  }
  return new DatasetHandle(file, tempDir);
}
