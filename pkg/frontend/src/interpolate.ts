/** Local keyframe interpolation used for the live preview.
 *
 * The service computes the dense reference trajectory with exactly this
 * rule, so the preview and the echoed b_ref must agree to float precision:
 * piecewise linear between keys, constant after the last key.
 */

import type { Box, Keyframe } from "./types.js";

export class KeyframeError extends Error {
  constructor(
    public readonly reason: string,
    detail?: string,
  ) {
    super(detail ? `${reason}: ${detail}` : reason);
  }
}

export function validateKeyframes(keys: Keyframe[], frames: number): void {
  if (keys.length === 0) throw new KeyframeError("keyframes_empty");
  for (const k of keys) {
    if (!Number.isInteger(k.frame)) {
      throw new KeyframeError("invalid_keyframe", `frame ${k.frame}`);
    }
    if (k.box.length !== 4 || k.box.some((v) => !Number.isFinite(v))) {
      throw new KeyframeError("invalid_box");
    }
    if (k.box[2] < 0 || k.box[3] < 0) {
      throw new KeyframeError("invalid_box", "negative box extent");
    }
  }
  for (let i = 1; i < keys.length; i++) {
    if (keys[i]!.frame <= keys[i - 1]!.frame) {
      throw new KeyframeError("keyframes_unsorted");
    }
  }
  if (keys[0]!.frame !== 0) {
    throw new KeyframeError("keyframes_must_start_at_zero");
  }
  if (keys[keys.length - 1]!.frame > frames - 1) {
    throw new KeyframeError("keyframe_out_of_range");
  }
}

/** Dense (frames x 4) trajectory through the keys. */
export function interpolateKeyframes(keys: Keyframe[], frames: number): Box[] {
  validateKeyframes(keys, frames);
  const out: Box[] = [];
  let seg = 0;
  for (let t = 0; t < frames; t++) {
    while (seg + 1 < keys.length && keys[seg + 1]!.frame <= t) seg++;
    const a = keys[seg]!;
    const b = keys[seg + 1];
    if (b === undefined || t <= a.frame) {
      out.push([...a.box]);
      continue;
    }
    const w = (t - a.frame) / (b.frame - a.frame);
    out.push([
      a.box[0] + w * (b.box[0] - a.box[0]),
      a.box[1] + w * (b.box[1] - a.box[1]),
      a.box[2] + w * (b.box[2] - a.box[2]),
      a.box[3] + w * (b.box[3] - a.box[3]),
    ]);
  }
  return out;
}

/** Largest absolute component difference between two dense trajectories. */
export function maxBoxDifference(a: number[][], b: number[][]): number {
  if (a.length !== b.length) return Infinity;
  let worst = 0;
  for (let i = 0; i < a.length; i++) {
    for (let j = 0; j < 4; j++) {
      worst = Math.max(worst, Math.abs(a[i]![j]! - b[i]![j]!));
    }
  }
  return worst;
}
