/** Editing session state: keyframes, method selection, request sequencing.
 *
 * The session never computes predictions; every overlay it exposes is the
 * parsed body of one TransformResponse. Responses are matched to requests
 * by per-method sequence numbers so a slow reply can never overwrite a
 * newer one.
 */

import { interpolateKeyframes, validateKeyframes } from "./interpolate.js";
import type {
  Box,
  Keyframe,
  Method,
  SamplerSpec,
  SceneDetail,
  TransformRequest,
  TransformResponse,
} from "./types.js";

export interface OverlayState {
  response: TransformResponse;
  sequence: number;
}

export class DesignSession {
  readonly scene: SceneDetail;
  readonly frames: number;
  private keys: Keyframe[] = [];
  private history: Keyframe[][] = [];
  private scrubberIndex = 0;
  private readonly overlays = new Map<Method, OverlayState>();
  private readonly issued = new Map<Method, number>();
  private readonly inFlight = new Map<Method, number>();

  constructor(scene: SceneDetail) {
    this.scene = scene;
    this.frames = scene.frames;
  }

  get keyframes(): Keyframe[] {
    return this.keys.map((k) => ({ frame: k.frame, box: [...k.box] as Box }));
  }

  get scrubber(): number {
    return this.scrubberIndex;
  }

  setScrubber(frame: number): number {
    this.scrubberIndex = Math.min(Math.max(Math.round(frame), 0), this.frames - 1);
    return this.scrubberIndex;
  }

  /** Add or replace the key at a frame; keeps the list sorted. */
  putKeyframe(frame: number, box: Box): void {
    if (!Number.isInteger(frame) || frame < 0 || frame > this.frames - 1) {
      throw new RangeError(`frame ${frame} outside [0, ${this.frames - 1}]`);
    }
    this.pushHistory();
    this.keys = this.keys.filter((k) => k.frame !== frame);
    this.keys.push({ frame, box: [...box] as Box });
    this.keys.sort((a, b) => a.frame - b.frame);
  }

  moveKeyframe(frame: number, box: Box): void {
    if (!this.keys.some((k) => k.frame === frame)) {
      throw new RangeError(`no keyframe at frame ${frame}`);
    }
    this.putKeyframe(frame, box);
  }

  removeKeyframe(frame: number): void {
    this.pushHistory();
    this.keys = this.keys.filter((k) => k.frame !== frame);
  }

  undo(): void {
    const prev = this.history.pop();
    if (prev !== undefined) this.keys = prev;
  }

  clearKeyframes(): void {
    this.pushHistory();
    this.keys = [];
  }

  private pushHistory(): void {
    this.history.push(this.keys.map((k) => ({ frame: k.frame, box: [...k.box] as Box })));
  }

  /** null when submittable, otherwise the blocking reason. */
  validationError(): string | null {
    try {
      validateKeyframes(this.keys, this.frames);
      return null;
    } catch (err) {
      return err instanceof Error ? err.message : String(err);
    }
  }

  /** Dense local preview of the designed path; [] until keys validate. */
  previewPath(): Box[] {
    if (this.validationError() !== null) return [];
    return interpolateKeyframes(this.keys, this.frames);
  }

  buildRequest(method: Method, sampler?: SamplerSpec): TransformRequest {
    validateKeyframes(this.keys, this.frames);
    const req: TransformRequest = {
      method,
      record_id: this.scene.id,
      keyframes: this.keyframes,
    };
    if (method === "model" && sampler !== undefined) req.sampler = sampler;
    return req;
  }

  /** Claim the next sequence number for a method's request. */
  beginRequest(method: Method): number {
    const seq = (this.issued.get(method) ?? 0) + 1;
    this.issued.set(method, seq);
    this.inFlight.set(method, seq);
    return seq;
  }

  hasInFlight(method: Method): boolean {
    return this.inFlight.has(method);
  }

  /** Store a response unless a newer request has been issued since. */
  acceptResponse(method: Method, sequence: number, response: TransformResponse): boolean {
    if (sequence !== this.issued.get(method)) return false;
    this.inFlight.delete(method);
    this.overlays.set(method, { response, sequence });
    return true;
  }

  failRequest(method: Method, sequence: number): void {
    if (sequence === this.inFlight.get(method)) this.inFlight.delete(method);
  }

  overlay(method: Method): TransformResponse | null {
    return this.overlays.get(method)?.response ?? null;
  }

  overlayMethods(): Method[] {
    return [...this.overlays.keys()];
  }

  clearOverlays(): void {
    this.overlays.clear();
  }
}
