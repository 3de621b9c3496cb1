/** JSON contracts of the transform service, mirrored field for field. */

/** Axis-aligned box in normalized pixels: [cx, cy, w, h]. */
export type Box = [number, number, number, number];

export interface Keyframe {
  frame: number;
  box: Box;
}

export interface SceneSummary {
  id: string;
  frames: number;
  path_kind: string;
  context0: number[][];
}

export interface SceneListing {
  count: number;
  scenes: SceneSummary[];
}

export interface SceneDetail {
  id: string;
  scene_id: number;
  frames: number;
  grid: number;
  dct_order: number;
  path_kind: string;
  magnitude: number;
  split: string;
  b_ref: number[][];
  b_tgt: number[][];
  context0: number[][];
  depth0?: number[][];
  tracks_dct?: number[][];
}

export type Method = "model" | "interpolation" | "warp_corners" | "warp_center";

export const METHODS: Method[] = ["model", "interpolation", "warp_corners", "warp_center"];

export interface SamplerSpec {
  num_steps?: number;
  seed?: number;
}

export interface TransformRequest {
  method: Method;
  record_id?: string;
  direction?: "f2v" | "v2f";
  keyframes?: Keyframe[];
  sampler?: SamplerSpec;
}

export interface TransformResponse {
  record_id: string | null;
  method: Method;
  direction: string;
  frames: number;
  b_ref: number[][];
  b_tgt: number[][];
  per_frame_iou: number[] | null;
  mean_iou: number | null;
  checkpoint?: string;
  sampler?: { num_steps: number; seed: number };
}

export interface ServiceErrorBody {
  reason: string;
  detail?: string;
}

/** Colors keyed by method for overlays and the legend. */
export const METHOD_COLORS: Record<Method, string> = {
  model: "#e4572e",
  interpolation: "#3a86ff",
  warp_corners: "#2a9d8f",
  warp_center: "#9b5de5",
};
