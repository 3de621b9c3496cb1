/** Grayscale rendering of the first-frame inverse-depth grid. */

export interface GrayImage {
  width: number;
  height: number;
  /** RGBA bytes, row-major, length width*height*4. */
  data: Uint8ClampedArray<ArrayBuffer>;
}

/** Min-max normalize the grid into RGBA grayscale (near = bright). */
export function contextToImage(context0: number[][]): GrayImage {
  const height = context0.length;
  const width = height > 0 ? context0[0]!.length : 0;
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of context0) {
    for (const v of row) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  const span = hi > lo ? hi - lo : 1;
  const data = new Uint8ClampedArray(width * height * 4);
  let p = 0;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const g = Math.round(((context0[y]![x]! - lo) / span) * 255);
      data[p] = g;
      data[p + 1] = g;
      data[p + 2] = g;
      data[p + 3] = 255;
      p += 4;
    }
  }
  return { width, height, data };
}
