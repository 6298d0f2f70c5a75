/**
 * Target-map encoder mirroring the evaluator package's encode contract:
 * boxes become a Gaussian peak heatmap plus width/height and sub-cell
 * offset regression maps on a stride-4 grid.
 */

import { ChangeBox } from './manifest';
import { NamedTensor, TargetMaps } from './tensorio';

/**
 * Peak Gaussian radius for a box of the given size (map cells): one
 * third of the largest Euclidean center shift (worst-case diagonal)
 * keeping self-IoU >= 0.7, floored at 1.
 */
export function gaussianSigma(w: number, h: number, stride = 4): number {
  const wc = w / stride;
  const hc = h / stride;
  const b = wc + hc;
  const c = (3 / 17) * wc * hc;
  const u = (b - Math.sqrt(b * b - 4 * c)) / 2;
  return Math.max(1, (Math.SQRT2 * u) / 3);
}

export function encodeTargets(
  boxes: ChangeBox[],
  inputResolution: number,
  stride = 4
): TargetMaps {
  const res = Math.floor(inputResolution / stride);
  const hm = new Float32Array(res * res);
  const wh = new Float32Array(res * res * 2);
  const offset = new Float32Array(res * res * 2);

  for (const box of boxes) {
    const px = Math.min(Math.floor(box.cx / stride), res - 1);
    const py = Math.min(Math.floor(box.cy / stride), res - 1);
    const sigma = gaussianSigma(box.w, box.h, stride);
    const r = Math.ceil(3 * sigma);
    for (let y = Math.max(0, py - r); y <= Math.min(res - 1, py + r); y++) {
      for (let x = Math.max(0, px - r); x <= Math.min(res - 1, px + r); x++) {
        const d2 = (x - px) * (x - px) + (y - py) * (y - py);
        const v = Math.exp(-d2 / (2 * sigma * sigma));
        if (v > hm[y * res + x]) {
          hm[y * res + x] = v;
        }
      }
    }
    hm[py * res + px] = 1;
    const cell = (py * res + px) * 2;
    wh[cell] = box.w;
    wh[cell + 1] = box.h;
    offset[cell] = box.cx / stride - Math.floor(box.cx / stride);
    offset[cell + 1] = box.cy / stride - Math.floor(box.cy / stride);
  }

  const named = (data: Float32Array, ch: number, name: string): NamedTensor => ({
    data,
    shape: [res, res, ch],
    name,
  });
  return {
    hm: named(hm, 1, 'hm'),
    wh: named(wh, 2, 'wh'),
    offset: named(offset, 2, 'offset'),
  };
}
