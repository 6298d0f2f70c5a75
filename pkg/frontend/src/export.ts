/** Prediction export in the shared tensor-exchange format. */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';
import { Manifest, loadPair } from './manifest';
import { ModelSpec, forward } from './model';
import { NamedTensor, readMaps, writeMaps } from './tensorio';

export class ExportError extends Error {}

/**
 * Run the model over every manifest pair and write per-pair
 * `<pair_id>_{hm,wh,offset}.t32` files into `outDir`.  Each bundle is
 * read back and shape-checked so a format bug fails loudly here rather
 * than in the downstream decoder.
 */
export function predictExport(
  model: tf.LayersModel,
  spec: ModelSpec,
  manifest: Manifest,
  outDir: string
): string[] {
  fs.mkdirSync(outDir, { recursive: true });
  const res = spec.inputResolution;
  const mapRes = res / spec.stride;
  const prefixes: string[] = [];

  for (const record of manifest.records) {
    const pair = loadPair(manifest, record);
    if (pair.reference.width !== res || pair.reference.height !== res) {
      throw new ExportError(
        `${record.pairId}: image is ${pair.reference.width}x${pair.reference.height}, ` +
          `model expects ${res}x${res}`
      );
    }
    const maps = tf.tidy(() => {
      const ref = tf.tensor4d(pair.reference.data, [1, res, res, 3]);
      const test = tf.tensor4d(pair.test.data, [1, res, res, 3]);
      const out = forward(model, spec, ref, test);
      return {
        hm: out.hm.dataSync() as Float32Array,
        wh: out.wh.dataSync() as Float32Array,
        offset: out.offset.dataSync() as Float32Array,
      };
    });
    const named = (data: Float32Array, ch: number, name: string): NamedTensor => ({
      data,
      shape: [mapRes, mapRes, ch],
      name,
    });
    const prefix = path.join(outDir, record.pairId);
    writeMaps(prefix, {
      hm: named(maps.hm, 1, 'hm'),
      wh: named(maps.wh, 2, 'wh'),
      offset: named(maps.offset, 2, 'offset'),
    });
    const back = readMaps(prefix); // round-trip self-check
    if (back.hm.shape[0] !== mapRes || back.hm.shape[1] !== mapRes) {
      throw new ExportError(`${record.pairId}: exported maps failed readback`);
    }
    prefixes.push(prefix);
  }
  return prefixes;
}
