/** Dataset manifest ingestion and PNG pair loading. */

import * as fs from 'fs';
import * as path from 'path';
import { PNG } from 'pngjs';

export class ManifestError extends Error {}

export interface ChangeBox {
  cx: number;
  cy: number;
  w: number;
  h: number;
}

export interface PairRecord {
  pairId: string;
  referencePath: string;
  testPath: string;
  boxes: ChangeBox[];
  strategyTag: string;
}

export interface Manifest {
  version: number;
  fingerprint: string;
  records: PairRecord[];
  baseDir: string;
}

export function loadManifest(manifestPath: string): Manifest {
  let doc: any;
  try {
    doc = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'));
  } catch (e) {
    throw new ManifestError(`cannot read manifest ${manifestPath}: ${e}`);
  }
  if (!doc || !Array.isArray(doc.records)) {
    throw new ManifestError(`manifest ${manifestPath} has no records array`);
  }
  const baseDir = path.dirname(manifestPath);
  const records: PairRecord[] = doc.records.map((r: any) => {
    if (!r.pair_id || !r.reference_path || !r.test_path || !Array.isArray(r.boxes)) {
      throw new ManifestError(`malformed record ${JSON.stringify(r).slice(0, 80)}`);
    }
    return {
      pairId: String(r.pair_id),
      referencePath: String(r.reference_path),
      testPath: String(r.test_path),
      strategyTag: String(r.strategy_tag ?? ''),
      boxes: r.boxes.map((b: any) => ({
        cx: Number(b.cx),
        cy: Number(b.cy),
        w: Number(b.w),
        h: Number(b.h),
      })),
    };
  });
  return {
    version: Number(doc.version ?? 0),
    fingerprint: String(doc.fingerprint ?? ''),
    records,
    baseDir,
  };
}

/** RGB image scaled to [0, 1], row-major (H, W, 3). */
export interface ImageData {
  data: Float32Array;
  width: number;
  height: number;
}

export function loadPng(file: string): ImageData {
  const png = PNG.sync.read(fs.readFileSync(file));
  const out = new Float32Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    out[i * 3] = png.data[i * 4] / 255;
    out[i * 3 + 1] = png.data[i * 4 + 1] / 255;
    out[i * 3 + 2] = png.data[i * 4 + 2] / 255;
  }
  return { data: out, width: png.width, height: png.height };
}

export interface LoadedPair {
  record: PairRecord;
  reference: ImageData;
  test: ImageData;
}

export function loadPair(manifest: Manifest, record: PairRecord): LoadedPair {
  const reference = loadPng(path.join(manifest.baseDir, record.referencePath));
  const test = loadPng(path.join(manifest.baseDir, record.testPath));
  if (reference.width !== test.width || reference.height !== test.height) {
    throw new ManifestError(
      `${record.pairId}: reference and test image sizes differ`
    );
  }
  return { record, reference, test };
}
