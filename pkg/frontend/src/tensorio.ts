/**
 * Tensor-exchange file format shared with the evaluator package.
 *
 * One file per map: a single JSON header line
 * `{"shape": [R, R, C], "dtype": "f32", "order": "row-major", "name": ...}`
 * terminated by a newline, followed by the raw little-endian float32
 * payload in row-major order.
 */

import * as fs from 'fs';
import * as path from 'path';

export class TensorFormatError extends Error {}

export interface NamedTensor {
  data: Float32Array;
  shape: [number, number, number];
  name: string;
}

export function writeTensor(
  file: string,
  data: Float32Array,
  shape: [number, number, number],
  name: string
): void {
  const count = shape[0] * shape[1] * shape[2];
  if (data.length !== count) {
    throw new TensorFormatError(
      `data length ${data.length} does not match shape [${shape.join(', ')}]`
    );
  }
  const header = Buffer.from(
    JSON.stringify({ shape, dtype: 'f32', order: 'row-major', name }) + '\n',
    'utf-8'
  );
  // float32 payloads are little-endian on every platform node supports
  const payload = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  // write atomically: a crashed export must not leave a truncated file
  const tmp = file + '.tmp';
  fs.writeFileSync(tmp, Buffer.concat([header, payload]));
  fs.renameSync(tmp, file);
}

export function readTensor(file: string): NamedTensor {
  const raw = fs.readFileSync(file);
  const nl = raw.indexOf(0x0a);
  if (nl < 0) {
    throw new TensorFormatError(`${file}: missing header line`);
  }
  let header: any;
  try {
    header = JSON.parse(raw.subarray(0, nl).toString('utf-8'));
  } catch (e) {
    throw new TensorFormatError(`${file}: bad header line: ${e}`);
  }
  if (header.dtype !== 'f32' || header.order !== 'row-major') {
    throw new TensorFormatError(
      `${file}: unsupported dtype/order ${header.dtype}/${header.order}`
    );
  }
  if (!Array.isArray(header.shape) || header.shape.length !== 3) {
    throw new TensorFormatError(`${file}: expected a 3-D shape`);
  }
  const shape = header.shape.map(Number) as [number, number, number];
  const count = shape[0] * shape[1] * shape[2];
  const payload = raw.subarray(nl + 1);
  if (payload.length !== count * 4) {
    throw new TensorFormatError(
      `${file}: payload has ${payload.length} bytes, expected ${count * 4}`
    );
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = payload.readFloatLE(i * 4);
  }
  return { data, shape, name: String(header.name ?? '') };
}

export interface TargetMaps {
  hm: NamedTensor; // (R, R, 1)
  wh: NamedTensor; // (R, R, 2)
  offset: NamedTensor; // (R, R, 2)
}

export function writeMaps(prefix: string, maps: TargetMaps): void {
  writeTensor(`${prefix}_hm.t32`, maps.hm.data, maps.hm.shape, 'hm');
  writeTensor(`${prefix}_wh.t32`, maps.wh.data, maps.wh.shape, 'wh');
  writeTensor(`${prefix}_offset.t32`, maps.offset.data, maps.offset.shape, 'offset');
}

export function readMaps(prefix: string): TargetMaps {
  const hm = readTensor(`${prefix}_hm.t32`);
  const wh = readTensor(`${prefix}_wh.t32`);
  const offset = readTensor(`${prefix}_offset.t32`);
  if (hm.shape[2] !== 1 || wh.shape[2] !== 2 || offset.shape[2] !== 2) {
    throw new TensorFormatError(
      `${prefix}: channel counts must be 1/2/2, got ` +
        `${hm.shape[2]}/${wh.shape[2]}/${offset.shape[2]}`
    );
  }
  return { hm, wh, offset };
}

/** Map-file prefixes (sorted) for every pair in a directory of exports. */
export function listMapPrefixes(dir: string): string[] {
  const suffix = '_hm.t32';
  return fs
    .readdirSync(dir)
    .filter((f) => f.endsWith(suffix))
    .map((f) => path.join(dir, f.slice(0, -suffix.length)))
    .sort();
}
