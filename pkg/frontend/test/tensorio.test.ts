import { execFileSync } from 'child_process';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import { afterAll, describe, expect, it } from 'vitest';
import {
  TensorFormatError,
  listMapPrefixes,
  readMaps,
  readTensor,
  writeMaps,
  writeTensor,
} from '../src/tensorio';

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'tbio-'));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

function randomTensor(count: number): Float32Array {
  return Float32Array.from({ length: count }, () => Math.random() * 10 - 5);
}

describe('tensor files', () => {
  it('round-trips values, shape, and name', () => {
    const data = randomTensor(8 * 8 * 2);
    const file = path.join(tmp, 'a.t32');
    writeTensor(file, data, [8, 8, 2], 'wh');
    const back = readTensor(file);
    expect(back.name).toBe('wh');
    expect(back.shape).toEqual([8, 8, 2]);
    expect(Array.from(back.data)).toEqual(Array.from(data));
  });

  it('writes a single JSON header line before the payload', () => {
    const file = path.join(tmp, 'b.t32');
    writeTensor(file, new Float32Array(4), [2, 2, 1], 'hm');
    const raw = fs.readFileSync(file);
    const header = JSON.parse(raw.subarray(0, raw.indexOf(0x0a)).toString());
    expect(header).toEqual({
      shape: [2, 2, 1],
      dtype: 'f32',
      order: 'row-major',
      name: 'hm',
    });
    expect(raw.length - raw.indexOf(0x0a) - 1).toBe(16);
  });

  it('rejects truncated payloads', () => {
    const file = path.join(tmp, 'c.t32');
    writeTensor(file, new Float32Array(9), [3, 3, 1], 'x');
    fs.writeFileSync(file, fs.readFileSync(file).subarray(0, -4));
    expect(() => readTensor(file)).toThrow(TensorFormatError);
  });

  it('rejects length/shape mismatches on write', () => {
    expect(() =>
      writeTensor(path.join(tmp, 'd.t32'), new Float32Array(5), [2, 2, 1], 'x')
    ).toThrow(TensorFormatError);
  });

  it('lists map prefixes in sorted order', () => {
    const dir = fs.mkdtempSync(path.join(tmp, 'maps-'));
    for (const id of ['p_2', 'p_0', 'p_1']) {
      writeMaps(path.join(dir, id), {
        hm: { data: new Float32Array(4), shape: [2, 2, 1], name: 'hm' },
        wh: { data: new Float32Array(8), shape: [2, 2, 2], name: 'wh' },
        offset: { data: new Float32Array(8), shape: [2, 2, 2], name: 'offset' },
      });
    }
    expect(listMapPrefixes(dir).map((p) => path.basename(p))).toEqual([
      'p_0',
      'p_1',
      'p_2',
    ]);
  });

  it('parses files written by the evaluator package', () => {
    const prefix = path.join(tmp, 'xlang');
    execFileSync('python3', [
      '-c',
      `
import numpy as np
from changeforge.codec import ChangeBox, CodecConfig, encode_targets
from changeforge.tensorio import write_maps
cfg = CodecConfig(input_resolution=64, map_resolution=16, stride=4)
maps = encode_targets([ChangeBox(cx=30, cy=26, w=20, h=16)], cfg)
write_maps(maps, ${JSON.stringify(prefix)})
`,
    ]);
    const maps = readMaps(prefix);
    expect(maps.hm.shape).toEqual([16, 16, 1]);
    // peak cell (7, 6) row-major, value exactly 1
    expect(maps.hm.data[6 * 16 + 7]).toBe(1);
    expect(maps.wh.data[(6 * 16 + 7) * 2]).toBe(20);
    expect(maps.wh.data[(6 * 16 + 7) * 2 + 1]).toBe(16);
  });
});
