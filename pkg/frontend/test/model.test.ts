import * as tf from '@tensorflow/tfjs';
import { describe, expect, it } from 'vitest';
import { ModelSpec, buildModel, forward } from '../src/model';

const SMALL: ModelSpec = { variant: 'ef', inputResolution: 64, stride: 4, baseWidth: 4 };

function rand(shape: number[]): tf.Tensor4D {
  const n = shape.reduce((a, b) => a * b, 1);
  return tf.tensor(
    Float32Array.from({ length: n }, () => Math.random()),
    shape
  ) as tf.Tensor4D;
}

describe('model variants', () => {
  it('ef consumes a 6-channel stacked pair', () => {
    const model = buildModel(SMALL);
    expect(model.inputs).toHaveLength(1);
    expect(model.inputs[0].shape.slice(1)).toEqual([64, 64, 6]);
  });

  it('diff takes two 3-channel streams', () => {
    const model = buildModel({ ...SMALL, variant: 'diff' });
    expect(model.inputs).toHaveLength(2);
    for (const input of model.inputs) {
      expect(input.shape.slice(1)).toEqual([64, 64, 3]);
    }
  });

  it('both variants expose identical stride-4 head shapes (1/2/2 channels)', () => {
    for (const variant of ['ef', 'diff'] as const) {
      const model = buildModel({ ...SMALL, variant });
      const shapes = model.outputs.map((o) => o.shape.slice(1));
      expect(shapes).toEqual([
        [16, 16, 1],
        [16, 16, 2],
        [16, 16, 2],
      ]);
    }
  });

  it('diff fused features are all zeros for identical inputs', () => {
    const model = buildModel({ ...SMALL, variant: 'diff' });
    const fuse = tf.model({
      inputs: model.inputs,
      outputs: model.getLayer('fuse').output as tf.SymbolicTensor,
    });
    const img = rand([2, 64, 64, 3]);
    const fused = fuse.apply([img, img]) as tf.Tensor;
    expect(fused.abs().max().dataSync()[0]).toBe(0);
  });

  it('hm head output stays in [0, 1]', () => {
    const model = buildModel(SMALL);
    const { hm } = forward(model, SMALL, rand([1, 64, 64, 3]), rand([1, 64, 64, 3]));
    const vals = hm.dataSync();
    for (const v of vals) {
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThanOrEqual(1);
    }
  });

  it('inference is deterministic for fixed weights and inputs', () => {
    const model = buildModel(SMALL);
    const ref = rand([1, 64, 64, 3]);
    const test = rand([1, 64, 64, 3]);
    const a = forward(model, SMALL, ref, test).hm.dataSync();
    const b = forward(model, SMALL, ref, test).hm.dataSync();
    expect(Array.from(a)).toEqual(Array.from(b));
  });

  it('rejects resolutions not divisible by the stride', () => {
    expect(() => buildModel({ ...SMALL, inputResolution: 66 })).toThrow();
  });
});
