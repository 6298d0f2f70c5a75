/**
 * Minimal file checkpoints: a JSON document holding the model spec,
 * training metadata, and every weight as shape + base64 float32 data.
 * Self-contained so no platform-specific save handlers are needed.
 */

import * as fs from 'fs';
import * as tf from '@tensorflow/tfjs';
import { ModelSpec, buildModel } from './model';

export class CheckpointError extends Error {}

export interface Checkpoint {
  spec: ModelSpec;
  epochsTrained: number;
}

interface WeightDoc {
  name: string;
  shape: number[];
  data: string; // base64 float32
}

export function saveCheckpoint(
  file: string,
  model: tf.LayersModel,
  spec: ModelSpec,
  epochsTrained: number
): void {
  const weights: WeightDoc[] = model.getWeights().map((w, i) => {
    const data = w.dataSync() as Float32Array;
    return {
      name: model.weights[i].name,
      shape: w.shape.slice(),
      data: Buffer.from(data.buffer, data.byteOffset, data.byteLength).toString(
        'base64'
      ),
    };
  });
  const doc = { version: 1, spec, epochsTrained, weights };
  const tmp = file + '.tmp';
  fs.writeFileSync(tmp, JSON.stringify(doc));
  fs.renameSync(tmp, file);
}

export function loadCheckpoint(file: string): {
  model: tf.LayersModel;
  spec: ModelSpec;
  epochsTrained: number;
} {
  if (!fs.existsSync(file)) {
    throw new CheckpointError(`checkpoint ${file} does not exist`);
  }
  let doc: any;
  try {
    doc = JSON.parse(fs.readFileSync(file, 'utf-8'));
  } catch (e) {
    throw new CheckpointError(`checkpoint ${file} is not valid JSON: ${e}`);
  }
  if (!doc.spec || !Array.isArray(doc.weights)) {
    throw new CheckpointError(`checkpoint ${file} is missing spec or weights`);
  }
  const spec = doc.spec as ModelSpec;
  const model = buildModel(spec);
  const expected = model.getWeights().length;
  if (expected !== doc.weights.length) {
    throw new CheckpointError(
      `checkpoint has ${doc.weights.length} weight tensors, model expects ${expected}`
    );
  }
  const restored = doc.weights.map((w: WeightDoc) => {
    const buf = Buffer.from(w.data, 'base64');
    const data = new Float32Array(
      buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength)
    );
    return tf.tensor(data, w.shape as number[]);
  });
  model.setWeights(restored);
  restored.forEach((t: tf.Tensor) => t.dispose());
  return { model, spec, epochsTrained: Number(doc.epochsTrained ?? 0) };
}
