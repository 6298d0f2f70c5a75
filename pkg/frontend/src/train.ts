/** Training loop: data assembly, augmentation, and the epoch schedule. */

import * as tf from '@tensorflow/tfjs';
import { encodeTargets } from './codec';
import { DEFAULT_LOSS, LossConfig, lossReport, totalLossTensor } from './loss';
import { ChangeBox, Manifest, PairRecord, loadPair } from './manifest';
import { ModelSpec, buildModel, forward } from './model';

export interface TrainConfig {
  learningRate: number;
  epochs: number;
  lrDropEvery: number; // epochs between x lrDropFactor decays
  lrDropFactor: number;
  batchSize: number;
  augment: boolean; // random flips + per-channel color jitter
  seed: number;
  fineTuneFraction: number; // share of a dataset treated as "few samples"
}

export const DEFAULT_TRAIN: TrainConfig = {
  learningRate: 1e-4,
  epochs: 240,
  lrDropEvery: 80,
  lrDropFactor: 0.1,
  batchSize: 32,
  augment: true,
  seed: 0,
  fineTuneFraction: 0.1,
};

export function checkConfig(cfg: TrainConfig): void {
  if (
    cfg.learningRate <= 0 ||
    cfg.epochs <= 0 ||
    cfg.lrDropEvery <= 0 ||
    cfg.lrDropFactor <= 0 ||
    cfg.batchSize <= 0
  ) {
    throw new Error('all training hyperparameters must be positive');
  }
}

export interface Sample {
  reference: Float32Array; // (res, res, 3) in [0, 1]
  test: Float32Array;
  boxes: ChangeBox[];
  pairId: string;
}

export function loadSamples(manifest: Manifest, records?: PairRecord[]): Sample[] {
  return (records ?? manifest.records).map((record) => {
    const pair = loadPair(manifest, record);
    return {
      reference: pair.reference.data,
      test: pair.test.data,
      boxes: record.boxes,
      pairId: record.pairId,
    };
  });
}

export interface EpochLog {
  epoch: number;
  learningRate: number;
  lHm: number;
  lWh: number;
  lOffset: number;
  total: number;
}

/** Small deterministic PRNG so augmentation is reproducible. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function flipImageH(img: Float32Array, res: number): Float32Array {
  const out = new Float32Array(img.length);
  for (let y = 0; y < res; y++) {
    for (let x = 0; x < res; x++) {
      const src = (y * res + x) * 3;
      const dst = (y * res + (res - 1 - x)) * 3;
      out[dst] = img[src];
      out[dst + 1] = img[src + 1];
      out[dst + 2] = img[src + 2];
    }
  }
  return out;
}

function jitter(img: Float32Array, gains: [number, number, number]): Float32Array {
  const out = new Float32Array(img.length);
  for (let i = 0; i < img.length; i += 3) {
    out[i] = Math.min(1, img[i] * gains[0]);
    out[i + 1] = Math.min(1, img[i + 1] * gains[1]);
    out[i + 2] = Math.min(1, img[i + 2] * gains[2]);
  }
  return out;
}

function augmentSample(s: Sample, res: number, rand: () => number): Sample {
  let { reference, test, boxes } = s;
  if (rand() < 0.5) {
    reference = flipImageH(reference, res);
    test = flipImageH(test, res);
    boxes = boxes.map((b) => ({ ...b, cx: res - b.cx }));
  }
  const gains: [number, number, number] = [
    0.9 + 0.2 * rand(),
    0.9 + 0.2 * rand(),
    0.9 + 0.2 * rand(),
  ];
  const side = rand() < 0.5;
  return {
    reference: side ? jitter(reference, gains) : reference,
    test: side ? test : jitter(test, gains),
    boxes,
    pairId: s.pairId,
  };
}

interface Batch {
  reference: tf.Tensor4D;
  test: tf.Tensor4D;
  hm: tf.Tensor4D;
  wh: tf.Tensor4D;
  offset: tf.Tensor4D;
}

function makeBatch(samples: Sample[], spec: ModelSpec): Batch {
  const res = spec.inputResolution;
  const mapRes = res / spec.stride;
  const n = samples.length;
  const ref = new Float32Array(n * res * res * 3);
  const tst = new Float32Array(n * res * res * 3);
  const hm = new Float32Array(n * mapRes * mapRes);
  const wh = new Float32Array(n * mapRes * mapRes * 2);
  const off = new Float32Array(n * mapRes * mapRes * 2);
  samples.forEach((s, i) => {
    ref.set(s.reference, i * res * res * 3);
    tst.set(s.test, i * res * res * 3);
    const t = encodeTargets(s.boxes, res, spec.stride);
    hm.set(t.hm.data, i * mapRes * mapRes);
    wh.set(t.wh.data, i * mapRes * mapRes * 2);
    off.set(t.offset.data, i * mapRes * mapRes * 2);
  });
  return {
    reference: tf.tensor4d(ref, [n, res, res, 3]),
    test: tf.tensor4d(tst, [n, res, res, 3]),
    hm: tf.tensor4d(hm, [n, mapRes, mapRes, 1]),
    wh: tf.tensor4d(wh, [n, mapRes, mapRes, 2]),
    offset: tf.tensor4d(off, [n, mapRes, mapRes, 2]),
  };
}

function disposeBatch(b: Batch): void {
  b.reference.dispose();
  b.test.dispose();
  b.hm.dispose();
  b.wh.dispose();
  b.offset.dispose();
}

export interface TrainResult {
  model: tf.LayersModel;
  log: EpochLog[];
}

/**
 * Train on the given samples; pass an existing model to continue
 * training (fine-tuning), otherwise a fresh one is built from the spec.
 */
export function train(
  samples: Sample[],
  spec: ModelSpec,
  cfg: TrainConfig = DEFAULT_TRAIN,
  lossCfg: LossConfig = DEFAULT_LOSS,
  model?: tf.LayersModel,
  onEpoch?: (log: EpochLog) => void
): TrainResult {
  checkConfig(cfg);
  if (samples.length === 0) {
    throw new Error('no training samples');
  }
  const net = model ?? buildModel(spec);
  const rand = mulberry32(cfg.seed);
  const log: EpochLog[] = [];
  let lr = cfg.learningRate;
  let optimizer = tf.train.adam(lr);

  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    if (epoch > 0 && epoch % cfg.lrDropEvery === 0) {
      lr *= cfg.lrDropFactor;
      optimizer.dispose();
      optimizer = tf.train.adam(lr);
    }
    // deterministic shuffle
    const order = samples.map((_, i) => i);
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(rand() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    const sums = { lHm: 0, lWh: 0, lOffset: 0, total: 0 };
    let nBatches = 0;
    for (let start = 0; start < order.length; start += cfg.batchSize) {
      const slice = order
        .slice(start, start + cfg.batchSize)
        .map((i) =>
          cfg.augment
            ? augmentSample(samples[i], spec.inputResolution, rand)
            : samples[i]
        );
      const batch = makeBatch(slice, spec);
      const target = { hm: batch.hm, wh: batch.wh, offset: batch.offset };
      // capture the component breakdown from the same forward pass the
      // optimizer differentiates, so logging costs no extra inference
      let report = { lHm: 0, lWh: 0, lOffset: 0, total: 0, nPeaks: 0 };
      optimizer.minimize(() => {
        const pred = forward(net, spec, batch.reference, batch.test);
        report = lossReport(pred, target, lossCfg);
        return totalLossTensor(pred, target, lossCfg);
      }, false);
      sums.lHm += report.lHm;
      sums.lWh += report.lWh;
      sums.lOffset += report.lOffset;
      sums.total += report.total;
      nBatches++;
      disposeBatch(batch);
    }
    const entry: EpochLog = {
      epoch,
      learningRate: lr,
      lHm: sums.lHm / nBatches,
      lWh: sums.lWh / nBatches,
      lOffset: sums.lOffset / nBatches,
      total: sums.total / nBatches,
    };
    log.push(entry);
    onEpoch?.(entry);
  }
  optimizer.dispose();
  return { model: net, log };
}
