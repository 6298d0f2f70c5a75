/** Few-sample adaptation protocols: fine-tune, mixture, and scratch. */

import { loadCheckpoint } from './checkpoint';
import { LossConfig, DEFAULT_LOSS } from './loss';
import { Manifest, PairRecord } from './manifest';
import { ModelSpec } from './model';
import { EpochLog, Sample, TrainConfig, loadSamples, train } from './train';

export type ProtocolMode = 'fine-tune' | 'mixture' | 'scratch';

export class ProtocolError extends Error {}

/** Deterministic few-sample slice: the first ceil(fraction * n) records. */
export function fewSampleSlice(manifest: Manifest, fraction: number): PairRecord[] {
  if (fraction <= 0 || fraction > 1) {
    throw new ProtocolError(`fine-tune fraction ${fraction} outside (0, 1]`);
  }
  const n = Math.max(1, Math.ceil(manifest.records.length * fraction));
  return manifest.records.slice(0, n);
}

export interface ProtocolOptions {
  mode: ProtocolMode;
  spec: ModelSpec;
  trainConfig: TrainConfig;
  lossConfig?: LossConfig;
  fewManifest: Manifest;
  fewRecords?: PairRecord[]; // default: all records of fewManifest
  synthManifest?: Manifest; // required for mixture
  baseCheckpoint?: string; // required for fine-tune
  onEpoch?: (log: EpochLog) => void;
}

export interface ProtocolResult {
  model: import('@tensorflow/tfjs').LayersModel;
  log: EpochLog[];
  datasetSize: number;
}

export function protocolRun(opts: ProtocolOptions): ProtocolResult {
  const lossCfg = opts.lossConfig ?? DEFAULT_LOSS;
  const few = loadSamples(opts.fewManifest, opts.fewRecords);

  let samples: Sample[];
  let base;
  switch (opts.mode) {
    case 'scratch':
      samples = few;
      break;
    case 'mixture': {
      if (!opts.synthManifest) {
        throw new ProtocolError('mixture requires a synthetic manifest');
      }
      // train fresh on the union of few samples and the synthetic set
      samples = few.concat(loadSamples(opts.synthManifest));
      break;
    }
    case 'fine-tune': {
      if (!opts.baseCheckpoint) {
        throw new ProtocolError('fine-tune requires a base checkpoint');
      }
      base = loadCheckpoint(opts.baseCheckpoint);
      samples = few;
      break;
    }
    default:
      throw new ProtocolError(`unknown protocol mode ${opts.mode}`);
  }

  const { model, log } = train(
    samples,
    base?.spec ?? opts.spec,
    opts.trainConfig,
    lossCfg,
    base?.model,
    opts.onEpoch
  );
  return { model, log, datasetSize: samples.length };
}
