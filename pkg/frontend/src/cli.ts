#!/usr/bin/env node
/**
 * trainbridge CLI: train / export / protocol / loss.
 *
 * Consumes manifest JSON and tensor-exchange files produced by the
 * evaluator package; emits checkpoints, exported prediction maps, and a
 * JSON training log.
 */

import * as fs from 'fs';
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';
import { loadCheckpoint, saveCheckpoint } from './checkpoint';
import { DEFAULT_LOSS, lossReport } from './loss';
import { loadManifest } from './manifest';
import { DEFAULT_SPEC, ModelSpec, Variant, buildModel } from './model';
import { predictExport } from './export';
import { ProtocolMode, protocolRun } from './protocol';
import { DEFAULT_TRAIN, TrainConfig, loadSamples, train } from './train';
import { readMaps } from './tensorio';
import * as tf from '@tensorflow/tfjs';

function specFromArgs(argv: any): ModelSpec {
  return {
    ...DEFAULT_SPEC,
    variant: (argv.variant as Variant) ?? DEFAULT_SPEC.variant,
    inputResolution: argv.resolution ?? DEFAULT_SPEC.inputResolution,
    baseWidth: argv.width ?? DEFAULT_SPEC.baseWidth,
  };
}

function trainConfigFromArgs(argv: any): TrainConfig {
  return {
    ...DEFAULT_TRAIN,
    learningRate: argv.lr ?? DEFAULT_TRAIN.learningRate,
    epochs: argv.epochs ?? DEFAULT_TRAIN.epochs,
    batchSize: argv.batch ?? DEFAULT_TRAIN.batchSize,
    augment: argv.augment ?? DEFAULT_TRAIN.augment,
    seed: argv.seed ?? DEFAULT_TRAIN.seed,
  };
}

function writeLog(path: string | undefined, log: object): void {
  if (path) {
    fs.writeFileSync(path, JSON.stringify(log, null, 2) + '\n');
  }
}

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .command(
      'train',
      'train a model on a dataset manifest',
      (y) =>
        y
          .option('manifest', { type: 'string', demandOption: true })
          .option('checkpoint', { type: 'string', demandOption: true })
          .option('log', { type: 'string' })
          .option('variant', { choices: ['ef', 'diff'] as const, default: 'ef' })
          .option('resolution', { type: 'number', default: 512 })
          .option('width', { type: 'number', default: 16 })
          .option('lr', { type: 'number' })
          .option('epochs', { type: 'number' })
          .option('batch', { type: 'number' })
          .option('augment', { type: 'boolean' })
          .option('seed', { type: 'number' }),
      (argv) => {
        const spec = specFromArgs(argv);
        const cfg = trainConfigFromArgs(argv);
        const samples = loadSamples(loadManifest(argv.manifest));
        const { model, log } = train(samples, spec, cfg, DEFAULT_LOSS, undefined, (e) =>
          console.log(
            `epoch ${e.epoch}: total=${e.total.toFixed(4)} hm=${e.lHm.toFixed(4)} ` +
              `wh=${e.lWh.toFixed(4)} offset=${e.lOffset.toFixed(4)} lr=${e.learningRate}`
          )
        );
        saveCheckpoint(argv.checkpoint, model, spec, cfg.epochs);
        writeLog(argv.log, log);
      }
    )
    .command(
      'export',
      'export prediction maps for every pair in a manifest',
      (y) =>
        y
          .option('checkpoint', { type: 'string', demandOption: true })
          .option('manifest', { type: 'string', demandOption: true })
          .option('out', { type: 'string', demandOption: true }),
      (argv) => {
        const { model, spec } = loadCheckpoint(argv.checkpoint);
        const prefixes = predictExport(model, spec, loadManifest(argv.manifest), argv.out);
        console.log(`exported ${prefixes.length} map bundles to ${argv.out}`);
      }
    )
    .command(
      'protocol',
      'few-sample adaptation: fine-tune, mixture, or scratch',
      (y) =>
        y
          .option('mode', {
            choices: ['fine-tune', 'mixture', 'scratch'] as const,
            demandOption: true,
          })
          .option('few-manifest', { type: 'string', demandOption: true })
          .option('synth-manifest', { type: 'string' })
          .option('base-checkpoint', { type: 'string' })
          .option('checkpoint', { type: 'string', demandOption: true })
          .option('log', { type: 'string' })
          .option('variant', { choices: ['ef', 'diff'] as const, default: 'ef' })
          .option('resolution', { type: 'number', default: 512 })
          .option('width', { type: 'number', default: 16 })
          .option('lr', { type: 'number' })
          .option('epochs', { type: 'number' })
          .option('batch', { type: 'number' })
          .option('augment', { type: 'boolean' })
          .option('seed', { type: 'number' }),
      (argv) => {
        const result = protocolRun({
          mode: argv.mode as ProtocolMode,
          spec: specFromArgs(argv),
          trainConfig: trainConfigFromArgs(argv),
          fewManifest: loadManifest(argv['few-manifest'] as string),
          synthManifest: argv['synth-manifest']
            ? loadManifest(argv['synth-manifest'] as string)
            : undefined,
          baseCheckpoint: argv['base-checkpoint'] as string | undefined,
        });
        saveCheckpoint(
          argv.checkpoint,
          result.model,
          specFromArgs(argv),
          trainConfigFromArgs(argv).epochs
        );
        writeLog(argv.log, result.log);
        console.log(`trained on ${result.datasetSize} samples (${argv.mode})`);
      }
    )
    .command(
      'loss',
      'loss report for prediction vs target tensor-file prefixes',
      (y) =>
        y
          .option('pred', { type: 'string', demandOption: true })
          .option('target', { type: 'string', demandOption: true }),
      (argv) => {
        const pred = readMaps(argv.pred);
        const target = readMaps(argv.target);
        const toTensor = (t: { data: Float32Array; shape: [number, number, number] }) =>
          tf.tensor4d(t.data, [1, ...t.shape]);
        const report = lossReport(
          { hm: toTensor(pred.hm), wh: toTensor(pred.wh), offset: toTensor(pred.offset) },
          {
            hm: toTensor(target.hm),
            wh: toTensor(target.wh),
            offset: toTensor(target.offset),
          }
        );
        console.log(
          JSON.stringify(
            {
              l_hm: report.lHm,
              l_wh: report.lWh,
              l_offset: report.lOffset,
              total: report.total,
              n_peaks: report.nPeaks,
            },
            null,
            2
          )
        );
      }
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      console.error(`error: ${msg ?? err?.message}`);
      process.exit(err && !msg ? 2 : 1);
    })
    .parse();
}

main();
