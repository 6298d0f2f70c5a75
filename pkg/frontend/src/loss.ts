/**
 * Training objective mirroring the evaluator package: focal-variant
 * heatmap loss plus peak-masked L1 size and offset losses, combined as
 * total = l_hm + lambdaWh * l_wh + lambdaOffset * l_offset.
 */

import * as tf from '@tensorflow/tfjs';

export interface LossConfig {
  alpha: number;
  beta: number;
  lambdaWh: number;
  lambdaOffset: number;
  epsilon: number;
}

export const DEFAULT_LOSS: LossConfig = {
  alpha: 2,
  beta: 4,
  lambdaWh: 0.1,
  lambdaOffset: 1,
  epsilon: 1e-7,
};

export interface LossReport {
  lHm: number;
  lWh: number;
  lOffset: number;
  total: number;
  nPeaks: number;
}

/**
 * Focal-variant heatmap loss.  `yHm` and `gHm` are [B, R, R, 1]; the
 * result is normalized by the number of G == 1 cells (clamped to >= 1).
 */
export function heatmapLoss(
  yHm: tf.Tensor,
  gHm: tf.Tensor,
  cfg: LossConfig = DEFAULT_LOSS
): tf.Scalar {
  return tf.tidy(() => {
    const y = tf.clipByValue(yHm, cfg.epsilon, 1 - cfg.epsilon);
    const pos = tf.equal(gHm, 1).asType('float32');
    const neg = tf.sub(1, pos);
    const posTerms = tf
      .pow(tf.sub(1, y), cfg.alpha)
      .mul(tf.log(y))
      .mul(pos);
    const negTerms = tf
      .pow(tf.sub(1, gHm), cfg.beta)
      .mul(tf.pow(y, cfg.alpha))
      .mul(tf.log(tf.sub(1, y)))
      .mul(neg);
    const nPos = tf.maximum(tf.sum(pos), 1);
    return tf.neg(tf.sum(posTerms.add(negTerms))).div(nPos) as tf.Scalar;
  });
}

/** Mean per-peak L1 over the channels of a regression map. */
export function maskedL1(
  y: tf.Tensor,
  g: tf.Tensor,
  peakMask: tf.Tensor, // [B, R, R, 1] with 1 at peak cells
  cfg?: { minPeaks?: number }
): tf.Scalar {
  return tf.tidy(() => {
    const nPeaks = tf.sum(peakMask);
    const perCell = tf.sum(tf.abs(tf.sub(y, g)), -1, true).mul(peakMask);
    // 0 when there are no peaks, matching the evaluator's convention
    return tf.sum(perCell).div(tf.maximum(nPeaks, cfg?.minPeaks ?? 1)) as tf.Scalar;
  });
}

export interface MapTensors {
  hm: tf.Tensor; // [B, R, R, 1]
  wh: tf.Tensor; // [B, R, R, 2]
  offset: tf.Tensor; // [B, R, R, 2]
}

/** Total loss as a differentiable scalar (for optimizer.minimize). */
export function totalLossTensor(
  pred: MapTensors,
  target: MapTensors,
  cfg: LossConfig = DEFAULT_LOSS
): tf.Scalar {
  return tf.tidy(() => {
    const peakMask = tf.equal(target.hm, 1).asType('float32');
    const lHm = heatmapLoss(pred.hm, target.hm, cfg);
    const lWh = maskedL1(pred.wh, target.wh, peakMask);
    const lOff = maskedL1(pred.offset, target.offset, peakMask);
    return lHm.add(lWh.mul(cfg.lambdaWh)).add(lOff.mul(cfg.lambdaOffset)) as tf.Scalar;
  });
}

/** Component-wise report (synchronous reads; use outside hot loops). */
export function lossReport(
  pred: MapTensors,
  target: MapTensors,
  cfg: LossConfig = DEFAULT_LOSS
): LossReport {
  return tf.tidy(() => {
    const peakMask = tf.equal(target.hm, 1).asType('float32');
    const lHm = heatmapLoss(pred.hm, target.hm, cfg).dataSync()[0];
    const lWh = maskedL1(pred.wh, target.wh, peakMask).dataSync()[0];
    const lOff = maskedL1(pred.offset, target.offset, peakMask).dataSync()[0];
    const nPeaks = tf.sum(peakMask).dataSync()[0];
    return {
      lHm,
      lWh,
      lOffset: lOff,
      total: lHm + cfg.lambdaWh * lWh + cfg.lambdaOffset * lOff,
      nPeaks: Math.round(nPeaks),
    };
  });
}
