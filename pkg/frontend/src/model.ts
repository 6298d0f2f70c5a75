/**
 * The two detector variants.
 *
 * Both map a reference/test image pair to three prediction heads on a
 * stride-4 grid: hm (1 channel, sigmoid), wh (2 channels), offset
 * (2 channels).  "ef" stacks the pair into a 6-channel input before any
 * processing; "diff" runs twin shared-weight encoders and fuses them by
 * elementwise absolute difference.  The shared trunk is a stride-4
 * convolutional stem followed by a small encoder-decoder with skip
 * connections (4 down / 4 up blocks); exact widths are pinned here, not
 * by the architecture family.
 */

import * as tf from '@tensorflow/tfjs';

export type Variant = 'ef' | 'diff';

export interface ModelSpec {
  variant: Variant;
  inputResolution: number; // square, divisible by the stride
  stride: number;
  baseWidth: number;
}

export const DEFAULT_SPEC: ModelSpec = {
  variant: 'ef',
  inputResolution: 512,
  stride: 4,
  baseWidth: 16,
};

/** Multiply by a fixed constant (no trainable state). */
class ConstScale extends tf.layers.Layer {
  static className = 'ConstScale';
  scale: number;

  constructor(config: { scale: number; name?: string }) {
    super(config as any);
    this.scale = config.scale;
  }

  computeOutputShape(inputShape: tf.Shape): tf.Shape {
    return inputShape;
  }

  call(inputs: tf.Tensor | tf.Tensor[]): tf.Tensor {
    const x = Array.isArray(inputs) ? inputs[0] : inputs;
    return tf.tidy(() => tf.mul(x, this.scale));
  }

  getConfig() {
    return { ...super.getConfig(), scale: this.scale };
  }
}
tf.serialization.registerClass(ConstScale);

/** Elementwise |a - b| merge for the siamese variant. */
class AbsDiff extends tf.layers.Layer {
  static className = 'AbsDiff';

  computeOutputShape(inputShape: tf.Shape[]): tf.Shape {
    return inputShape[0];
  }

  call(inputs: tf.Tensor[]): tf.Tensor {
    return tf.tidy(() => tf.abs(tf.sub(inputs[0], inputs[1])));
  }
}
tf.serialization.registerClass(AbsDiff);

// weight init is seeded per layer (construction order is fixed) so a
// given spec always builds the same network and training is reproducible
function convFactory() {
  let seed = 1;
  return (filters: number, stride = 1, name?: string) =>
    tf.layers.conv2d({
      filters,
      kernelSize: 3,
      strides: stride,
      padding: 'same',
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed++ }),
      name,
    });
}

type Conv = ReturnType<typeof convFactory>;

/** Stride-4 stem as shared layers (reused across both siamese streams). */
function buildStem(spec: ModelSpec, conv: Conv): tf.layers.Layer[] {
  return [
    conv(spec.baseWidth, 2, 'stem1'),
    conv(spec.baseWidth, 2, 'stem2'),
  ];
}

function applyAll(layers: tf.layers.Layer[], x: tf.SymbolicTensor): tf.SymbolicTensor {
  let out = x;
  for (const layer of layers) {
    out = layer.apply(out) as tf.SymbolicTensor;
  }
  return out;
}

export function buildModel(spec: ModelSpec = DEFAULT_SPEC): tf.LayersModel {
  if (spec.inputResolution % spec.stride !== 0) {
    throw new Error(
      `input resolution ${spec.inputResolution} not divisible by stride ${spec.stride}`
    );
  }
  const res = spec.inputResolution;
  const conv = convFactory();
  const stem = buildStem(spec, conv);

  let fused: tf.SymbolicTensor;
  let inputs: tf.SymbolicTensor[];
  if (spec.variant === 'ef') {
    const input = tf.input({ shape: [res, res, 6], name: 'pair' });
    inputs = [input];
    fused = applyAll(stem, input);
  } else {
    const ref = tf.input({ shape: [res, res, 3], name: 'reference' });
    const test = tf.input({ shape: [res, res, 3], name: 'test' });
    inputs = [ref, test];
    fused = new AbsDiff({ name: 'fuse' }).apply([
      applyAll(stem, ref),
      applyAll(stem, test),
    ]) as tf.SymbolicTensor;
  }

  // encoder: 4 down blocks with skips (fewer when the stride-4 feature
  // map is too small to halve four times)
  const mapRes = res / spec.stride;
  let depth = 0;
  for (let r = mapRes; depth < 4 && r % 2 === 0 && r > 1; r /= 2) {
    depth++;
  }
  const widths = Array.from({ length: depth }, (_, i) => spec.baseWidth * (i + 1));
  const skips: tf.SymbolicTensor[] = [];
  let x = fused;
  for (let i = 0; i < widths.length; i++) {
    x = conv(widths[i], 1, `down${i}`).apply(x) as tf.SymbolicTensor;
    skips.push(x);
    x = tf.layers
      .maxPooling2d({ poolSize: 2, name: `pool${i}` })
      .apply(x) as tf.SymbolicTensor;
  }
  x = conv(widths[widths.length - 1], 1, 'bottleneck').apply(x) as tf.SymbolicTensor;

  // decoder: 4 up blocks, concatenating the matching skip
  for (let i = widths.length - 1; i >= 0; i--) {
    x = tf.layers
      .upSampling2d({ size: [2, 2], name: `up${i}` })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers
      .concatenate({ name: `skip${i}` })
      .apply([x, skips[i]]) as tf.SymbolicTensor;
    x = conv(widths[i], 1, `dec${i}`).apply(x) as tf.SymbolicTensor;
  }

  const neck = conv(spec.baseWidth, 1, 'neck').apply(x) as tf.SymbolicTensor;
  let headSeed = 101;
  const head = (filters: number, activation: any, name: string, biasInit = 0) =>
    tf.layers
      .conv2d({
        filters,
        kernelSize: 1,
        activation,
        name,
        kernelInitializer: tf.initializers.glorotUniform({ seed: headSeed++ }),
        biasInitializer: tf.initializers.constant({ value: biasInit }),
      })
      .apply(neck) as tf.SymbolicTensor;

  // the wh head regresses box sizes in input pixels; a fixed rescale
  // keeps its pre-scale activations O(1) so optimization is well-conditioned
  const whScale = spec.inputResolution / 4;
  const wh = new ConstScale({ scale: whScale, name: 'wh' }).apply(
    head(2, 'linear', 'wh_raw')
  ) as tf.SymbolicTensor;

  const model = tf.model({
    inputs,
    // hm bias starts at -2.19 (sigmoid ~= 0.1) so the focal loss does not
    // hammer the shared trunk with huge background gradients early on
    outputs: [head(1, 'sigmoid', 'hm', -2.19), wh, head(2, 'linear', 'offset')],
    name: `cunet-${spec.variant}`,
  });
  return model;
}

/** Run the model on batched inputs, returning the three head tensors. */
export function forward(
  model: tf.LayersModel,
  spec: ModelSpec,
  reference: tf.Tensor4D,
  test: tf.Tensor4D
): { hm: tf.Tensor4D; wh: tf.Tensor4D; offset: tf.Tensor4D } {
  const inputs =
    spec.variant === 'ef' ? tf.concat([reference, test], -1) : [reference, test];
  const [hm, wh, offset] = model.apply(inputs, {}) as tf.Tensor4D[];
  if (spec.variant === 'ef') {
    (inputs as tf.Tensor).dispose?.();
  }
  return { hm, wh, offset };
}
