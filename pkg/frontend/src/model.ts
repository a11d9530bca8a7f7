/**
 * Standard encoder-decoder U-Net with skip connections: four
 * down-sampling blocks, a bottleneck, four up-sampling blocks, sigmoid
 * head. Dropout sits on the configured convolutional blocks (defaults:
 * the 4th encoder block and the 5th block, i.e. the bottleneck).
 *
 * Spatial dims are dynamic but must be multiples of 16 (four poolings);
 * the data layer pads inputs and predictions are cropped back.
 */

import * as tf from '@tensorflow/tfjs';

import { TrainConfig } from './config';

export const DEPTH_MULTIPLE = 16;

function convBlock(
  x: tf.SymbolicTensor,
  filters: number,
  blockIndex: number,
  config: TrainConfig,
): tf.SymbolicTensor {
  const seedBase = config.seed * 1000 + blockIndex * 10;
  let out = x;
  for (const step of [0, 1]) {
    out = tf.layers
      .conv2d({
        filters,
        kernelSize: 3,
        padding: 'same',
        activation: 'relu',
        kernelInitializer: tf.initializers.glorotUniform({ seed: seedBase + step }),
        name: `block${blockIndex}_conv${step}`,
      })
      .apply(out) as tf.SymbolicTensor;
  }
  if (config.dropoutBlocks.includes(blockIndex)) {
    out = tf.layers
      .dropout({ rate: config.dropout, seed: seedBase + 7, name: `block${blockIndex}_dropout` })
      .apply(out) as tf.SymbolicTensor;
  }
  return out;
}

export function buildUnet(config: TrainConfig): tf.LayersModel {
  const channels = config.channels === 'rgb' ? 3 : 1;
  const input = tf.input({ shape: [null, null, channels], name: 'image' });
  const f = config.baseFilters;

  const enc1 = convBlock(input, f, 1, config);
  const pool1 = tf.layers.maxPooling2d({ poolSize: 2, name: 'pool1' }).apply(enc1) as tf.SymbolicTensor;
  const enc2 = convBlock(pool1, f * 2, 2, config);
  const pool2 = tf.layers.maxPooling2d({ poolSize: 2, name: 'pool2' }).apply(enc2) as tf.SymbolicTensor;
  const enc3 = convBlock(pool2, f * 4, 3, config);
  const pool3 = tf.layers.maxPooling2d({ poolSize: 2, name: 'pool3' }).apply(enc3) as tf.SymbolicTensor;
  const enc4 = convBlock(pool3, f * 8, 4, config);
  const pool4 = tf.layers.maxPooling2d({ poolSize: 2, name: 'pool4' }).apply(enc4) as tf.SymbolicTensor;

  const bottleneck = convBlock(pool4, f * 16, 5, config);

  let up = bottleneck;
  const skips: [tf.SymbolicTensor, number, number][] = [
    [enc4, f * 8, 6],
    [enc3, f * 4, 7],
    [enc2, f * 2, 8],
    [enc1, f, 9],
  ];
  for (const [skip, filters, blockIndex] of skips) {
    const upsampled = tf.layers
      .upSampling2d({ size: [2, 2], name: `up${blockIndex}` })
      .apply(up) as tf.SymbolicTensor;
    const reduced = tf.layers
      .conv2d({
        filters,
        kernelSize: 2,
        padding: 'same',
        activation: 'relu',
        kernelInitializer: tf.initializers.glorotUniform({ seed: config.seed * 1000 + blockIndex * 10 + 5 }),
        name: `up${blockIndex}_conv`,
      })
      .apply(upsampled) as tf.SymbolicTensor;
    const merged = tf.layers
      .concatenate({ name: `skip${blockIndex}` })
      .apply([skip, reduced]) as tf.SymbolicTensor;
    up = convBlock(merged, filters, blockIndex, config);
  }

  const head = tf.layers
    .conv2d({
      filters: 1,
      kernelSize: 1,
      activation: 'sigmoid',
      kernelInitializer: tf.initializers.glorotUniform({ seed: config.seed * 1000 + 99 }),
      name: 'vessel_head',
    })
    .apply(up) as tf.SymbolicTensor;

  return tf.model({ inputs: input, outputs: head, name: 'unet' });
}

/** Per-pixel binary cross-entropy on probabilities, clamped at 1e-7. */
export function bceLoss(truth: tf.Tensor, probs: tf.Tensor): tf.Scalar {
  return tf.tidy(() => {
    const eps = 1e-7;
    const p = tf.clipByValue(probs, eps, 1 - eps);
    const perPixel = tf.add(
      tf.mul(truth, tf.log(p)),
      tf.mul(tf.sub(1, truth), tf.log(tf.sub(1, p))),
    );
    return tf.neg(tf.mean(perPixel)) as tf.Scalar;
  });
}

/** Soft dice loss; shipped as a named option, the published recipe uses BCE. */
export function diceLoss(truth: tf.Tensor, probs: tf.Tensor): tf.Scalar {
  return tf.tidy(() => {
    const smooth = 1.0;
    const overlap = tf.sum(tf.mul(truth, probs));
    const total = tf.add(tf.sum(truth), tf.sum(probs));
    const dice = tf.div(tf.add(tf.mul(overlap, 2), smooth), tf.add(total, smooth));
    return tf.sub(1, dice) as tf.Scalar;
  });
}

export function lossFor(name: string): (t: tf.Tensor, p: tf.Tensor) => tf.Scalar {
  if (name === 'bce') return bceLoss;
  if (name === 'dice') return diceLoss;
  if (name === 'bce+dice') {
    return (t, p) => tf.tidy(() => tf.add(bceLoss(t, p), diceLoss(t, p)) as tf.Scalar);
  }
  throw new Error(`unknown loss ${name}`);
}
