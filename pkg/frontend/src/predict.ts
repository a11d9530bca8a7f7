/**
 * Inference: one 16-bit grayscale probability-map PNG per input image,
 * same dimensions as the input (zero-padded to the network's multiple of
 * 16 internally, cropped back on the way out).
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { TrainConfig } from './config';
import { padTo, toChannels } from './data';
import { decodePng, encodePng16 } from './png';

export function predictRaster(
  model: tf.LayersModel,
  config: TrainConfig,
  image: { width: number; height: number; channels: number; data: Float32Array },
): Float32Array {
  const { data, channels } = toChannels(image, config.channels);
  const ph = padTo(image.height, 16);
  const pw = padTo(image.width, 16);
  const padded = new Float32Array(ph * pw * channels);
  for (let y = 0; y < image.height; y++) {
    padded.set(
      data.subarray(y * image.width * channels, (y + 1) * image.width * channels),
      y * pw * channels,
    );
  }
  const scores = tf.tidy(() => {
    const xs = tf.tensor4d(padded, [1, ph, pw, channels]);
    const out = model.predict(xs) as tf.Tensor4D;
    return out.squeeze([0, 3]).clipByValue(0, 1) as tf.Tensor2D;
  });
  const full = scores.dataSync() as Float32Array;
  scores.dispose();
  const cropped = new Float32Array(image.width * image.height);
  for (let y = 0; y < image.height; y++) {
    cropped.set(full.subarray(y * pw, y * pw + image.width), y * image.width);
  }
  return cropped;
}

export function predictDirectory(
  model: tf.LayersModel,
  config: TrainConfig,
  imageDir: string,
  outDir: string,
  log: (line: string) => void = () => undefined,
): number {
  const files = fs.readdirSync(imageDir).filter((f) => f.endsWith('.png')).sort();
  if (files.length === 0) throw new Error(`no PNG images under ${imageDir}`);
  fs.mkdirSync(outDir, { recursive: true });
  for (const file of files) {
    const raster = decodePng(fs.readFileSync(path.join(imageDir, file)));
    if (padTo(raster.width, 16) !== raster.width || padTo(raster.height, 16) !== raster.height) {
      log(`${file}: padded ${raster.width}x${raster.height} to multiples of 16 and cropped back`);
    }
    const scores = predictRaster(model, config, raster);
    fs.writeFileSync(path.join(outDir, file), encodePng16(raster.width, raster.height, scores));
  }
  return files.length;
}
