/**
 * Model artifact on disk: model.json (topology + weight specs),
 * weights.bin, and train-config.json with the exact configuration the
 * model was trained under.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { serializeConfig, TrainConfig, validateConfig, withDefaults } from './config';

export async function saveModel(model: tf.LayersModel, config: TrainConfig, dir: string): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      fs.writeFileSync(
        path.join(dir, 'model.json'),
        JSON.stringify({ modelTopology: artifacts.modelTopology, weightSpecs: artifacts.weightSpecs }),
      );
      const weights = artifacts.weightData as ArrayBuffer;
      fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(weights));
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } };
    }),
  );
  fs.writeFileSync(path.join(dir, 'train-config.json'), serializeConfig(config));
}

export async function loadModel(dir: string): Promise<{ model: tf.LayersModel; config: TrainConfig }> {
  const manifest = JSON.parse(fs.readFileSync(path.join(dir, 'model.json'), 'utf-8'));
  const weightData = fs.readFileSync(path.join(dir, 'weights.bin'));
  const model = await tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: manifest.modelTopology,
      weightSpecs: manifest.weightSpecs,
      weightData: weightData.buffer.slice(weightData.byteOffset, weightData.byteOffset + weightData.byteLength),
    }),
  );
  const config = validateConfig(
    withDefaults(JSON.parse(fs.readFileSync(path.join(dir, 'train-config.json'), 'utf-8'))),
  );
  return { model, config };
}
