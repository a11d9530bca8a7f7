/**
 * Training loop: Adam on binary cross-entropy over bucketed mini-batches,
 * no schedule, no pre-trained weights. Every epoch appends a line to the
 * run log (JSONL), and the header records the full configuration plus
 * which fields differ from the published defaults.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { overriddenFields, TrainConfig } from './config';
import { bucketBatches, listDataset, loadSample, LoadedSample, makeRandom } from './data';
import { saveModel } from './io';
import { buildUnet, lossFor } from './model';

export interface TrainResult {
  modelDir: string;
  runLogPath: string;
  epochLosses: number[];
}

function stackBatch(samples: LoadedSample[]): { xs: tf.Tensor4D; ys: tf.Tensor4D } {
  const [h, w, c] = [samples[0].paddedHeight, samples[0].paddedWidth, samples[0].channels];
  const xs = new Float32Array(samples.length * h * w * c);
  const ys = new Float32Array(samples.length * h * w);
  samples.forEach((s, i) => {
    xs.set(s.image, i * h * w * c);
    ys.set(s.mask, i * h * w);
  });
  return {
    xs: tf.tensor4d(xs, [samples.length, h, w, c]),
    ys: tf.tensor4d(ys, [samples.length, h, w, 1]),
  };
}

export async function train(
  datasetDir: string,
  config: TrainConfig,
  outDir: string,
  options: { limit?: number; excludeSources?: string[]; log?: (line: string) => void } = {},
): Promise<TrainResult> {
  const log = options.log ?? (() => undefined);
  let records = listDataset(datasetDir);
  if (options.excludeSources?.length) {
    const banned = new Set(options.excludeSources);
    records = records.filter((r) => !banned.has(r.sourceId));
  }
  if (options.limit && records.length > options.limit) {
    records = records.slice(0, options.limit);
  }
  if (records.length === 0) throw new Error('no training samples selected');

  const samples = new Map<string, LoadedSample>();
  for (const record of records) {
    samples.set(record.stem, loadSample(datasetDir, record.stem, config.channels));
  }

  fs.mkdirSync(outDir, { recursive: true });
  const runLogPath = path.join(outDir, 'runlog.jsonl');
  const header = {
    kind: 'header',
    config,
    overrides: overriddenFields(config),
    samples: records.length,
    dataset: path.resolve(datasetDir),
    pad_policy: 'zero-pad to multiple of 16, batches bucketed by padded shape',
  };
  fs.writeFileSync(runLogPath, JSON.stringify(header) + '\n');

  const model = buildUnet(config);
  const optimizer = tf.train.adam(config.learningRate, config.beta1, config.beta2);
  const loss = lossFor(config.loss);
  const random = makeRandom(config.seed);
  const epochLosses: number[] = [];

  for (let epoch = 1; epoch <= config.epochs; epoch++) {
    const batches = bucketBatches([...samples.values()], config.batchSize, random);
    let total = 0;
    for (const stems of batches) {
      const { xs, ys } = stackBatch(stems.map((s) => samples.get(s)!));
      const cost = optimizer.minimize(
        () => loss(ys, model.apply(xs, { training: true }) as tf.Tensor),
        true,
      ) as tf.Scalar;
      total += cost.dataSync()[0];
      tf.dispose([xs, ys, cost]);
    }
    const meanLoss = total / batches.length;
    epochLosses.push(meanLoss);
    fs.appendFileSync(
      runLogPath,
      JSON.stringify({ kind: 'epoch', epoch, mean_loss: meanLoss, batches: batches.length }) + '\n',
    );
    log(`epoch ${epoch}/${config.epochs} mean_loss=${meanLoss.toFixed(4)} (${batches.length} batches)`);
  }

  const modelDir = path.join(outDir, 'model');
  await saveModel(model, config, modelDir);
  optimizer.dispose();
  return { modelDir, runLogPath, epochLosses };
}
