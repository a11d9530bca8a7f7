/**
 * unet train --data <expanded dataset> --out <run dir> [--config train.cfg]
 *            [--epochs N --batch N --lr X --base-filters N --channels rgb|green]
 *            [--seed N --limit N --exclude-source STEM ...]
 * unet predict --model <run dir>/model --images <dir> --out <dir>
 */

import * as tf from '@tensorflow/tfjs';

import { loadConfigFile, TrainConfig, validateConfig, withDefaults } from './config';
import { loadModel } from './io';
import { predictDirectory } from './predict';
import { train } from './train';

function parseArgs(argv: string[]): { command: string; flags: Map<string, string[]> } {
  const [command, ...rest] = argv;
  const flags = new Map<string, string[]>();
  for (let i = 0; i < rest.length; i += 2) {
    const key = rest[i];
    const value = rest[i + 1];
    if (!key?.startsWith('--') || value === undefined) {
      throw new Error(`malformed arguments near ${key ?? '<end>'}`);
    }
    const name = key.slice(2);
    if (!flags.has(name)) flags.set(name, []);
    flags.get(name)!.push(value);
  }
  return { command, flags };
}

function one(flags: Map<string, string[]>, name: string): string | undefined {
  return flags.get(name)?.[0];
}

function required(flags: Map<string, string[]>, name: string): string {
  const value = one(flags, name);
  if (value === undefined) throw new Error(`--${name} is required`);
  return value;
}

function buildConfig(flags: Map<string, string[]>): TrainConfig {
  const base = one(flags, 'config') ? loadConfigFile(required(flags, 'config')) : withDefaults({});
  const overrides: Record<string, unknown> = {};
  if (one(flags, 'epochs')) overrides.epochs = Number(one(flags, 'epochs'));
  if (one(flags, 'batch')) overrides.batchSize = Number(one(flags, 'batch'));
  if (one(flags, 'lr')) overrides.learningRate = Number(one(flags, 'lr'));
  if (one(flags, 'base-filters')) overrides.baseFilters = Number(one(flags, 'base-filters'));
  if (one(flags, 'channels')) overrides.channels = one(flags, 'channels');
  if (one(flags, 'seed')) overrides.seed = Number(one(flags, 'seed'));
  if (one(flags, 'loss')) overrides.loss = one(flags, 'loss');
  return validateConfig({ ...base, ...overrides } as TrainConfig);
}

async function main(): Promise<number> {
  await tf.setBackend('cpu');
  await tf.ready();
  const { command, flags } = parseArgs(process.argv.slice(2));
  if (command === 'train') {
    const config = buildConfig(flags);
    const result = await train(required(flags, 'data'), config, required(flags, 'out'), {
      limit: one(flags, 'limit') ? Number(one(flags, 'limit')) : undefined,
      excludeSources: flags.get('exclude-source'),
      log: (line) => console.log(line),
    });
    console.log(result.modelDir);
    return 0;
  }
  if (command === 'predict') {
    const { model, config } = await loadModel(required(flags, 'model'));
    const n = predictDirectory(model, config, required(flags, 'images'), required(flags, 'out'),
      (line) => console.log(line));
    console.log(`${n} probability maps written to ${required(flags, 'out')}`);
    return 0;
  }
  console.error('usage: unet train|predict ... (see frontend/README.md)');
  return 64;
}

main()
  .then((code) => process.exit(code))
  .catch((err) => {
    console.error(`unet: error: ${err.message ?? err}`);
    process.exit(65);
  });
