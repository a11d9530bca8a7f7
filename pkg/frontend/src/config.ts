/**
 * Training configuration. The defaults are the published recipe and are
 * treated as a contract: the recipe-fidelity test asserts them verbatim,
 * and any override is recorded in the run log next to the defaults.
 */

import * as fs from 'node:fs';

export type LossName = 'bce' | 'dice' | 'bce+dice';
export type ChannelPolicy = 'rgb' | 'green';

export interface TrainConfig {
  learningRate: number;
  beta1: number;
  beta2: number;
  batchSize: number;
  epochs: number;
  /** dropout probability applied on the 4th and 5th convolutional blocks */
  dropout: number;
  dropoutBlocks: number[];
  loss: LossName;
  channels: ChannelPolicy;
  lrSchedule: 'none';
  pretrained: false;
  /** architecture width; 64 is the classic encoder start */
  baseFilters: number;
  seed: number;
}

export const DEFAULT_CONFIG: TrainConfig = {
  learningRate: 1e-4,
  beta1: 0.9,
  beta2: 0.999,
  batchSize: 3,
  epochs: 15,
  dropout: 0.1,
  dropoutBlocks: [4, 5],
  loss: 'bce',
  channels: 'rgb',
  lrSchedule: 'none',
  pretrained: false,
  baseFilters: 64,
  seed: 42,
};

export function withDefaults(partial: Partial<TrainConfig>): TrainConfig {
  return { ...DEFAULT_CONFIG, ...partial };
}

export function overriddenFields(config: TrainConfig): string[] {
  return (Object.keys(DEFAULT_CONFIG) as (keyof TrainConfig)[])
    .filter((key) => JSON.stringify(config[key]) !== JSON.stringify(DEFAULT_CONFIG[key]))
    .map(String);
}

export function serializeConfig(config: TrainConfig): string {
  return JSON.stringify(config, Object.keys(config).sort(), 2) + '\n';
}

export function loadConfigFile(path: string): TrainConfig {
  const parsed = JSON.parse(fs.readFileSync(path, 'utf-8'));
  return validateConfig(withDefaults(parsed));
}

export function validateConfig(config: TrainConfig): TrainConfig {
  if (config.learningRate <= 0) throw new Error('learning rate must be positive');
  if (config.batchSize < 1) throw new Error('batch size must be >= 1');
  if (config.epochs < 1) throw new Error('epochs must be >= 1');
  if (config.dropout < 0 || config.dropout >= 1) throw new Error('dropout must lie in [0, 1)');
  if (!['bce', 'dice', 'bce+dice'].includes(config.loss)) throw new Error(`unknown loss ${config.loss}`);
  if (!['rgb', 'green'].includes(config.channels)) throw new Error(`unknown channel policy ${config.channels}`);
  if (config.baseFilters < 1) throw new Error('baseFilters must be >= 1');
  return config;
}
