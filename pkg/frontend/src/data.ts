/**
 * Dataset access for directories produced by the augmentation engine:
 * images/<stem>.png + masks/<stem>.png (+ manifest.jsonl). Images and
 * masks are padded with zeros to the next multiple of 16 so they fit the
 * network depth; same-shape samples are bucketed together so a batch can
 * be stacked without cross-size padding.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { ChannelPolicy } from './config';
import { decodePng, Raster } from './png';

export interface SampleRecord {
  stem: string;
  sourceId: string;
}

export interface LoadedSample {
  stem: string;
  width: number; // original, before padding
  height: number;
  paddedWidth: number;
  paddedHeight: number;
  image: Float32Array; // padded, row-major HxWxC
  mask: Float32Array; // padded, row-major HxW in {0,1}
  channels: number;
}

export function padTo(size: number, multiple: number): number {
  return Math.ceil(size / multiple) * multiple;
}

export function listDataset(dir: string, requireManifest = true): SampleRecord[] {
  const imagesDir = path.join(dir, 'images');
  if (!fs.existsSync(imagesDir)) {
    throw new Error(`dataset layout must contain ${imagesDir}`);
  }
  const manifestPath = path.join(dir, 'manifest.jsonl');
  const bySource = new Map<string, string>();
  if (fs.existsSync(manifestPath)) {
    for (const line of fs.readFileSync(manifestPath, 'utf-8').split('\n')) {
      if (!line.trim()) continue;
      const row = JSON.parse(line);
      if (row.kind === 'record') bySource.set(row.stem, row.source_id);
    }
  } else if (requireManifest) {
    throw new Error(`no manifest.jsonl under ${dir}; expected an expanded dataset`);
  }
  const stems = fs.readdirSync(imagesDir).filter((f) => f.endsWith('.png')).map((f) => f.slice(0, -4)).sort();
  if (stems.length === 0) throw new Error(`no PNG images under ${imagesDir}`);
  for (const stem of stems) {
    if (!fs.existsSync(path.join(dir, 'masks', `${stem}.png`))) {
      throw new Error(`dataset is missing the mask for ${stem}`);
    }
  }
  return stems.map((stem) => ({ stem, sourceId: bySource.get(stem) ?? stem }));
}

export function toChannels(raster: Raster, policy: ChannelPolicy): { data: Float32Array; channels: number } {
  const n = raster.width * raster.height;
  if (policy === 'green') {
    const out = new Float32Array(n);
    if (raster.channels === 1) {
      out.set(raster.data);
    } else {
      for (let i = 0; i < n; i++) out[i] = raster.data[i * 3 + 1];
    }
    return { data: out, channels: 1 };
  }
  if (raster.channels === 3) return { data: raster.data, channels: 3 };
  // grayscale source under the rgb policy: replicate
  const out = new Float32Array(n * 3);
  for (let i = 0; i < n; i++) {
    out[i * 3] = out[i * 3 + 1] = out[i * 3 + 2] = raster.data[i];
  }
  return { data: out, channels: 3 };
}

function padPlane(
  src: Float32Array, width: number, height: number, channels: number,
  padded_w: number, padded_h: number,
): Float32Array {
  if (padded_w === width && padded_h === height) return src;
  const out = new Float32Array(padded_w * padded_h * channels); // zero fill
  for (let y = 0; y < height; y++) {
    out.set(src.subarray(y * width * channels, (y + 1) * width * channels), y * padded_w * channels);
  }
  return out;
}

export function loadSample(dir: string, stem: string, policy: ChannelPolicy): LoadedSample {
  const imageRaster = decodePng(fs.readFileSync(path.join(dir, 'images', `${stem}.png`)));
  const maskRaster = decodePng(fs.readFileSync(path.join(dir, 'masks', `${stem}.png`)));
  if (maskRaster.width !== imageRaster.width || maskRaster.height !== imageRaster.height) {
    throw new Error(`${stem}: mask ${maskRaster.width}x${maskRaster.height} does not match image`);
  }
  if (maskRaster.channels !== 1) throw new Error(`${stem}: mask must be grayscale`);
  const { data, channels } = toChannels(imageRaster, policy);
  const mask = new Float32Array(maskRaster.data.length);
  for (let i = 0; i < mask.length; i++) mask[i] = maskRaster.data[i] >= 0.5 ? 1 : 0;
  const paddedWidth = padTo(imageRaster.width, 16);
  const paddedHeight = padTo(imageRaster.height, 16);
  return {
    stem,
    width: imageRaster.width,
    height: imageRaster.height,
    paddedWidth,
    paddedHeight,
    image: padPlane(data, imageRaster.width, imageRaster.height, channels, paddedWidth, paddedHeight),
    mask: padPlane(mask, imageRaster.width, imageRaster.height, 1, paddedWidth, paddedHeight),
    channels,
  };
}

/** Deterministic PRNG for shuffling (mulberry32). */
export function makeRandom(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function shuffled<T>(items: T[], random: () => number): T[] {
  const out = items.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(random() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

/** Group stems by padded shape so every batch stacks cleanly. */
export function bucketBatches(
  samples: { stem: string; paddedWidth: number; paddedHeight: number }[],
  batchSize: number,
  random: () => number,
): string[][] {
  const buckets = new Map<string, string[]>();
  for (const s of shuffled(samples, random)) {
    const key = `${s.paddedHeight}x${s.paddedWidth}`;
    if (!buckets.has(key)) buckets.set(key, []);
    buckets.get(key)!.push(s.stem);
  }
  const batches: string[][] = [];
  for (const key of [...buckets.keys()].sort()) {
    const stems = buckets.get(key)!;
    for (let i = 0; i < stems.length; i += batchSize) {
      batches.push(stems.slice(i, i + batchSize));
    }
  }
  return shuffled(batches, random);
}
