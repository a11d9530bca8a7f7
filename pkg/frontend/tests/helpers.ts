import * as fs from 'node:fs';
import * as path from 'node:path';

import { makeRandom } from '../src/data';
import { encodePng16 } from '../src/png';

/**
 * Synthetic dataset in the expanded-dataset layout (images/, masks/,
 * manifest.jsonl). Masks are filled discs with a bright matching blob in
 * the image, so a small network can learn the mapping quickly.
 */
export function makeDataset(dir: string, count: number, size: number, seed = 1): string[] {
  fs.mkdirSync(path.join(dir, 'images'), { recursive: true });
  fs.mkdirSync(path.join(dir, 'masks'), { recursive: true });
  const random = makeRandom(seed);
  const stems: string[] = [];
  const manifest: string[] = [JSON.stringify({ kind: 'header', master_seed: seed })];
  for (let i = 0; i < count; i++) {
    const stem = `t${String(i).padStart(2, '0')}`;
    const cx = size * (0.3 + 0.4 * random());
    const cy = size * (0.3 + 0.4 * random());
    const r = size * (0.12 + 0.12 * random());
    const image = new Float32Array(size * size);
    const mask = new Float32Array(size * size);
    for (let y = 0; y < size; y++) {
      for (let x = 0; x < size; x++) {
        const inside = (x - cx) ** 2 + (y - cy) ** 2 <= r * r;
        mask[y * size + x] = inside ? 1 : 0;
        image[y * size + x] = (inside ? 0.8 : 0.2) + 0.1 * (random() - 0.5);
      }
    }
    fs.writeFileSync(path.join(dir, 'images', `${stem}.png`), encodePng16(size, size, image));
    fs.writeFileSync(path.join(dir, 'masks', `${stem}.png`), encodePng16(size, size, mask));
    manifest.push(JSON.stringify({ kind: 'record', stem, source_id: stem, transform: 'original' }));
    stems.push(stem);
  }
  fs.writeFileSync(path.join(dir, 'manifest.jsonl'), manifest.join('\n') + '\n');
  return stems;
}

/** Rank-based AUC with tie correction, for smoke checks. */
export function rankAuc(scores: Float32Array | number[], labels: (0 | 1)[] | Float32Array): number {
  const order = Array.from(scores.keys()).sort((a, b) => (scores[a] as number) - (scores[b] as number));
  const ranks = new Float64Array(scores.length);
  let i = 0;
  while (i < order.length) {
    let j = i;
    while (j + 1 < order.length && scores[order[j + 1]] === scores[order[i]]) j++;
    const avg = (i + j) / 2 + 1;
    for (let k = i; k <= j; k++) ranks[order[k]] = avg;
    i = j + 1;
  }
  let posRankSum = 0;
  let nPos = 0;
  for (let k = 0; k < scores.length; k++) {
    if (labels[k] === 1) {
      posRankSum += ranks[k];
      nPos++;
    }
  }
  const nNeg = scores.length - nPos;
  if (nPos === 0 || nNeg === 0) throw new Error('degenerate labels');
  return (posRankSum - (nPos * (nPos + 1)) / 2) / (nPos * nNeg);
}
