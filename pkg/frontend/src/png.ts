/**
 * Minimal PNG codec for the dataset interchange formats:
 * decodes 8/16-bit grayscale and 8-bit RGB (non-interlaced), encodes
 * 16-bit grayscale for probability maps. Values are normalized to [0, 1]
 * by the bit-depth maximum, matching the augmentation engine's I/O.
 */

import * as zlib from 'node:zlib';

export interface Raster {
  width: number;
  height: number;
  channels: number; // 1 or 3
  data: Float32Array; // row-major, [0, 1]
}

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(...buffers: Buffer[]): number {
  let c = 0xffffffff;
  for (const buf of buffers) {
    for (let i = 0; i < buf.length; i++) {
      c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
    }
  }
  return (c ^ 0xffffffff) >>> 0;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function unfilter(raw: Buffer, height: number, rowBytes: number, bpp: number): Buffer {
  const out = Buffer.alloc(height * rowBytes);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (rowBytes + 1)];
    const src = raw.subarray(y * (rowBytes + 1) + 1, (y + 1) * (rowBytes + 1));
    const row = out.subarray(y * rowBytes, (y + 1) * rowBytes);
    const prev = y > 0 ? out.subarray((y - 1) * rowBytes, y * rowBytes) : null;
    for (let x = 0; x < rowBytes; x++) {
      const left = x >= bpp ? row[x - bpp] : 0;
      const up = prev ? prev[x] : 0;
      const upLeft = prev && x >= bpp ? prev[x - bpp] : 0;
      let v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += up; break;
        case 3: v += (left + up) >> 1; break;
        case 4: v += paeth(left, up, upLeft); break;
        default: throw new Error(`unsupported PNG filter ${filter}`);
      }
      row[x] = v & 0xff;
    }
  }
  return out;
}

export function decodePng(buffer: Buffer): Raster {
  if (!buffer.subarray(0, 8).equals(SIGNATURE)) {
    throw new Error('not a PNG file');
  }
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  const idat: Buffer[] = [];
  let offset = 8;
  while (offset < buffer.length) {
    const length = buffer.readUInt32BE(offset);
    const type = buffer.toString('ascii', offset + 4, offset + 8);
    const data = buffer.subarray(offset + 8, offset + 8 + length);
    if (type === 'IHDR') {
      width = data.readUInt32BE(0);
      height = data.readUInt32BE(4);
      bitDepth = data[8];
      colorType = data[9];
      if (data[12] !== 0) throw new Error('interlaced PNG not supported');
    } else if (type === 'IDAT') {
      idat.push(data);
    } else if (type === 'IEND') {
      break;
    }
    offset += 12 + length;
  }
  const gray = colorType === 0;
  const rgb = colorType === 2;
  if (!gray && !rgb) throw new Error(`unsupported PNG color type ${colorType}`);
  if (bitDepth !== 8 && bitDepth !== 16) throw new Error(`unsupported PNG bit depth ${bitDepth}`);
  if (rgb && bitDepth !== 8) throw new Error('16-bit RGB not supported');
  const channels = gray ? 1 : 3;
  const sampleBytes = bitDepth / 8;
  const bpp = channels * sampleBytes;
  const rowBytes = width * bpp;
  const raw = zlib.inflateSync(Buffer.concat(idat));
  if (raw.length !== height * (rowBytes + 1)) {
    throw new Error('corrupt PNG payload');
  }
  const pixels = unfilter(raw, height, rowBytes, bpp);
  const maxValue = bitDepth === 8 ? 255 : 65535;
  const data = new Float32Array(width * height * channels);
  for (let i = 0; i < width * height * channels; i++) {
    const v = bitDepth === 8 ? pixels[i] : pixels.readUInt16BE(i * 2);
    data[i] = v / maxValue;
  }
  return { width, height, channels, data };
}

function chunk(type: string, payload: Buffer): Buffer {
  const head = Buffer.alloc(4);
  head.writeUInt32BE(payload.length, 0);
  const typeBuf = Buffer.from(type, 'ascii');
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(typeBuf, payload), 0);
  return Buffer.concat([head, typeBuf, payload, crc]);
}

/** Encode scores in [0, 1] as 16-bit grayscale, quantized floor(v*65535 + 0.5). */
export function encodePng16(width: number, height: number, scores: Float32Array | Float64Array): Buffer {
  if (scores.length !== width * height) {
    throw new Error(`expected ${width * height} scores, got ${scores.length}`);
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 16; // bit depth
  ihdr[9] = 0; // grayscale
  const rowBytes = width * 2;
  const raw = Buffer.alloc(height * (rowBytes + 1));
  for (let y = 0; y < height; y++) {
    const base = y * (rowBytes + 1);
    raw[base] = 0; // filter: none
    for (let x = 0; x < width; x++) {
      const v = Math.min(1, Math.max(0, scores[y * width + x]));
      raw.writeUInt16BE(Math.floor(v * 65535 + 0.5), base + 1 + x * 2);
    }
  }
  const idat = zlib.deflateSync(raw, { level: 6 });
  return Buffer.concat([SIGNATURE, chunk('IHDR', ihdr), chunk('IDAT', idat), chunk('IEND', Buffer.alloc(0))]);
}
