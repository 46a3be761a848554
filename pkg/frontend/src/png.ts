/**
 * Minimal PNG codec for mask payloads, built on the platform's
 * CompressionStream/DecompressionStream (zlib format), so it runs unchanged
 * in the browser and in node-based tests with no dependencies.
 *
 * Encoding always writes 8-bit grayscale. Decoding accepts 8-bit grayscale,
 * gray+alpha, RGB and RGBA, non-interlaced, any scanline filter.
 */

import { MaskLayer } from "./maskLayer.js";

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

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

function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

async function zlibRoundtrip(
  data: Uint8Array,
  direction: "deflate" | "inflate",
): Promise<Uint8Array> {
  const stream =
    direction === "deflate"
      ? new CompressionStream("deflate")
      : new DecompressionStream("deflate");
  const writer = stream.writable.getWriter();
  void writer.write(data.slice());
  void writer.close();
  const buf = await new Response(stream.readable).arrayBuffer();
  return new Uint8Array(buf);
}

function u32be(value: number): Uint8Array {
  return new Uint8Array([(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff]);
}

function readU32(bytes: Uint8Array, at: number): number {
  return ((bytes[at] << 24) | (bytes[at + 1] << 16) | (bytes[at + 2] << 8) | bytes[at + 3]) >>> 0;
}

function chunk(type: string, body: Uint8Array): Uint8Array {
  const typeBytes = new TextEncoder().encode(type);
  const out = new Uint8Array(12 + body.length);
  out.set(u32be(body.length), 0);
  out.set(typeBytes, 4);
  out.set(body, 8);
  const crcInput = new Uint8Array(4 + body.length);
  crcInput.set(typeBytes, 0);
  crcInput.set(body, 4);
  out.set(u32be(crc32(crcInput)), 8 + body.length);
  return out;
}

export async function encodeGrayPng(
  gray: Uint8Array,
  width: number,
  height: number,
): Promise<Uint8Array> {
  if (gray.length !== width * height) {
    throw new Error(`gray length ${gray.length} != ${width}x${height}`);
  }
  const ihdr = new Uint8Array(13);
  ihdr.set(u32be(width), 0);
  ihdr.set(u32be(height), 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 0; // color type: grayscale
  // compression 0, filter 0, interlace 0 already zeroed

  const raw = new Uint8Array(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0; // filter: none
    raw.set(gray.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  const idat = await zlibRoundtrip(raw, "deflate");

  const parts = [
    new Uint8Array(SIGNATURE),
    chunk("IHDR", ihdr),
    chunk("IDAT", idat),
    chunk("IEND", new Uint8Array(0)),
  ];
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const p of parts) {
    out.set(p, at);
    at += p.length;
  }
  return out;
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

function unfilter(raw: Uint8Array, width: number, height: number, bpp: number): Uint8Array {
  const stride = width * bpp;
  const out = new Uint8Array(height * stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const cur = y * stride;
    const prev = (y - 1) * stride;
    for (let x = 0; x < stride; x++) {
      const left = x >= bpp ? out[cur + x - bpp] : 0;
      const up = y > 0 ? out[prev + x] : 0;
      const upLeft = y > 0 && x >= bpp ? out[prev + x - bpp] : 0;
      let v: number;
      switch (filter) {
        case 0:
          v = row[x];
          break;
        case 1:
          v = row[x] + left;
          break;
        case 2:
          v = row[x] + up;
          break;
        case 3:
          v = row[x] + ((left + up) >> 1);
          break;
        case 4:
          v = row[x] + paeth(left, up, upLeft);
          break;
        default:
          throw new Error(`unsupported scanline filter ${filter}`);
      }
      out[cur + x] = v & 0xff;
    }
  }
  return out;
}

export interface DecodedPng {
  width: number;
  height: number;
  /** One luminance byte per pixel regardless of the source color type. */
  gray: Uint8Array;
}

export async function decodePng(bytes: Uint8Array): Promise<DecodedPng> {
  for (let i = 0; i < SIGNATURE.length; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error("not a PNG file");
  }
  let at = 8;
  let width = 0;
  let height = 0;
  let colorType = -1;
  const idatParts: Uint8Array[] = [];
  while (at + 8 <= bytes.length) {
    const length = readU32(bytes, at);
    const type = String.fromCharCode(bytes[at + 4], bytes[at + 5], bytes[at + 6], bytes[at + 7]);
    const body = bytes.subarray(at + 8, at + 8 + length);
    if (type === "IHDR") {
      width = readU32(body, 0);
      height = readU32(body, 4);
      const bitDepth = body[8];
      colorType = body[9];
      if (bitDepth !== 8) throw new Error(`unsupported bit depth ${bitDepth}`);
      if (body[12] !== 0) throw new Error("interlaced PNGs are not supported");
    } else if (type === "IDAT") {
      idatParts.push(body);
    } else if (type === "IEND") {
      break;
    }
    at += 12 + length;
  }
  if (width === 0 || height === 0) throw new Error("missing IHDR");
  const channels = { 0: 1, 2: 3, 4: 2, 6: 4 }[colorType as 0 | 2 | 4 | 6];
  if (channels === undefined) {
    throw new Error(`unsupported color type ${colorType}`);
  }

  const compressed = new Uint8Array(idatParts.reduce((n, p) => n + p.length, 0));
  let off = 0;
  for (const p of idatParts) {
    compressed.set(p, off);
    off += p.length;
  }
  const raw = await zlibRoundtrip(compressed, "inflate");
  if (raw.length !== height * (width * channels + 1)) {
    throw new Error(`corrupt PNG: got ${raw.length} filtered bytes`);
  }
  const pixels = unfilter(raw, width, height, channels);

  const gray = new Uint8Array(width * height);
  for (let i = 0; i < width * height; i++) {
    if (channels <= 2) {
      gray[i] = pixels[i * channels];
    } else {
      const r = pixels[i * channels];
      const g = pixels[i * channels + 1];
      const b = pixels[i * channels + 2];
      gray[i] = (r * 19595 + g * 38470 + b * 7471 + 0x8000) >> 16;
    }
  }
  return { width, height, gray };
}

/** Wire format: 255 = existing, 0 = missing. */
export async function maskToPngBytes(layer: MaskLayer): Promise<Uint8Array> {
  const gray = new Uint8Array(layer.data.length);
  for (let i = 0; i < gray.length; i++) {
    gray[i] = layer.data[i] ? 255 : 0;
  }
  return encodeGrayPng(gray, layer.width, layer.height);
}

/** Values >= 128 read back as existing, matching the service's decoder. */
export async function maskFromPngBytes(bytes: Uint8Array): Promise<MaskLayer> {
  const { width, height, gray } = await decodePng(bytes);
  const data = new Uint8Array(width * height);
  for (let i = 0; i < data.length; i++) {
    data[i] = gray[i] >= 128 ? 1 : 0;
  }
  return new MaskLayer(width, height, data);
}
