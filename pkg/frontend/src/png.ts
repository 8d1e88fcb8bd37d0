// Minimal 8-bit grayscale PNG codec for mask export/import.
//
// The encoder writes uncompressed (stored) deflate blocks, which every PNG
// reader accepts; the decoder only needs to read what the encoder writes, so
// it rejects anything but stored blocks and filter 0. This keeps the
// exported mask byte-identical across browser and node without a canvas.

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
  let crc = 0xffffffff;
  for (const b of bytes) {
    crc = CRC_TABLE[(crc ^ b) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (const byte of bytes) {
    a = (a + byte) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function u32be(value: number): Uint8Array {
  return new Uint8Array([(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff]);
}

function chunk(type: string, payload: Uint8Array): Uint8Array {
  const typeBytes = new TextEncoder().encode(type);
  const body = new Uint8Array(typeBytes.length + payload.length);
  body.set(typeBytes);
  body.set(payload, typeBytes.length);
  const out = new Uint8Array(4 + body.length + 4);
  out.set(u32be(payload.length));
  out.set(body, 4);
  out.set(u32be(crc32(body)), 4 + body.length);
  return out;
}

function zlibStored(raw: Uint8Array): Uint8Array {
  const blocks: Uint8Array[] = [new Uint8Array([0x78, 0x01])];
  const max = 0xffff;
  for (let offset = 0; offset < raw.length || offset === 0; offset += max) {
    const slice = raw.subarray(offset, Math.min(offset + max, raw.length));
    const final = offset + max >= raw.length ? 1 : 0;
    const header = new Uint8Array([
      final, slice.length & 0xff, slice.length >>> 8,
      ~slice.length & 0xff, (~slice.length >>> 8) & 0xff,
    ]);
    const block = new Uint8Array(header.length + slice.length);
    block.set(header);
    block.set(slice, header.length);
    blocks.push(block);
    if (raw.length === 0) break;
  }
  blocks.push(u32be(adler32(raw)));
  const total = blocks.reduce((n, b) => n + b.length, 0);
  const out = new Uint8Array(total);
  let pos = 0;
  for (const b of blocks) {
    out.set(b, pos);
    pos += b.length;
  }
  return out;
}

/** Encode a binary mask (1 = hole) as an 8-bit grayscale PNG, white = hole. */
export function encodeMaskPng(width: number, height: number, mask01: Uint8Array): Uint8Array {
  if (mask01.length !== width * height) {
    throw new Error(`mask length ${mask01.length} != ${width}x${height}`);
  }
  const ihdr = new Uint8Array(13);
  ihdr.set(u32be(width));
  ihdr.set(u32be(height), 4);
  ihdr[8] = 8;  // bit depth
  ihdr[9] = 0;  // grayscale
  // compression, filter, interlace stay 0

  const raw = new Uint8Array(height * (width + 1));
  for (let y = 0; y < height; y++) {
    const row = y * (width + 1);
    raw[row] = 0; // filter: none
    for (let x = 0; x < width; x++) {
      raw[row + 1 + x] = mask01[y * width + x] ? 255 : 0;
    }
  }

  const parts = [
    new Uint8Array(SIGNATURE),
    chunk("IHDR", ihdr),
    chunk("IDAT", zlibStored(raw)),
    chunk("IEND", new Uint8Array(0)),
  ];
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let pos = 0;
  for (const p of parts) {
    out.set(p, pos);
    pos += p.length;
  }
  return out;
}

export interface DecodedMask {
  width: number;
  height: number;
  mask01: Uint8Array;
}

/** Decode a PNG produced by encodeMaskPng back into a binary mask. */
export function decodeMaskPng(bytes: Uint8Array): DecodedMask {
  for (let i = 0; i < SIGNATURE.length; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error("not a PNG file");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let pos = 8;
  let width = 0;
  let height = 0;
  const idat: Uint8Array[] = [];
  while (pos < bytes.length) {
    const length = view.getUint32(pos);
    const type = String.fromCharCode(bytes[pos + 4], bytes[pos + 5], bytes[pos + 6], bytes[pos + 7]);
    const payload = bytes.subarray(pos + 8, pos + 8 + length);
    if (type === "IHDR") {
      width = view.getUint32(pos + 8);
      height = view.getUint32(pos + 12);
      if (payload[8] !== 8 || payload[9] !== 0) {
        throw new Error("expected an 8-bit grayscale PNG");
      }
    } else if (type === "IDAT") {
      idat.push(payload);
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + length;
  }
  if (!width || !height) throw new Error("PNG is missing its header");

  const stream = concat(idat);
  const raw = inflateStored(stream.subarray(2)); // skip the 2-byte zlib header
  const expected = height * (width + 1);
  if (raw.length !== expected) {
    throw new Error(`PNG payload length ${raw.length} != ${expected}`);
  }
  const mask01 = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    if (raw[y * (width + 1)] !== 0) {
      throw new Error("only filter 0 rows are supported");
    }
    for (let x = 0; x < width; x++) {
      const value = raw[y * (width + 1) + 1 + x];
      if (value !== 0 && value !== 255) {
        throw new Error(`mask PNG is not strictly binary (found ${value})`);
      }
      mask01[y * width + x] = value === 255 ? 1 : 0;
    }
  }
  return { width, height, mask01 };
}

function concat(parts: Uint8Array[]): Uint8Array {
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
  let pos = 0;
  for (const p of parts) {
    out.set(p, pos);
    pos += p.length;
  }
  return out;
}

function inflateStored(stream: Uint8Array): Uint8Array {
  const chunks: Uint8Array[] = [];
  let pos = 0;
  for (;;) {
    const header = stream[pos];
    if ((header & 0x06) !== 0) {
      throw new Error("only stored deflate blocks are supported");
    }
    const len = stream[pos + 1] | (stream[pos + 2] << 8);
    chunks.push(stream.subarray(pos + 5, pos + 5 + len));
    pos += 5 + len;
    if (header & 1) break;
  }
  return concat(chunks);
}
