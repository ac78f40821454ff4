/**
 * PSFEAT01 binary feature file: 8-byte magic, little-endian u32 count and
 * dims, then per record a u64 region id followed by dims float32 values.
 * No padding anywhere; identical inputs produce identical bytes.
 */

export const MAGIC = 'PSFEAT01';

export interface FeatureRecord {
  regionId: bigint;
  vector: Float32Array;
}

export function encodeFeatureFile(records: FeatureRecord[], dims: number): Buffer {
  for (const r of records) {
    if (r.vector.length !== dims) {
      throw new Error(
        `record ${r.regionId} has ${r.vector.length} dims, file declares ${dims}`,
      );
    }
  }
  const recordSize = 8 + 4 * dims;
  const buf = Buffer.alloc(16 + records.length * recordSize);
  buf.write(MAGIC, 0, 'ascii');
  buf.writeUInt32LE(records.length, 8);
  buf.writeUInt32LE(dims, 12);
  let off = 16;
  for (const r of records) {
    buf.writeBigUInt64LE(r.regionId, off);
    off += 8;
    for (let i = 0; i < dims; i++) {
      buf.writeFloatLE(r.vector[i], off);
      off += 4;
    }
  }
  return buf;
}

export function decodeFeatureFile(buf: Buffer): { dims: number; records: FeatureRecord[] } {
  if (buf.subarray(0, 8).toString('ascii') !== MAGIC) {
    throw new Error(`bad magic: expected ${MAGIC}`);
  }
  const count = buf.readUInt32LE(8);
  const dims = buf.readUInt32LE(12);
  const recordSize = 8 + 4 * dims;
  if (buf.length < 16 + count * recordSize) {
    throw new Error(
      `truncated file: ${buf.length} bytes, header declares ${16 + count * recordSize}`,
    );
  }
  const records: FeatureRecord[] = [];
  let off = 16;
  for (let r = 0; r < count; r++) {
    const regionId = buf.readBigUInt64LE(off);
    off += 8;
    const vector = new Float32Array(dims);
    for (let i = 0; i < dims; i++) {
      vector[i] = buf.readFloatLE(off);
      off += 4;
    }
    records.push({ regionId, vector });
  }
  return { dims, records };
}
