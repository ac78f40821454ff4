/**
 * Crops manifest: CSV with header region_id,path,x,y,w,h. Paths are
 * resolved relative to the manifest file unless absolute.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

export interface CropSpec {
  regionId: bigint;
  imagePath: string;
  x: number;
  y: number;
  w: number;
  h: number;
}

export function parseManifest(manifestPath: string): CropSpec[] {
  const text = fs.readFileSync(manifestPath, 'utf8');
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new Error(`${manifestPath}: empty manifest`);
  }
  const header = lines[0].trim();
  if (header !== 'region_id,path,x,y,w,h') {
    throw new Error(`${manifestPath}: unexpected header '${header}'`);
  }
  const base = path.dirname(path.resolve(manifestPath));
  return lines.slice(1).map((line, i) => {
    const parts = line.split(',');
    if (parts.length !== 6) {
      throw new Error(`${manifestPath}:${i + 2}: expected 6 columns, got ${parts.length}`);
    }
    const [id, p, x, y, w, h] = parts;
    const nums = [x, y, w, h].map((v) => {
      const n = Number(v);
      if (!Number.isInteger(n)) {
        throw new Error(`${manifestPath}:${i + 2}: bad integer '${v}'`);
      }
      return n;
    });
    return {
      regionId: BigInt(id),
      imagePath: path.isAbsolute(p) ? p : path.join(base, p),
      x: nums[0],
      y: nums[1],
      w: nums[2],
      h: nums[3],
    };
  });
}
