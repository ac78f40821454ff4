import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { PNG } from 'pngjs';
import { afterAll, describe, expect, it } from 'vitest';

import { exportFeatures } from '../src/export.js';
import { decodeFeatureFile } from '../src/format.js';
import { cropImage, loadPng } from '../src/image.js';
import { getProfile } from '../src/profiles.js';

const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'export-'));
afterAll(() => fs.rmSync(dir, { recursive: true, force: true }));

function writeTestPage(name: string, w = 96, h = 64): string {
  const png = new PNG({ width: w, height: h });
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const i = (y * w + x) * 4;
      png.data[i] = (x * 7 + y * 3) % 256;
      png.data[i + 1] = (x * 2 + y * 11) % 256;
      png.data[i + 2] = (x * 5 + y * 13) % 256;
      png.data[i + 3] = 255;
    }
  }
  const p = path.join(dir, name);
  fs.writeFileSync(p, PNG.sync.write(png));
  return p;
}

describe('end-to-end export', () => {
  const pagePath = writeTestPage('page.png');
  const manifestPath = path.join(dir, 'crops.csv');
  fs.writeFileSync(
    manifestPath,
    'region_id,path,x,y,w,h\n' +
      '0,page.png,0,0,32,32\n' +
      '1,page.png,20,10,40,30\n' +
      '2,page.png,50,5,46,59\n',
  );

  it('3-crop vgg19-block4-5 export is 1024-dim and bit-identical when repeated', async () => {
    const profile = getProfile('vgg19-block4-5');
    const outA = path.join(dir, 'a.psfeat');
    const outB = path.join(dir, 'b.psfeat');
    const countA = await exportFeatures(manifestPath, profile, outA);
    const countB = await exportFeatures(manifestPath, profile, outB);
    expect(countA).toBe(3);
    expect(countB).toBe(3);

    const bytesA = fs.readFileSync(outA);
    const bytesB = fs.readFileSync(outB);
    expect(bytesA.equals(bytesB)).toBe(true);

    const decoded = decodeFeatureFile(bytesA);
    expect(decoded.dims).toBe(1024);
    expect(decoded.records.map((r) => r.regionId)).toEqual([0n, 1n, 2n]);
    for (const record of decoded.records) {
      expect(record.vector).toHaveLength(1024);
      expect(Array.from(record.vector).every(Number.isFinite)).toBe(true);
    }
    // distinct crops give distinct features
    expect(Array.from(decoded.records[0].vector)).not.toEqual(
      Array.from(decoded.records[1].vector),
    );
  });

  it('rejects out-of-bounds crops', async () => {
    const bad = path.join(dir, 'bad.csv');
    fs.writeFileSync(bad, 'region_id,path,x,y,w,h\n0,page.png,90,0,32,32\n');
    await expect(
      exportFeatures(bad, getProfile('vgg19-block2-3'), path.join(dir, 'x.psfeat')),
    ).rejects.toThrow(/exceeds/);
  });

  it('crop helper extracts the requested window', () => {
    const img = loadPng(pagePath);
    const crop = cropImage(img, 3, 2, 4, 5);
    expect(crop.width).toBe(4);
    expect(crop.height).toBe(5);
    expect(crop.data[0]).toBeCloseTo(((3 * 7 + 2 * 3) % 256) / 255, 6);
  });
});
