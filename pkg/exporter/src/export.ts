/**
 * Orchestration: read a crops manifest, run the profile's extractor over
 * every crop (batched), and write one PSFEAT01 file. The dims check runs
 * at model-build time, before anything touches the output path.
 */

import * as fs from 'node:fs';

import { FeatureRecord, encodeFeatureFile } from './format.js';
import { RgbImage, cropImage, loadPng, resizeToInput } from './image.js';
import { ExtractorOptions, FeatureExtractor } from './model.js';
import { CropSpec, parseManifest } from './manifest.js';
import { ExportProfileSpec } from './profiles.js';

export interface ExportOptions extends ExtractorOptions {
  batchSize?: number;
  log?: (msg: string) => void;
}

export async function exportFeatures(
  manifestPath: string,
  profile: ExportProfileSpec,
  outPath: string,
  options: ExportOptions = {},
): Promise<number> {
  const log = options.log ?? (() => {});
  const crops = parseManifest(manifestPath);
  if (crops.length === 0) {
    throw new Error(`${manifestPath}: no crops to export`);
  }
  const extractor = await FeatureExtractor.create(profile, options);
  log(`profile ${profile.name}: ${extractor.dims} dims, ${crops.length} crops`);

  const pages = new Map<string, RgbImage>();
  const pageOf = (spec: CropSpec): RgbImage => {
    let img = pages.get(spec.imagePath);
    if (!img) {
      img = loadPng(spec.imagePath);
      pages.set(spec.imagePath, img);
    }
    return img;
  };

  const batchSize = options.batchSize ?? 4;
  const records: FeatureRecord[] = [];
  for (let start = 0; start < crops.length; start += batchSize) {
    const batch = crops.slice(start, start + batchSize);
    const inputs: Float32Array[] = [];
    for (const spec of batch) {
      const crop = cropImage(pageOf(spec), spec.x, spec.y, spec.w, spec.h);
      inputs.push(await resizeToInput(crop));
    }
    const vectors = await extractor.extract(inputs);
    batch.forEach((spec, i) => {
      records.push({ regionId: spec.regionId, vector: vectors[i] });
    });
    log(`  ${Math.min(start + batchSize, crops.length)}/${crops.length}`);
  }

  fs.writeFileSync(outPath, encodeFeatureFile(records, extractor.dims));
  return records.length;
}
