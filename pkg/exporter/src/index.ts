export { decodeFeatureFile, encodeFeatureFile, MAGIC } from './format.js';
export type { FeatureRecord } from './format.js';
export { cropImage, loadPng, resizeToInput } from './image.js';
export type { RgbImage } from './image.js';
export { FeatureExtractor, INPUT_SIZE, ensureBackend } from './model.js';
export type { ExtractorOptions } from './model.js';
export { parseManifest } from './manifest.js';
export type { CropSpec } from './manifest.js';
export { exportFeatures } from './export.js';
export type { ExportOptions } from './export.js';
export { PROFILES, getProfile } from './profiles.js';
export type { Architecture, ExportProfileSpec } from './profiles.js';
