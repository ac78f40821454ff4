/** PNG page loading, cropping, and resize to the network input size. */

import * as tf from '@tensorflow/tfjs';
import * as fs from 'node:fs';
import { PNG } from 'pngjs';

import { INPUT_SIZE, ensureBackend } from './model.js';

export interface RgbImage {
  width: number;
  height: number;
  /** row-major RGB, values in [0, 1] */
  data: Float32Array;
}

export function loadPng(path: string): RgbImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const n = png.width * png.height;
  const data = new Float32Array(n * 3);
  for (let i = 0; i < n; i++) {
    data[i * 3] = png.data[i * 4] / 255;
    data[i * 3 + 1] = png.data[i * 4 + 1] / 255;
    data[i * 3 + 2] = png.data[i * 4 + 2] / 255;
  }
  return { width: png.width, height: png.height, data };
}

export function cropImage(img: RgbImage, x: number, y: number, w: number, h: number): RgbImage {
  if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > img.width || y + h > img.height) {
    throw new Error(`crop ${x},${y},${w},${h} exceeds page ${img.width}x${img.height}`);
  }
  const data = new Float32Array(w * h * 3);
  for (let row = 0; row < h; row++) {
    const src = ((y + row) * img.width + x) * 3;
    data.set(img.data.subarray(src, src + w * 3), row * w * 3);
  }
  return { width: w, height: h, data };
}

/** Bilinear resize with half-pixel-centered sampling, like the index side. */
export async function resizeToInput(img: RgbImage): Promise<Float32Array> {
  await ensureBackend();
  const out = tf.tidy(() => {
    const t = tf.tensor3d(img.data, [img.height, img.width, 3]);
    return tf.image.resizeBilinear(t, [INPUT_SIZE, INPUT_SIZE], false, true);
  });
  const data = (await out.data()) as Float32Array;
  out.dispose();
  return data;
}
