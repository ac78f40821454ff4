/**
 * Feature-extraction backbones built with tfjs layers.
 *
 * Layer names follow keras.applications conventions (block1_conv1,
 * block5_pool, post_relu, ...), so a pretrained model converted with
 * tfjs-converter can be loaded in place of the seeded backbone and the tap
 * names still resolve. Without pretrained weights every kernel is drawn
 * from a seeded Glorot initializer, which keeps repeated exports
 * bit-identical.
 */

import * as tf from '@tensorflow/tfjs';
import { setThreadsCount } from '@tensorflow/tfjs-backend-wasm';
import * as fs from 'node:fs';
import * as path from 'node:path';

import { Architecture, ExportProfileSpec } from './profiles.js';

export const INPUT_SIZE = 224;

let backendReady: Promise<void> | null = null;

/** Single-threaded WASM backend: fast convolutions, reproducible sums. */
export function ensureBackend(): Promise<void> {
  if (!backendReady) {
    setThreadsCount(1);
    backendReady = tf.setBackend('wasm').then(async (ok) => {
      if (!ok) {
        await tf.setBackend('cpu');
      }
      await tf.ready();
    });
  }
  return backendReady;
}

function buildVgg19(seed: number): tf.LayersModel {
  const input = tf.input({ shape: [INPUT_SIZE, INPUT_SIZE, 3], name: 'input_1' });
  let x = input as tf.SymbolicTensor;
  let s = seed;
  const blocks: Array<[number, number]> = [
    [2, 64],
    [2, 128],
    [4, 256],
    [4, 512],
    [4, 512],
  ];
  blocks.forEach(([convs, filters], b) => {
    for (let c = 0; c < convs; c++) {
      x = tf.layers
        .conv2d({
          filters,
          kernelSize: 3,
          padding: 'same',
          activation: 'relu',
          name: `block${b + 1}_conv${c + 1}`,
          kernelInitializer: tf.initializers.glorotUniform({ seed: s++ }),
        })
        .apply(x) as tf.SymbolicTensor;
    }
    x = tf.layers
      .maxPooling2d({ poolSize: 2, strides: 2, name: `block${b + 1}_pool` })
      .apply(x) as tf.SymbolicTensor;
  });
  return tf.model({ inputs: input, outputs: x, name: 'vgg19_features' });
}

function buildResnet50V2(seed: number): tf.LayersModel {
  let s = seed;
  const conv = (x: tf.SymbolicTensor, filters: number, kernel: number, stride: number, name: string) =>
    tf.layers
      .conv2d({
        filters,
        kernelSize: kernel,
        strides: stride,
        padding: 'same',
        useBias: false,
        name,
        kernelInitializer: tf.initializers.heNormal({ seed: s++ }),
      })
      .apply(x) as tf.SymbolicTensor;
  const bnRelu = (x: tf.SymbolicTensor, name: string) => {
    const bn = tf.layers.batchNormalization({ epsilon: 1.001e-5, name: `${name}_bn` }).apply(x);
    return tf.layers.reLU({ name: `${name}_relu` }).apply(bn) as tf.SymbolicTensor;
  };

  // Pre-activation bottleneck (v2): BN-relu first, projection on the
  // pre-activated tensor when the shape changes.
  const block = (
    x: tf.SymbolicTensor,
    filters: number,
    stride: number,
    project: boolean,
    name: string,
  ) => {
    const preact = bnRelu(x, `${name}_preact`);
    const shortcut = project
      ? conv(preact, filters * 4, 1, stride, `${name}_shortcut`)
      : stride === 1
        ? x
        : (tf.layers
            .maxPooling2d({ poolSize: 1, strides: stride, name: `${name}_pool_shortcut` })
            .apply(x) as tf.SymbolicTensor);
    let y = conv(preact, filters, 1, 1, `${name}_conv1`);
    y = bnRelu(y, `${name}_mid1`);
    y = conv(y, filters, 3, stride, `${name}_conv2`);
    y = bnRelu(y, `${name}_mid2`);
    y = conv(y, filters * 4, 1, 1, `${name}_conv3`);
    return tf.layers.add({ name: `${name}_out` }).apply([shortcut, y]) as tf.SymbolicTensor;
  };

  const input = tf.input({ shape: [INPUT_SIZE, INPUT_SIZE, 3], name: 'input_1' });
  let x = conv(input as tf.SymbolicTensor, 64, 7, 2, 'conv1_conv');
  x = tf.layers
    .maxPooling2d({ poolSize: 3, strides: 2, padding: 'same', name: 'pool1_pool' })
    .apply(x) as tf.SymbolicTensor;

  const stages: Array<[number, number, number]> = [
    // filters, blocks, first-block stride
    [64, 3, 1],
    [128, 4, 2],
    [256, 6, 2],
    [512, 3, 2],
  ];
  stages.forEach(([filters, blocks, stride], i) => {
    for (let b = 0; b < blocks; b++) {
      x = block(x, filters, b === 0 ? stride : 1, b === 0, `conv${i + 2}_block${b + 1}`);
    }
  });
  x = bnRelu(x, 'post');
  return tf.model({ inputs: input, outputs: x, name: 'resnet50v2_features' });
}

const builders: Record<Architecture, (seed: number) => tf.LayersModel> = {
  vgg19: buildVgg19,
  resnet50v2: buildResnet50V2,
};

/** Load a tfjs LayersModel from a model.json path (plain-fs IO handler). */
async function loadWeightsModel(modelJsonPath: string): Promise<tf.LayersModel> {
  const dir = path.dirname(modelJsonPath);
  const spec = JSON.parse(fs.readFileSync(modelJsonPath, 'utf8'));
  const handler: tf.io.IOHandler = {
    load: async () => {
      const manifest = spec.weightsManifest as Array<{
        paths: string[];
        weights: tf.io.WeightsManifestEntry[];
      }>;
      const buffers: Buffer[] = [];
      const weightSpecs: tf.io.WeightsManifestEntry[] = [];
      for (const group of manifest) {
        for (const p of group.paths) {
          buffers.push(fs.readFileSync(path.join(dir, p)));
        }
        weightSpecs.push(...group.weights);
      }
      const total = Buffer.concat(buffers);
      const weightData = total.buffer.slice(
        total.byteOffset,
        total.byteOffset + total.byteLength,
      );
      return {
        modelTopology: spec.modelTopology,
        weightSpecs,
        weightData,
        format: spec.format,
        generatedBy: spec.generatedBy,
        convertedBy: spec.convertedBy,
      };
    },
  };
  return tf.loadLayersModel(handler);
}

export interface ExtractorOptions {
  seed?: number;
  /** path to a tfjs model.json with pretrained weights (optional) */
  weightsPath?: string;
}

export class FeatureExtractor {
  private constructor(
    readonly profile: ExportProfileSpec,
    private readonly model: tf.LayersModel,
  ) {}

  static async create(
    profile: ExportProfileSpec,
    options: ExtractorOptions = {},
  ): Promise<FeatureExtractor> {
    await ensureBackend();
    const backbone = options.weightsPath
      ? await loadWeightsModel(options.weightsPath)
      : builders[profile.architecture](options.seed ?? 1234);
    const taps = profile.taps.map((name) => backbone.getLayer(name).output as tf.SymbolicTensor);
    const pooled = taps.map((t, i) =>
      profile.flatten
        ? (tf.layers.flatten({ name: `flatten_tap${i}` }).apply(t) as tf.SymbolicTensor)
        : (tf.layers
            .globalAveragePooling2d({ name: `gap_tap${i}` })
            .apply(t) as tf.SymbolicTensor),
    );
    const merged =
      pooled.length > 1
        ? (tf.layers.concatenate({ name: 'tap_concat' }).apply(pooled) as tf.SymbolicTensor)
        : pooled[0];
    const model = tf.model({ inputs: backbone.inputs, outputs: merged });
    const dims = model.outputs[0].shape[1];
    if (dims !== profile.expectedDims) {
      throw new Error(
        `profile ${profile.name} expects ${profile.expectedDims} dims, model produces ${dims}`,
      );
    }
    return new FeatureExtractor(profile, model);
  }

  /** Symbolic output width; cheap, no inference. */
  get dims(): number {
    return this.model.outputs[0].shape[1] as number;
  }

  /**
   * Run one batch of crops (each [224, 224, 3], values in [0, 1]) and
   * return one Float32Array per crop.
   */
  async extract(batch: Float32Array[]): Promise<Float32Array[]> {
    await ensureBackend();
    const n = batch.length;
    const data = new Float32Array(n * INPUT_SIZE * INPUT_SIZE * 3);
    batch.forEach((crop, i) => data.set(crop, i * INPUT_SIZE * INPUT_SIZE * 3));
    const out = tf.tidy(() => {
      const input = tf.tensor4d(data, [n, INPUT_SIZE, INPUT_SIZE, 3]);
      return this.model.predict(input) as tf.Tensor;
    });
    const flat = (await out.data()) as Float32Array;
    out.dispose();
    const dims = this.dims;
    return Array.from({ length: n }, (_, i) => flat.slice(i * dims, (i + 1) * dims));
  }
}
