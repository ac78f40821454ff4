/**
 * Export profiles: which architecture to run, which block outputs to pool
 * and concatenate, and the dimensionality the result must have. Dims follow
 * from the architectures' channel counts (VGG19 blocks: 64/128/256/512/512;
 * ResNet50V2 final stage: 2048 channels at 7x7 for 224x224 input), so a
 * mismatch means the model was built wrong and the export must abort.
 */

export type Architecture = 'vgg19' | 'resnet50v2';

export interface ExportProfileSpec {
  name: string;
  architecture: Architecture;
  /** layer names whose outputs are global-average-pooled and concatenated */
  taps: string[];
  /** flatten spatial maps instead of pooling (ResNet Conv variant) */
  flatten?: boolean;
  expectedDims: number;
}

const VGG_BLOCK = (n: number) => `block${n}_pool`;

export const PROFILES: Record<string, ExportProfileSpec> = {
  'vgg19-blocks': {
    name: 'vgg19-blocks',
    architecture: 'vgg19',
    taps: [1, 2, 3, 4, 5].map(VGG_BLOCK),
    expectedDims: 1472,
  },
  'vgg19-block4-5': {
    name: 'vgg19-block4-5',
    architecture: 'vgg19',
    taps: [4, 5].map(VGG_BLOCK),
    expectedDims: 1024,
  },
  'vgg19-block2-3': {
    name: 'vgg19-block2-3',
    architecture: 'vgg19',
    taps: [2, 3].map(VGG_BLOCK),
    expectedDims: 384,
  },
  'vgg19-block2-5': {
    name: 'vgg19-block2-5',
    architecture: 'vgg19',
    taps: [2, 5].map(VGG_BLOCK),
    expectedDims: 640,
  },
  'resnet50v2-gapool': {
    name: 'resnet50v2-gapool',
    architecture: 'resnet50v2',
    taps: ['post_relu'],
    expectedDims: 2048,
  },
  'resnet50v2-conv': {
    name: 'resnet50v2-conv',
    architecture: 'resnet50v2',
    taps: ['post_relu'],
    flatten: true,
    expectedDims: 100352,
  },
};

export function getProfile(name: string): ExportProfileSpec {
  const p = PROFILES[name];
  if (!p) {
    throw new Error(`unknown profile '${name}'; known: ${Object.keys(PROFILES).join(', ')}`);
  }
  return p;
}
