#!/usr/bin/env node
/**
 * psfeat-export --manifest crops.csv --profile vgg19-block4-5 --out f.psfeat
 *               [--weights model.json] [--seed 1234] [--batch 4]
 */

import { exportFeatures } from './export.js';
import { PROFILES, getProfile } from './profiles.js';

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith('--') || value === undefined) {
      throw new Error(`malformed arguments near '${key}'`);
    }
    args.set(key.slice(2), value);
  }
  return args;
}

async function main(): Promise<number> {
  const argv = process.argv.slice(2);
  if (argv.includes('--help') || argv.length === 0) {
    console.log(
      'usage: psfeat-export --manifest crops.csv --profile NAME --out features.psfeat\n' +
        '       [--weights model.json] [--seed N] [--batch N]\n' +
        `profiles: ${Object.keys(PROFILES).join(', ')}`,
    );
    return argv.length === 0 ? 2 : 0;
  }
  let args: Map<string, string>;
  try {
    args = parseArgs(argv);
  } catch (e) {
    console.error(String(e));
    return 2;
  }
  const manifest = args.get('manifest');
  const profileName = args.get('profile');
  const out = args.get('out');
  if (!manifest || !profileName || !out) {
    console.error('required: --manifest, --profile, --out');
    return 2;
  }
  try {
    const profile = getProfile(profileName);
    const count = await exportFeatures(manifest, profile, out, {
      seed: args.has('seed') ? Number(args.get('seed')) : undefined,
      weightsPath: args.get('weights'),
      batchSize: args.has('batch') ? Number(args.get('batch')) : undefined,
      log: (msg) => console.error(msg),
    });
    console.log(JSON.stringify({ out, profile: profileName, records: count }));
    return 0;
  } catch (e) {
    console.error(String(e));
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
