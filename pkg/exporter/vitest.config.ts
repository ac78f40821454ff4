import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['test/**/*.test.ts'],
    testTimeout: 180_000,
    hookTimeout: 180_000,
    // tfjs state is process-global; keep a single worker
    pool: 'forks',
    poolOptions: { forks: { singleFork: true } },
  },
});
