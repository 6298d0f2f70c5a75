import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['test/**/*.test.ts'],
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // training tests share one process so tfjs state stays predictable
    pool: 'forks',
    maxConcurrency: 1,
  },
});
