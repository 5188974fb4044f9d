import { defineConfig } from "vitest/config";

// Campaign tests bind fixed loopback ports, so files must not run in parallel.
export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    fileParallelism: false,
    testTimeout: 300_000,
    hookTimeout: 60_000,
  },
});
