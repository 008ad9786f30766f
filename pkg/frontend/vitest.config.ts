import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    testTimeout: 180_000,
    hookTimeout: 90_000,
    // each test file spawns its own service process, so run files one
    // at a time, each in a fresh fork (global fetch does not survive a
    // jsdom environment swap within one process)
    fileParallelism: false,
    pool: "forks",
  },
});
