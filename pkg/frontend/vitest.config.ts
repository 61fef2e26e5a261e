import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // The session test spawns the real review server; give it room.
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
