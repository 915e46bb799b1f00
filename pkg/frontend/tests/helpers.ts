import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

/** Text of a checked-in artifact fixture. */
export function fixture(name: string): string {
  return readFileSync(fixturePath(name), "utf8");
}

/** Absolute path of a fixture, or of the fixtures directory itself. */
export function fixturePath(name = ""): string {
  return fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));
}
