import { describe, expect, it } from "vitest";

import { actionForKey, bindings } from "../src/keyboard.js";

describe("actionForKey", () => {
  it("maps the documented review keys", () => {
    expect(actionForKey("a")).toBe("accept-all");
    expect(actionForKey("x")).toBe("reject-partlet");
    expect(actionForKey("r")).toBe("relabel-focus");
    expect(actionForKey("j")).toBe("next-partlet");
    expect(actionForKey("k")).toBe("prev-partlet");
    expect(actionForKey("Enter")).toBe("submit");
  });

  it("ignores unbound keys", () => {
    expect(actionForKey("q")).toBeNull();
  });

  it("ignores chords so browser shortcuts still work", () => {
    expect(actionForKey("a", { ctrl: true })).toBeNull();
    expect(actionForKey("Enter", { meta: true })).toBeNull();
  });

  it("exposes every binding exactly once", () => {
    const keys = bindings().map(([k]) => k);
    expect(new Set(keys).size).toBe(keys.length);
  });
});
