/** Keyboard-first bindings for the review workflow. */

export type KeyAction =
  | "accept-all"
  | "accept-partlet"
  | "reject-partlet"
  | "relabel-focus"
  | "next-partlet"
  | "prev-partlet"
  | "submit"
  | "skip";

const BINDINGS: Record<string, KeyAction> = {
  a: "accept-all",
  " ": "accept-partlet",
  x: "reject-partlet",
  r: "relabel-focus",
  j: "next-partlet",
  ArrowDown: "next-partlet",
  k: "prev-partlet",
  ArrowUp: "prev-partlet",
  Enter: "submit",
  n: "skip",
};

/**
 * Translate a key press into a review action, or null when unbound or when
 * a modifier is held (so browser shortcuts keep working).
 */
export function actionForKey(
  key: string,
  modifiers: { ctrl?: boolean; alt?: boolean; meta?: boolean } = {},
): KeyAction | null {
  if (modifiers.ctrl || modifiers.alt || modifiers.meta) return null;
  return BINDINGS[key] ?? null;
}

export function bindings(): ReadonlyArray<[string, KeyAction]> {
  return Object.entries(BINDINGS);
}
