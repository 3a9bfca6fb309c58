/** Vocabulary search for the part-name prompting box. */

/**
 * Rank vocabulary labels against a query: prefix matches first, then
 * substring matches, alphabetical within each group. An empty query
 * returns the whole vocabulary sorted.
 */
export function searchVocab(labels: string[], query: string): string[] {
  const q = query.trim().toLowerCase();
  const sorted = [...labels].sort();
  if (q === "") return sorted;
  const prefix: string[] = [];
  const substring: string[] = [];
  for (const label of sorted) {
    const l = label.toLowerCase();
    if (l.startsWith(q)) prefix.push(label);
    else if (l.includes(q)) substring.push(label);
  }
  return [...prefix, ...substring];
}

export interface LabelChoice {
  label: string;
  /** True when the text is not in the active vocabulary (free-text extension). */
  isNew: boolean;
}

/** Classify a committed text entry against the vocabulary. */
export function classifyLabel(labels: string[], text: string): LabelChoice {
  const trimmed = text.trim();
  return { label: trimmed, isNew: !labels.includes(trimmed) };
}
