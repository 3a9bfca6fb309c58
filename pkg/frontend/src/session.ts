/** Review session state machine: one lease, local edits, submit/expiry rules. */

import { ApiClient, ApiError } from "./api.js";
import type { Decision, Item, Verdict, VerdictKind } from "./types.js";

export type SessionState = "IDLE" | "REVIEWING" | "SUBMITTING";

export interface LocalEdit {
  verdict: VerdictKind;
  newLabel?: string;
  /** Free-text label not present in the active vocabulary. */
  isNewLabel?: boolean;
}

export interface SessionOptions {
  /** Epoch seconds, injectable for tests. */
  clock?: () => number;
  /** Backoff sleep, injectable for tests. */
  sleep?: (ms: number) => Promise<void>;
  retryDelaysMs?: number[];
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class ReviewSession {
  readonly reviewer: string;
  state: SessionState = "IDLE";
  item: Item | null = null;
  focusedPartlet = 0;
  /** partlet index -> local edit; cleared on submit or lease expiry. */
  readonly edits = new Map<number, LocalEdit>();

  private readonly client: ApiClient;
  private readonly clock: () => number;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly retryDelaysMs: number[];

  constructor(client: ApiClient, reviewer: string, options: SessionOptions = {}) {
    this.client = client;
    this.reviewer = reviewer;
    this.clock = options.clock ?? (() => Date.now() / 1000);
    this.sleep = options.sleep ?? defaultSleep;
    this.retryDelaysMs = options.retryDelaysMs ?? [500, 1000, 2000];
  }

  /**
   * Lease the next item. Network failures retry with backoff without
   * assuming a lease; an empty queue goes to IDLE.
   */
  async loadNext(): Promise<Item | null> {
    this.clearLocal();
    let lastError: unknown = null;
    for (let attempt = 0; attempt <= this.retryDelaysMs.length; attempt++) {
      try {
        const item = await this.client.queueNext(this.reviewer);
        this.item = item;
        this.state = item === null ? "IDLE" : "REVIEWING";
        return item;
      } catch (err) {
        if (err instanceof ApiError) throw err; // server spoke; don't retry blindly
        lastError = err;
        if (attempt < this.retryDelaysMs.length) {
          await this.sleep(this.retryDelaysMs[attempt]);
        }
      }
    }
    this.state = "IDLE";
    throw lastError;
  }

  secondsRemaining(): number | null {
    if (this.item?.lease == null) return null;
    return this.item.lease.expiry - this.clock();
  }

  /** Call periodically; on lease expiry, discards edits and drops the item. */
  tick(): "expired" | "active" | "idle" {
    if (this.state !== "REVIEWING" || this.item === null) return "idle";
    const remaining = this.secondsRemaining();
    if (remaining !== null && remaining <= 0) {
      this.clearLocal();
      this.state = "IDLE";
      return "expired";
    }
    return "active";
  }

  private requireItem(): Item {
    if (this.state !== "REVIEWING" || this.item === null) {
      throw new Error("no leased item");
    }
    return this.item;
  }

  private partletCount(): number {
    return this.requireItem().prediction.partlets.length;
  }

  accept(index: number): void {
    this.setEdit(index, { verdict: "ACCEPT" });
  }

  rejectPart(index: number): void {
    this.setEdit(index, { verdict: "REJECT_PART" });
  }

  relabel(index: number, label: string, isNewLabel = false): void {
    this.setEdit(index, { verdict: "RELABEL", newLabel: label, isNewLabel });
  }

  acceptAll(): void {
    const n = this.partletCount();
    for (let i = 0; i < n; i++) this.accept(i);
  }

  nextPartlet(): void {
    this.focusedPartlet = Math.min(this.focusedPartlet + 1, this.partletCount() - 1);
  }

  prevPartlet(): void {
    this.focusedPartlet = Math.max(this.focusedPartlet - 1, 0);
  }

  private setEdit(index: number, edit: LocalEdit): void {
    const n = this.partletCount();
    if (index < 0 || index >= n) throw new Error(`partlet index ${index} out of range`);
    this.edits.set(index, edit);
  }

  /** Unedited partlets default to ACCEPT; edits override. */
  buildDecision(): Decision {
    const item = this.requireItem();
    const verdicts: Verdict[] = [];
    for (let i = 0; i < item.prediction.partlets.length; i++) {
      const edit = this.edits.get(i);
      if (edit === undefined) {
        verdicts.push({ partlet_index: i, verdict: "ACCEPT" });
      } else if (edit.verdict === "RELABEL") {
        verdicts.push({ partlet_index: i, verdict: "RELABEL", new_label: edit.newLabel });
      } else {
        verdicts.push({ partlet_index: i, verdict: edit.verdict });
      }
    }
    return { reviewer: this.reviewer, revision: item.revision, verdicts };
  }

  /**
   * Submit all verdicts. On success, clears edits and leases the next item.
   * A stale lease (409) discards local edits and reloads. Validation errors
   * (422) are rethrown with the item still under review.
   */
  async submit(): Promise<Item | null> {
    const item = this.requireItem();
    const decision = this.buildDecision();
    this.state = "SUBMITTING";
    try {
      await this.client.submitDecision(item.shape_id, decision);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.clearLocal();
        return this.loadNext();
      }
      this.state = "REVIEWING";
      throw err;
    }
    return this.loadNext();
  }

  private clearLocal(): void {
    this.edits.clear();
    this.item = null;
    this.focusedPartlet = 0;
  }
}
