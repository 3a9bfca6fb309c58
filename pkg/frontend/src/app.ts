/** Browser wiring: DOM, canvas, keyboard, and the lease countdown. */

import { ApiClient, ApiError } from "./api.js";
import { actionForKey } from "./keyboard.js";
import {
  buildLegend,
  pointColors,
  renderCloud,
  visiblePartlets,
  type Point3,
} from "./render.js";
import { ReviewSession } from "./session.js";
import { classifyLabel, searchVocab } from "./vocab.js";

interface AppElements {
  canvas: HTMLCanvasElement;
  sidebar: HTMLElement;
  statusLine: HTMLElement;
  countdown: HTMLElement;
  vocabInput: HTMLInputElement;
  vocabList: HTMLElement;
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node;
}

/** Deterministic placeholder geometry: one blob of points per partlet. */
function placeholderCloud(numPartlets: number, pointsPer = 80): Point3[] {
  const points: Point3[] = [];
  for (let p = 0; p < Math.max(numPartlets, 1); p++) {
    const angle = (2 * Math.PI * p) / Math.max(numPartlets, 1);
    const cx = Math.cos(angle), cy = Math.sin(angle);
    for (let i = 0; i < pointsPer; i++) {
      // low-discrepancy offsets keep the blob stable between renders
      const u = ((i * 0.754877666) % 1) - 0.5;
      const v = ((i * 0.569840296) % 1) - 0.5;
      points.push([cx + 0.6 * u, cy + 0.6 * v, 0]);
    }
  }
  return points;
}

export function startApp(baseUrl: string): void {
  const elements: AppElements = {
    canvas: el("cloud") as HTMLCanvasElement,
    sidebar: el("sidebar"),
    statusLine: el("status-line"),
    countdown: el("countdown"),
    vocabInput: el("vocab-input") as HTMLInputElement,
    vocabList: el("vocab-list"),
  };
  const client = new ApiClient(baseUrl);
  const session = new ReviewSession(client, `reviewer-${Math.floor(Math.random() * 1e6)}`);
  let vocabLabels: string[] = [];

  function setStatus(text: string): void {
    elements.statusLine.textContent = text;
  }

  function renderItem(): void {
    elements.sidebar.replaceChildren();
    const item = session.item;
    if (item === null) {
      setStatus("Queue empty — press N to re-check.");
      return;
    }
    const flag = item.low_confidence ? " ⚠ low confidence" : "";
    setStatus(`${item.shape_id} (${item.prediction.category ?? "?"})${flag}`);
    const legend = buildLegend(item);
    for (const entry of legend) {
      const row = document.createElement("div");
      row.className = "legend-row" + (entry.index === session.focusedPartlet ? " focused" : "");
      const swatch = document.createElement("span");
      swatch.className = "swatch";
      swatch.style.background = entry.color;
      const label = document.createElement("span");
      const edit = session.edits.get(entry.index);
      const shown = edit?.verdict === "RELABEL" ? edit.newLabel : entry.name;
      const marker = edit === undefined ? "" :
        edit.verdict === "REJECT_PART" ? " [rejected]" :
        edit.isNewLabel ? " [NEW_LABEL]" : edit.verdict === "RELABEL" ? " [relabeled]" : " [ok]";
      label.textContent = `${shown} (${entry.confFused.toFixed(2)})${marker}`;
      if (entry.lowConfidence) label.className = "low-confidence";
      row.append(swatch, label);
      elements.sidebar.append(row);
    }
    const partlets = visiblePartlets(item);
    const cloud = placeholderCloud(partlets.length);
    const perPartlet = cloud.length / Math.max(partlets.length, 1);
    const colors = cloud.map((_, i) =>
      pointColors(item, partlets.length)[Math.floor(i / perPartlet)] ?? "#9e9e9e");
    const ctx = elements.canvas.getContext("2d");
    if (ctx !== null) {
      renderCloud(ctx, cloud, colors, elements.canvas.width, elements.canvas.height);
    }
  }

  async function refreshVocab(): Promise<void> {
    const category = session.item?.prediction.category;
    vocabLabels = category ? (await client.vocab(category)).labels : [];
  }

  function showSuggestions(): void {
    const matches = searchVocab(vocabLabels, elements.vocabInput.value).slice(0, 8);
    elements.vocabList.replaceChildren();
    for (const label of matches) {
      const li = document.createElement("li");
      li.textContent = label;
      li.addEventListener("click", () => {
        session.relabel(session.focusedPartlet, label);
        elements.vocabInput.value = "";
        renderItem();
      });
      elements.vocabList.append(li);
    }
  }

  async function advance(): Promise<void> {
    try {
      await session.loadNext();
      await refreshVocab();
    } catch (err) {
      setStatus(err instanceof ApiError ? err.detail : "service unreachable");
    }
    renderItem();
  }

  elements.vocabInput.addEventListener("input", showSuggestions);
  elements.vocabInput.addEventListener("keydown", (event) => {
    event.stopPropagation();
    if (event.key !== "Enter") return;
    const text = elements.vocabInput.value;
    const first = searchVocab(vocabLabels, text)[0];
    const choice = first !== undefined ? { label: first, isNew: false } : classifyLabel(vocabLabels, text);
    if (choice.label !== "") {
      session.relabel(session.focusedPartlet, choice.label, choice.isNew);
    }
    elements.vocabInput.value = "";
    elements.vocabList.replaceChildren();
    renderItem();
  });

  document.addEventListener("keydown", (event) => {
    const action = actionForKey(event.key, {
      ctrl: event.ctrlKey, alt: event.altKey, meta: event.metaKey,
    });
    if (action === null || session.item === null && action !== "skip") return;
    event.preventDefault();
    switch (action) {
      case "accept-all": session.acceptAll(); break;
      case "accept-partlet": session.accept(session.focusedPartlet); break;
      case "reject-partlet": session.rejectPart(session.focusedPartlet); break;
      case "next-partlet": session.nextPartlet(); break;
      case "prev-partlet": session.prevPartlet(); break;
      case "relabel-focus": elements.vocabInput.focus(); return;
      case "submit":
        void session.submit().then(refreshVocab).then(renderItem)
          .catch((err) => setStatus(err instanceof ApiError ? err.detail : String(err)));
        return;
      case "skip": void advance(); return;
    }
    renderItem();
  });

  setInterval(() => {
    const remaining = session.secondsRemaining();
    elements.countdown.textContent = remaining === null ? "" : `${Math.max(0, Math.floor(remaining))}s`;
    if (session.tick() === "expired") {
      setStatus("lease expired — edits discarded");
      void advance();
    }
  }, 1000);

  void advance();
}
