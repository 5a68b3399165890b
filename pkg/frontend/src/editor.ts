// Per-task editing state machine, shared by the DOM view and the
// scripted tests. Two modes: picking event types, or painting one
// role's spans for one candidate.

import { Draft, Span, draftProblems, emptyDraft, overlaps } from "./labels.js";
import { AnnotationTask } from "./types.js";

export type Mode =
  | { kind: "type" }
  | { kind: "paint"; cand: number; role: number };

export class TaskEditor {
  draft: Draft;
  mode: Mode = { kind: "type" };
  focus = 0; // candidate index the keyboard acts on
  message = ""; // inline feedback, cleared on the next action

  constructor(public task: AnnotationTask) {
    this.draft = emptyDraft(task.candidates.length);
  }

  get k(): number {
    return this.task.candidates.length;
  }

  setTrigger(cand: number, type: number): void {
    this.message = "";
    const nTypes = this.task.schema.event_types.length;
    if (cand < 0 || cand >= this.k || type < 0 || type >= nTypes) {
      this.message = `no event type ${type}`;
      return;
    }
    this.draft.triggers[cand] = type;
    if (type === 0) {
      // NA takes no arguments: drop spans and leave paint mode
      this.draft.spans[cand] = [];
      if (this.mode.kind === "paint" && this.mode.cand === cand)
        this.mode = { kind: "type" };
    }
  }

  startPaint(cand: number, role: number): boolean {
    this.message = "";
    if (this.draft.triggers[cand] === 0) {
      this.message = "pick an event type before painting roles";
      return false;
    }
    if (role < 0 || role >= this.task.schema.roles.length) {
      this.message = `no role ${role}`;
      return false;
    }
    this.mode = { kind: "paint", cand, role };
    this.focus = cand;
    return true;
  }

  stopPaint(): void {
    this.mode = { kind: "type" };
  }

  /** Paint [start, end) with the active role. Rejects overlaps inline. */
  paintSpan(start: number, end: number): boolean {
    this.message = "";
    if (this.mode.kind !== "paint") {
      this.message = "not in painting mode";
      return false;
    }
    const { cand, role } = this.mode;
    const span: Span = { start, end, role };
    if (start < 0 || end > this.task.tokens.length || start >= end) {
      this.message = "span out of range";
      return false;
    }
    const clash = this.draft.spans[cand].find((s) => overlaps(s, span));
    if (clash) {
      const name = this.task.schema.roles[clash.role];
      this.message = `overlaps the ${name} span at ${clash.start}`;
      return false;
    }
    this.draft.spans[cand].push(span);
    return true;
  }

  removeSpan(cand: number, idx: number): void {
    this.message = "";
    this.draft.spans[cand].splice(idx, 1);
  }

  problems(): string[] {
    return draftProblems(this.draft, this.task);
  }

  canSubmit(): boolean {
    return this.k === 0 || this.problems().length === 0;
  }

  /**
   * Keyboard-first labeling: digits set the focused candidate's event
   * type (or the paint role while painting), tab/arrows move focus,
   * escape leaves paint mode. Returns true when the key was handled.
   */
  key(k: string): boolean {
    if (k === "Escape") {
      this.stopPaint();
      return true;
    }
    if (k === "ArrowRight" || k === "Tab") {
      this.focus = this.k ? (this.focus + 1) % this.k : 0;
      return true;
    }
    if (k === "ArrowLeft") {
      this.focus = this.k ? (this.focus + this.k - 1) % this.k : 0;
      return true;
    }
    if (/^[0-9]$/.test(k)) {
      const d = Number(k);
      if (this.mode.kind === "paint") this.startPaint(this.mode.cand, d);
      else this.setTrigger(this.focus, d);
      return true;
    }
    return false;
  }
}
