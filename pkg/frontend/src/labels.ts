// Draft labels are edited as spans and submitted as BIO rows.
// Row encoding: 0 = O, 2r+1 = B of role r, 2r+2 = I of role r.

import { AnnotationTask, LabelSubmission } from "./types.js";

export type Span = {
  start: number; // token index, inclusive
  end: number;   // token index, exclusive
  role: number;
};

export type Draft = {
  triggers: number[]; // event type per candidate, 0 = NA
  spans: Span[][];    // argument spans per candidate
};

export function emptyDraft(k: number): Draft {
  return {
    triggers: new Array(k).fill(0),
    spans: Array.from({ length: k }, () => []),
  };
}

export function overlaps(a: Span, b: Span): boolean {
  return a.start < b.end && b.start < a.end;
}

export function rowFromSpans(spans: Span[], n: number): number[] {
  const row = new Array(n).fill(0);
  const ordered = [...spans].sort((a, b) => a.start - b.start);
  for (const s of ordered) {
    row[s.start] = 2 * s.role + 1;
    for (let i = s.start + 1; i < s.end; i++) row[i] = 2 * s.role + 2;
  }
  return row;
}

export function spansFromRow(row: number[]): Span[] {
  const out: Span[] = [];
  let open: Span | null = null;
  for (let i = 0; i < row.length; i++) {
    const v = row[i];
    if (open && v === 2 * open.role + 2) {
      open.end = i + 1;
      continue;
    }
    if (open) {
      out.push(open);
      open = null;
    }
    if (v > 0 && v % 2 === 1) open = { start: i, end: i + 1, role: (v - 1) / 2 };
  }
  if (open) out.push(open);
  return out;
}

/**
 * Client-side validation. Every draft this accepts must also pass the
 * server; the client is allowed to be stricter (it refuses overlapping
 * spans outright instead of letting BIO encoding resolve them).
 */
export function draftProblems(draft: Draft, task: AnnotationTask): string[] {
  const k = task.candidates.length;
  const n = task.tokens.length;
  const nTypes = task.schema.event_types.length;
  const nRoles = task.schema.roles.length;
  const problems: string[] = [];
  if (draft.triggers.length !== k || draft.spans.length !== k) {
    problems.push(`draft shape mismatch: expected ${k} candidates`);
    return problems;
  }
  draft.triggers.forEach((t, i) => {
    if (!Number.isInteger(t) || t < 0 || t >= nTypes)
      problems.push(`candidate ${i}: event type ${t} out of range`);
  });
  draft.spans.forEach((spans, i) => {
    if (draft.triggers[i] === 0 && spans.length > 0)
      problems.push(`candidate ${i}: NA triggers take no arguments`);
    spans.forEach((s, j) => {
      if (s.start < 0 || s.end > n || s.start >= s.end)
        problems.push(`candidate ${i}: span ${j} out of range`);
      if (!Number.isInteger(s.role) || s.role < 0 || s.role >= nRoles)
        problems.push(`candidate ${i}: span ${j} role out of range`);
      for (let m = 0; m < j; m++)
        if (overlaps(s, spans[m]))
          problems.push(`candidate ${i}: span ${j} overlaps span ${m}`);
    });
  });
  return problems;
}

export function toSubmission(draft: Draft, task: AnnotationTask): LabelSubmission {
  const n = task.tokens.length;
  return {
    id: task.id,
    trigger_labels: [...draft.triggers],
    argument_labels: draft.spans.map((s) => rowFromSpans(s, n)),
  };
}
