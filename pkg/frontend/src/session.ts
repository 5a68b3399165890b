// Annotation session controller: owns server state, the active task
// editor, and the learning-curve history. Views subscribe through the
// onChange callback and render from public fields only, so a scripted
// session (tests) and the DOM view drive identical code paths.

import { ApiClient, ApiError } from "./api.js";
import { TaskEditor } from "./editor.js";
import { toSubmission } from "./labels.js";
import { AnnotationTask, LabelSubmission, Status, SubmitAck } from "./types.js";

export type CurvePoint = { labeled: number; triggerF1: number };

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export class Session {
  status: Status | null = null;
  tasks: AnnotationTask[] = [];
  editor: TaskEditor | null = null;
  history: CurvePoint[] = [];
  banner = ""; // blocking error shown above everything
  busy = false;
  submitted = new Set<string>(); // ack'd ids, submit disabled for these

  private seenVersions = new Set<number>();

  constructor(
    public api: ApiClient,
    private onChange: () => void = () => {},
    private pollMs = 500,
  ) {}

  private changed(): void {
    this.onChange();
  }

  async refreshStatus(): Promise<Status> {
    const st = await this.api.status();
    this.status = st;
    if (st.f1 && !this.seenVersions.has(st.model_version)) {
      this.seenVersions.add(st.model_version);
      this.history.push({ labeled: st.labeled, triggerF1: st.f1.trigger_f1 });
      this.history.sort((a, b) => a.labeled - b.labeled);
    }
    this.changed();
    return st;
  }

  async loadTasks(): Promise<void> {
    this.tasks = await this.api.tasks();
    this.submitted.clear();
    this.editor = this.tasks.length ? new TaskEditor(this.tasks[0]) : null;
    this.changed();
  }

  /** Begin or resume a session: wait out any training, then fetch work. */
  async start(): Promise<void> {
    this.banner = "";
    try {
      await this.waitUntilIdle();
      await this.loadTasks();
    } catch (e) {
      this.banner = e instanceof Error ? e.message : String(e);
      this.changed();
    }
  }

  open(idx: number): void {
    if (idx < 0 || idx >= this.tasks.length) return;
    this.editor = new TaskEditor(this.tasks[idx]);
    this.changed();
  }

  private openNext(): void {
    const next = this.tasks.find((t) => !this.submitted.has(t.id));
    this.editor = next ? new TaskEditor(next) : null;
    this.changed();
  }

  canSubmit(): boolean {
    return (
      !this.busy &&
      this.editor !== null &&
      !this.submitted.has(this.editor.task.id) &&
      this.editor.canSubmit()
    );
  }

  /** Submit the active editor's draft. */
  async submitCurrent(): Promise<SubmitAck | null> {
    if (!this.editor || !this.canSubmit()) return null;
    return this.push(toSubmission(this.editor.draft, this.editor.task));
  }

  /**
   * Submit prepared labels. Server-side rejections surface inline on
   * the editor (422 keeps the task open); anything else is a banner.
   */
  async push(body: LabelSubmission): Promise<SubmitAck | null> {
    this.busy = true;
    this.changed();
    try {
      const ack = await this.api.submit(body);
      this.submitted.add(body.id);
      if (ack.round_advanced) {
        await this.waitUntilIdle();
        await this.loadTasks();
      } else {
        this.openNext();
      }
      await this.refreshStatus();
      return ack;
    } catch (e) {
      if (e instanceof ApiError && e.status === 422 && this.editor) {
        this.editor.message = e.detail;
      } else {
        this.banner = e instanceof Error ? e.message : String(e);
      }
      return null;
    } finally {
      this.busy = false;
      this.changed();
    }
  }

  /** Poll /api/status until the trainer is idle. */
  async waitUntilIdle(timeoutMs = 300_000): Promise<void> {
    const t0 = Date.now();
    for (;;) {
      try {
        const st = await this.refreshStatus();
        if (!st.training) return;
      } catch (e) {
        // 503 while the service boots: keep polling
        if (!(e instanceof ApiError && e.status === 503)) throw e;
      }
      if (Date.now() - t0 > timeoutMs)
        throw new Error("timed out waiting for training to finish");
      await sleep(this.pollMs);
    }
  }

  /** completed / query size, for the progress bar. */
  progress(): { done: number; total: number } {
    const st = this.status;
    if (!st) return { done: 0, total: 0 };
    return { done: st.completed, total: st.completed + st.pending };
  }
}
