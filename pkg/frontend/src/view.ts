// DOM view: renders the whole app from session state on every change.
// All interaction is delegated back to the Session/TaskEditor, so this
// file stays free of labeling logic.

import { Session } from "./session.js";
import { TaskEditor } from "./editor.js";
import { spanColor } from "./palette.js";

export class DomView {
  private dragStart: number | null = null;

  constructor(private root: HTMLElement, private session: Session) {}

  render(): void {
    const s = this.session;
    this.root.innerHTML = `
      ${s.banner ? `<div class="banner">${esc(s.banner)}</div>` : ""}
      <header>
        <h1>alee annotator</h1>
        ${this.statusHtml()}
      </header>
      <main>
        <nav id="tasklist">${this.taskListHtml()}</nav>
        <section id="editor">${this.editorHtml()}</section>
        <aside id="dashboard">
          <h2>learning curve</h2>
          <canvas id="curve" width="280" height="160"></canvas>
          <p class="hint">digits set the event type, arrows move between
          candidates, click a role then drag across tokens to paint a
          span, escape stops painting.</p>
        </aside>
      </main>`;
    this.wire();
    this.drawCurve();
  }

  private statusHtml(): string {
    const st = this.session.status;
    if (!st) return `<div class="status">connecting...</div>`;
    const { done, total } = this.session.progress();
    const pct = total ? Math.round((100 * done) / total) : 0;
    const f1 = st.f1 ? st.f1.trigger_f1.toFixed(3) : "n/a";
    return `
      <div class="status">
        round ${st.round} | labeled ${st.labeled} | trigger F1 ${f1}
        | ${st.strategy}${st.training ? " | training..." : ""}
      </div>
      <div class="progress" title="${done}/${total} this round">
        <div class="bar" style="width:${pct}%"></div>
        <span>${done}/${total}</span>
      </div>`;
  }

  private taskListHtml(): string {
    const s = this.session;
    if (!s.tasks.length) return `<p>no open tasks</p>`;
    return s.tasks
      .map((t, i) => {
        const active = s.editor && s.editor.task.id === t.id ? "active" : "";
        const done = s.submitted.has(t.id) ? "done" : "";
        return `<div class="task ${active} ${done}" data-idx="${i}">
          ${esc(t.id)} <small>${t.importance.toFixed(3)}</small></div>`;
      })
      .join("");
  }

  private editorHtml(): string {
    const ed = this.session.editor;
    if (!ed) return `<p>nothing to label.</p>`;
    const chips = ed.task.tokens
      .map((tok, i) => {
        const cls = ["chip"];
        const cand = ed.task.candidates.findIndex(
          (c) => i >= c.start && i < c.end,
        );
        if (cand >= 0) cls.push("cand");
        if (cand === ed.focus) cls.push("focus");
        let style = "";
        for (const sp of ed.draft.spans[ed.focus] ?? [])
          if (i >= sp.start && i < sp.end)
            style = `style="border-bottom:3px solid ${spanColor(sp.role)}"`;
        return `<span class="${cls.join(" ")}" data-tok="${i}" ${style}>
          ${esc(tok)}</span>`;
      })
      .join(" ");
    return `
      <div class="tokens">${chips}</div>
      ${ed.task.candidates.map((_, c) => this.candidateHtml(ed, c)).join("")}
      ${ed.message ? `<div class="inline-error">${esc(ed.message)}</div>` : ""}
      <button id="submit" ${this.session.canSubmit() ? "" : "disabled"}>
        submit</button>`;
  }

  private candidateHtml(ed: TaskEditor, c: number): string {
    const t = ed.task;
    const cand = t.candidates[c];
    const word = t.tokens.slice(cand.start, cand.end).join(" ");
    const types = t.schema.event_types
      .map(
        (name, j) => `<option value="${j}"
          ${ed.draft.triggers[c] === j ? "selected" : ""}>${j}: ${esc(name)}</option>`,
      )
      .join("");
    const painting =
      ed.mode.kind === "paint" && ed.mode.cand === c ? ed.mode.role : -1;
    const roles = t.schema.roles
      .map(
        (name, r) => `<button class="role ${painting === r ? "on" : ""}"
          data-cand="${c}" data-role="${r}"
          ${ed.draft.triggers[c] === 0 ? "disabled" : ""}>${esc(name)}</button>`,
      )
      .join("");
    const spans = ed.draft.spans[c]
      .map(
        (sp, j) => `<span class="spantag"
          style="background:${spanColor(sp.role)}">
          ${esc(t.schema.roles[sp.role])} [${sp.start},${sp.end})
          <a data-cand="${c}" data-span="${j}">x</a></span>`,
      )
      .join("");
    return `
      <div class="candidate ${ed.focus === c ? "focus" : ""}" data-cand="${c}">
        <b>${esc(word)}</b> <small>${esc(cand.pos)}</small>
        <select class="typepick" data-cand="${c}">${types}</select>
        <span class="roles">${roles}</span>
        <span class="spans">${spans}</span>
      </div>`;
  }

  private wire(): void {
    const s = this.session;
    const ed = s.editor;
    this.root.querySelectorAll<HTMLElement>("#tasklist .task").forEach((el) =>
      el.addEventListener("click", () => s.open(Number(el.dataset.idx))),
    );
    if (!ed) return;
    this.root.querySelectorAll<HTMLSelectElement>(".typepick").forEach((el) =>
      el.addEventListener("change", () => {
        ed.focus = Number(el.dataset.cand);
        ed.setTrigger(Number(el.dataset.cand), Number(el.value));
        this.render();
      }),
    );
    this.root.querySelectorAll<HTMLElement>("button.role").forEach((el) =>
      el.addEventListener("click", () => {
        ed.startPaint(Number(el.dataset.cand), Number(el.dataset.role));
        this.render();
      }),
    );
    this.root.querySelectorAll<HTMLElement>(".spantag a").forEach((el) =>
      el.addEventListener("click", () => {
        ed.removeSpan(Number(el.dataset.cand), Number(el.dataset.span));
        this.render();
      }),
    );
    this.root.querySelectorAll<HTMLElement>(".chip").forEach((el) => {
      el.addEventListener("mousedown", () => {
        this.dragStart = Number(el.dataset.tok);
      });
      el.addEventListener("mouseup", () => {
        if (this.dragStart === null) return;
        const a = this.dragStart;
        const b = Number(el.dataset.tok);
        this.dragStart = null;
        if (ed.mode.kind === "paint") {
          ed.paintSpan(Math.min(a, b), Math.max(a, b) + 1);
          this.render();
        }
      });
    });
    const submit = this.root.querySelector<HTMLButtonElement>("#submit");
    submit?.addEventListener("click", () => void s.submitCurrent());
  }

  private drawCurve(): void {
    const canvas = this.root.querySelector<HTMLCanvasElement>("#curve");
    const pts = this.session.history;
    if (!canvas || !pts.length) return;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const w = canvas.width;
    const h = canvas.height;
    const maxX = Math.max(...pts.map((p) => p.labeled), 1);
    ctx.clearRect(0, 0, w, h);
    ctx.strokeStyle = "#888";
    ctx.strokeRect(0.5, 0.5, w - 1, h - 1);
    ctx.strokeStyle = "#1c7ed6";
    ctx.beginPath();
    pts.forEach((p, i) => {
      const x = 4 + (p.labeled / maxX) * (w - 8);
      const y = h - 4 - p.triggerF1 * (h - 8);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }
}

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
