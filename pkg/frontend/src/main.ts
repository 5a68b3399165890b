// Entry point: base URL and token come from the query string, so the
// static bundle needs no build-time configuration.
//
//   index.html?api=http://localhost:8080&token=...

import { ApiClient } from "./api.js";
import { Session } from "./session.js";
import { DomView } from "./view.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
const token = params.get("token");

const root = document.getElementById("app")!;
const api = new ApiClient(base, token);
const session = new Session(api, () => view.render());
const view = new DomView(root, session);

window.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLSelectElement) return;
  if (session.editor && session.editor.key(ev.key)) {
    ev.preventDefault();
    view.render();
  }
  if (ev.key === "Enter" && session.canSubmit()) void session.submitCurrent();
});

view.render();
void session.start();
