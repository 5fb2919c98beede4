/**
 * Entry point: wires the app to a running curation service.
 *
 * Open as  index.html?session=<id>[&api=http://127.0.0.1:8777]
 * The session id is printed by `fewintent curate` on startup.
 */

import { CurationClient } from "./api.js";
import { CurationApp } from "./app.js";

const DEFAULT_API = "http://127.0.0.1:8777";

function fail(root: HTMLElement, message: string): void {
  const p = document.createElement("p");
  p.className = "notice";
  p.textContent = message;
  root.appendChild(p);
}

const root = document.getElementById("app");
if (root) {
  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get("session");
  const api = params.get("api") ?? DEFAULT_API;
  if (!sessionId) {
    fail(root, "missing ?session=<id> (printed by the curate command)");
  } else {
    const app = new CurationApp(new CurationClient(api), root);
    app.start(sessionId).catch((err) => {
      fail(root, `could not load session ${sessionId}: ${String(err)}`);
    });
  }
}
