import { AgentClient } from "./api";
import { Poller } from "./poll";
import { GridRenderer } from "./render";
import { GridState } from "./state";

const POLL_INTERVAL_MS = (() => {
  const raw = new URLSearchParams(window.location.search).get("interval");
  const parsed = raw ? Number(raw) * 1000 : NaN;
  return Number.isFinite(parsed) && parsed > 0 ? parsed : 5000;
})();

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app element");
}

const client = new AgentClient("");
const state = new GridState();
const renderer = new GridRenderer(root, state, client);
const poller = new Poller(client, state, POLL_INTERVAL_MS, (diff) => {
  if (diff.snapshotChanged || diff.connectivityChanged) {
    renderer.refresh(diff);
  }
});

renderer.refresh();
poller.start();
