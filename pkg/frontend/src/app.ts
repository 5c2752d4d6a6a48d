// Browser entry point: socket wiring, canvas, keyboard, stats panel.

import { InputHandler } from "./input.js";
import { Canvas2D, renderFrame } from "./render.js";
import { ClientMessage, Frame, ServerMessage, isFrame } from "./protocol.js";
import { StatsPanel } from "./stats.js";

const RECONNECT_DELAY_MS = 1500;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function setup(): void {
  const canvas = byId<HTMLCanvasElement>("arena");
  const ctx = canvas.getContext("2d") as unknown as Canvas2D;
  const statusEl = byId<HTMLElement>("status");
  const statsEl = byId<HTMLElement>("stats");
  const panel = new StatsPanel();
  let input: InputHandler | null = null;
  let lastFrame: Frame | null = null;
  let socket: WebSocket | null = null;

  const send = (msg: ClientMessage) => {
    if (socket && socket.readyState === WebSocket.OPEN) {
      socket.send(JSON.stringify(msg));
    } else {
      statusEl.textContent = "disconnected: input dropped";
    }
  };

  const onMessage = (msg: ServerMessage) => {
    if (isFrame(msg)) {
      lastFrame = msg;
      if (!input) {
        input = new InputHandler(msg.state.kind === "gridnav" ? "gridnav" : "reachgap", send);
      }
      input.setOwner(msg.owner);
      renderFrame(ctx, msg, canvas.width, canvas.height);
      if (msg.done) {
        statusEl.textContent = msg.success ? "episode done: success" : "episode done";
      }
    } else if (msg.type === "stats") {
      panel.update(msg);
      statsEl.textContent = panel.barRows().join("\n");
    } else if (msg.type === "train_progress") {
      statusEl.textContent = `training... epoch ${msg.epoch} loss ${msg.loss.toFixed(3)}`;
    } else if (msg.type === "ack" && msg.event === "train_done") {
      statusEl.textContent = `training done (round ${msg["iteration"]})`;
      send({ type: "stats" });
    } else if (msg.type === "error") {
      statusEl.textContent = `error: ${msg.msg}`;
    }
  };

  const connect = () => {
    const proto = location.protocol === "https:" ? "wss" : "ws";
    socket = new WebSocket(`${proto}://${location.host}/session`);
    socket.onopen = () => {
      statusEl.textContent = "connected";
      send({ type: "stats" });
    };
    socket.onmessage = (ev) => {
      try {
        onMessage(JSON.parse(ev.data) as ServerMessage);
      } catch (err) {
        statusEl.textContent = `render error: ${err}`;
      }
    };
    socket.onclose = () => {
      statusEl.textContent = "disconnected, retrying...";
      setTimeout(connect, RECONNECT_DELAY_MS);
    };
  };

  window.addEventListener("keydown", (ev) => {
    if ([" ", "ArrowUp", "ArrowDown", "ArrowLeft", "ArrowRight"].includes(ev.key)) {
      ev.preventDefault();
    }
    if (!input && lastFrame === null) return;
    input?.handleKeyDown({ key: ev.key, repeat: ev.repeat });
  });

  byId<HTMLButtonElement>("start").onclick = () => send({ type: "start_episode" });
  byId<HTMLButtonElement>("train").onclick = () => send({ type: "train", iterations: 1 });
  byId<HTMLButtonElement>("refresh-stats").onclick = () => send({ type: "stats" });

  connect();
}

window.addEventListener("DOMContentLoaded", setup);
