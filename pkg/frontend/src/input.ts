// Keyboard handling: spacebar toggles takeover, movement keys become action
// messages while the human owns control. Key auto-repeat must not refire the
// takeover toggle, and movement input while the robot drives is dropped.

import { ClientMessage, GridKey } from "./protocol.js";

const ARROW_TO_KEY: Record<string, GridKey> = {
  ArrowUp: "up",
  ArrowDown: "down",
  ArrowLeft: "left",
  ArrowRight: "right",
  ".": "stay",
};

const WASD_TO_VECTOR: Record<string, [number, number]> = {
  w: [0, 1],
  s: [0, -1],
  a: [-1, 0],
  d: [1, 0],
};

export interface KeyEventLike {
  key: string;
  repeat?: boolean;
}

export class InputHandler {
  private intervening = false;
  private owner: "robot" | "human" = "robot";

  constructor(
    private envKind: "gridnav" | "reachgap",
    private send: (msg: ClientMessage) => void,
    private stepNorm = 0.05,
  ) {}

  setOwner(owner: "robot" | "human"): void {
    this.owner = owner;
    this.intervening = owner === "human";
  }

  get isIntervening(): boolean {
    return this.intervening;
  }

  handleKeyDown(ev: KeyEventLike): void {
    if (ev.key === " ") {
      if (ev.repeat) return; // held space must not retoggle
      this.intervening = !this.intervening;
      this.send({ type: "intervene", on: this.intervening });
      return;
    }
    if (this.owner !== "human") return; // movement only while in control
    if (this.envKind === "gridnav") {
      const key = ARROW_TO_KEY[ev.key];
      if (key) this.send({ type: "action", key });
    } else {
      const dir = WASD_TO_VECTOR[ev.key.toLowerCase()];
      if (dir) {
        this.send({
          type: "action",
          a: [dir[0] * this.stepNorm, dir[1] * this.stepNorm],
        });
      }
    }
  }
}
