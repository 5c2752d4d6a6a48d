import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import Ajv from "ajv";
import { describe, expect, it } from "vitest";

import { ClientMessage } from "../src/protocol.js";

const here = dirname(fileURLToPath(import.meta.url));
const schema = JSON.parse(
  readFileSync(join(here, "..", "..", "schema", "ws-messages.schema.json"), "utf-8"),
);

const ajv = new Ajv({ strict: false });
const validateClient = ajv.compile({
  $ref: "#/definitions/client_message",
  definitions: schema.definitions,
});
const validateServer = ajv.compile({
  $ref: "#/definitions/server_message",
  definitions: schema.definitions,
});

export const EVERY_CLIENT_MESSAGE: ClientMessage[] = [
  { type: "start_episode" },
  { type: "intervene", on: true },
  { type: "intervene", on: false },
  { type: "action", key: "up" },
  { type: "action", key: "down" },
  { type: "action", key: "left" },
  { type: "action", key: "right" },
  { type: "action", key: "stay" },
  { type: "action", a: [0.05, 0] },
  { type: "action", a: [-0.05, 0.05] },
  { type: "train", iterations: 1 },
  { type: "train", iterations: 3 },
  { type: "stats" },
];

describe("client protocol conformance", () => {
  it("accepts every message the client can emit", () => {
    for (const msg of EVERY_CLIENT_MESSAGE) {
      expect(validateClient(msg), JSON.stringify(msg)).toBe(true);
    }
  });

  it("rejects malformed messages", () => {
    const bad = [
      { type: "intervene" }, // missing on
      { type: "action", key: "diagonal" },
      { type: "action", a: [0.05] },
      { type: "train", iterations: 0 },
      { type: "warp" },
    ];
    for (const msg of bad) {
      expect(validateClient(msg), JSON.stringify(msg)).toBe(false);
    }
  });

  it("accepts representative server frames", () => {
    const frames = [
      {
        type: "frame", t: 0, episode: 0, owner: "robot", done: false, success: false,
        state: {
          kind: "gridnav", cell: [0, 0], goal: [3, 3], walls: [[1, 1]], hazards: [[2, 2]],
          width: 4, height: 4,
        },
      },
      {
        type: "frame", t: 12, episode: 2, owner: "human", done: true, success: true,
        state: {
          kind: "reachgap", pos: [0.7, 0.4], goal: [0.2, 0.9], wall_y: 0.5,
          gap_x: 0.7, gap_half_width: 0.04, success_radius: 0.03,
        },
      },
      { type: "train_progress", epoch: 5, loss: 0.42 },
      { type: "stats", success_rate: 0.8, intervention_rate: 0.2, iteration: 3 },
      { type: "error", msg: "nope" },
    ];
    for (const msg of frames) {
      expect(validateServer(msg), JSON.stringify(msg)).toBe(true);
    }
  });
});
