// Message types for the live-session WebSocket protocol. The authoritative
// contract is schema/ws-messages.schema.json at the repository root; the
// client test suite validates every message this module can produce against
// that document.

export type GridKey = "up" | "down" | "left" | "right" | "stay";

export type ClientMessage =
  | { type: "start_episode" }
  | { type: "intervene"; on: boolean }
  | { type: "action"; key: GridKey }
  | { type: "action"; a: [number, number] }
  | { type: "train"; iterations: number }
  | { type: "stats" };

export interface GridNavState {
  kind: "gridnav";
  cell: [number, number];
  goal: [number, number];
  walls: [number, number][];
  hazards: [number, number][];
  width: number;
  height: number;
}

export interface ReachGapState {
  kind: "reachgap";
  pos: [number, number];
  goal: [number, number];
  wall_y: number;
  gap_x: number;
  gap_half_width: number;
  success_radius: number;
}

export interface Frame {
  type: "frame";
  t: number;
  episode: number;
  owner: "robot" | "human";
  done: boolean;
  success: boolean;
  state: GridNavState | ReachGapState;
}

export interface StatsReply {
  type: "stats";
  success_rate: number;
  intervention_rate: number;
  iteration: number;
  episodes?: number;
}

export interface TrainProgress {
  type: "train_progress";
  epoch: number;
  loss: number;
}

export type ServerMessage =
  | Frame
  | StatsReply
  | TrainProgress
  | { type: "ack"; event: string; [extra: string]: unknown }
  | { type: "notice"; msg: string }
  | { type: "error"; msg: string };

export function isFrame(msg: ServerMessage): msg is Frame {
  return msg.type === "frame";
}
