// Canvas rendering for both environments. The drawing surface is expressed
// as a minimal context interface so tests can drive playback headlessly.

import { Frame, GridNavState, ReachGapState } from "./protocol.js";

export interface Canvas2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
}

export class RenderError extends Error {}

const COLORS = {
  background: "#0f1115",
  wall: "#4a4f5a",
  hazard: "#b33939",
  goal: "#2e9e5b",
  agent: "#4d9de0",
  humanBorder: "#f4a300",
  robotBorder: "#3a3f4a",
  text: "#e8e8e8",
};

export function renderFrame(ctx: Canvas2D, frame: Frame, width: number, height: number): void {
  if (!frame || frame.type !== "frame" || !frame.state || !frame.state.kind) {
    throw new RenderError("malformed frame");
  }
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, width, height);
  if (frame.state.kind === "gridnav") {
    drawGrid(ctx, frame.state, width, height);
  } else {
    drawWorkspace(ctx, frame.state, width, height);
  }
  drawOwnerIndicator(ctx, frame.owner, width, height);
  if (frame.done) {
    drawBanner(ctx, frame.success ? "SUCCESS" : "EPISODE OVER", width, height);
  }
}

function drawGrid(ctx: Canvas2D, state: GridNavState, width: number, height: number): void {
  const cw = width / state.width;
  const ch = height / state.height;
  const cellRect = (cell: [number, number]): [number, number, number, number] => [
    cell[1] * cw + 1,
    cell[0] * ch + 1,
    cw - 2,
    ch - 2,
  ];
  for (const wall of state.walls) {
    ctx.fillStyle = COLORS.wall;
    ctx.fillRect(...cellRect(wall));
  }
  for (const hazard of state.hazards) {
    ctx.fillStyle = COLORS.hazard;
    ctx.fillRect(...cellRect(hazard));
  }
  ctx.fillStyle = COLORS.goal;
  ctx.fillRect(...cellRect(state.goal));
  const [ax, ay, aw, ah] = cellRect(state.cell);
  ctx.fillStyle = COLORS.agent;
  ctx.beginPath();
  ctx.arc(ax + aw / 2, ay + ah / 2, Math.min(aw, ah) / 2.5, 0, 2 * Math.PI);
  ctx.fill();
}

function drawWorkspace(ctx: Canvas2D, state: ReachGapState, width: number, height: number): void {
  // workspace y grows upward; canvas y grows downward
  const toCanvas = (p: [number, number]): [number, number] => [p[0] * width, (1 - p[1]) * height];
  const wallY = (1 - state.wall_y) * height;
  const gapLeft = (state.gap_x - state.gap_half_width) * width;
  const gapRight = (state.gap_x + state.gap_half_width) * width;
  ctx.strokeStyle = COLORS.wall;
  ctx.lineWidth = 4;
  ctx.beginPath();
  ctx.moveTo(0, wallY);
  ctx.lineTo(gapLeft, wallY);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(gapRight, wallY);
  ctx.lineTo(width, wallY);
  ctx.stroke();

  const [gx, gy] = toCanvas(state.goal);
  ctx.strokeStyle = COLORS.goal;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(gx, gy, state.success_radius * width, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.fillStyle = COLORS.goal;
  ctx.beginPath();
  ctx.arc(gx, gy, 3, 0, 2 * Math.PI);
  ctx.fill();

  const [px, py] = toCanvas(state.pos);
  ctx.fillStyle = COLORS.agent;
  ctx.beginPath();
  ctx.arc(px, py, 6, 0, 2 * Math.PI);
  ctx.fill();
}

function drawOwnerIndicator(
  ctx: Canvas2D,
  owner: "robot" | "human",
  width: number,
  height: number,
): void {
  ctx.strokeStyle = owner === "human" ? COLORS.humanBorder : COLORS.robotBorder;
  ctx.lineWidth = owner === "human" ? 6 : 2;
  ctx.strokeRect(0, 0, width, height);
  ctx.fillStyle = owner === "human" ? COLORS.humanBorder : COLORS.text;
  ctx.font = "16px monospace";
  ctx.fillText(owner === "human" ? "HUMAN" : "ROBOT", 10, 22);
}

function drawBanner(ctx: Canvas2D, text: string, width: number, height: number): void {
  ctx.fillStyle = "rgba(0,0,0,0.6)";
  ctx.fillRect(0, height / 2 - 24, width, 48);
  ctx.fillStyle = COLORS.text;
  ctx.font = "24px monospace";
  ctx.fillText(text, width / 2 - text.length * 7, height / 2 + 8);
}
