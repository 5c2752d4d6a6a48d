import { describe, expect, it, vi } from "vitest";

import { Canvas2D, RenderError, renderFrame } from "../src/render.js";
import { Frame, GridNavState, ReachGapState } from "../src/protocol.js";

function recordingContext(): { ctx: Canvas2D; calls: string[] } {
  const calls: string[] = [];
  const record =
    (name: string) =>
    (...args: unknown[]) => {
      calls.push(name);
      void args;
    };
  const ctx: Canvas2D = {
    fillStyle: "",
    strokeStyle: "",
    lineWidth: 1,
    font: "",
    clearRect: record("clearRect"),
    fillRect: record("fillRect"),
    strokeRect: record("strokeRect"),
    beginPath: record("beginPath"),
    arc: record("arc"),
    moveTo: record("moveTo"),
    lineTo: record("lineTo"),
    fill: record("fill"),
    stroke: record("stroke"),
    fillText: record("fillText"),
  };
  return { ctx, calls };
}

const gridState: GridNavState = {
  kind: "gridnav",
  cell: [0, 0],
  goal: [3, 3],
  walls: [[1, 1], [2, 1]],
  hazards: [[2, 2]],
  width: 4,
  height: 4,
};

const reachState: ReachGapState = {
  kind: "reachgap",
  pos: [0.7, 0.3],
  goal: [0.2, 0.9],
  wall_y: 0.5,
  gap_x: 0.7,
  gap_half_width: 0.04,
  success_radius: 0.03,
};

function frame(overrides: Partial<Frame> = {}): Frame {
  return {
    type: "frame",
    t: 0,
    episode: 0,
    owner: "robot",
    done: false,
    success: false,
    state: gridState,
    ...overrides,
  };
}

describe("renderFrame", () => {
  it("draws the grid scene", () => {
    const { ctx, calls } = recordingContext();
    renderFrame(ctx, frame(), 480, 480);
    expect(calls).toContain("clearRect");
    expect(calls.filter((c) => c === "fillRect").length).toBeGreaterThanOrEqual(5);
    expect(calls).toContain("arc"); // the agent
  });

  it("draws the workspace scene with the wall gap", () => {
    const { ctx, calls } = recordingContext();
    renderFrame(ctx, frame({ state: reachState }), 480, 480);
    expect(calls.filter((c) => c === "lineTo").length).toBeGreaterThanOrEqual(2);
    expect(calls.filter((c) => c === "arc").length).toBeGreaterThanOrEqual(3);
  });

  it("marks human ownership prominently", () => {
    const { ctx, calls } = recordingContext();
    const texts: string[] = [];
    ctx.fillText = (text: string) => {
      calls.push("fillText");
      texts.push(text);
    };
    renderFrame(ctx, frame({ owner: "human" }), 480, 480);
    expect(texts).toContain("HUMAN");
  });

  it("shows a success banner on terminal frames", () => {
    const { ctx } = recordingContext();
    const texts: string[] = [];
    ctx.fillText = (text: string) => texts.push(text);
    renderFrame(ctx, frame({ done: true, success: true }), 480, 480);
    expect(texts).toContain("SUCCESS");
  });

  it("raises a render error on malformed frames without crashing the caller", () => {
    const { ctx } = recordingContext();
    expect(() => renderFrame(ctx, {} as Frame, 480, 480)).toThrow(RenderError);
  });

  it("plays back 100 frames at 10 Hz without a dropped render", () => {
    vi.useFakeTimers();
    const { ctx, calls } = recordingContext();
    const frames: Frame[] = Array.from({ length: 100 }, (_, t) =>
      frame({
        t,
        state: { ...gridState, cell: [t % 4, (t * 7) % 4] as [number, number] },
        owner: t % 3 === 0 ? "human" : "robot",
        done: t === 99,
      }),
    );
    let rendered = 0;
    let errors = 0;
    const timer = setInterval(() => {
      try {
        renderFrame(ctx, frames[rendered], 480, 480);
        rendered += 1;
      } catch {
        errors += 1;
      }
    }, 100);
    vi.advanceTimersByTime(100 * 100 + 50);
    clearInterval(timer);
    vi.useRealTimers();
    expect(errors).toBe(0);
    expect(rendered).toBe(100);
    expect(calls.filter((c) => c === "clearRect").length).toBe(100);
  });
});
