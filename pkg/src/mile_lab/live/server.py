"""WebSocket session server.

One active session per server instance. The episode loop ticks at a fixed
rate on the event loop; client messages are handled between ticks, so all
session mutations are serialized. Training runs in a worker thread with the
session parked in the training phase; progress frames stream back, and the
serving policy is swapped atomically on completion.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from ..datastore import EpisodeStore
from ..diffnet import Policy, load_params
from ..envs import value_iteration
from ..harness.config import ExperimentConfig
from ..harness.runner import build_env, build_pipeline, loss_config
from ..intervention import InterventionParams
from ..learning import TrainState
from ..sim_human import SimulatedHuman
from .session import LiveSession, Phase

FALLBACK_PAGE = """<!doctype html>
<html><head><title>mile-lab live session</title></head>
<body><h1>mile-lab live session</h1>
<p>No UI bundle found. Build the frontend (see frontend/README notes in the
repository README) and pass --ui-dir, or connect a WebSocket client to
<code>/session</code>.</p></body></html>
"""


def _policy_from_checkpoint(path: str) -> Policy:
    spec, params, _ = load_params(Path(path))
    return Policy(spec, params)


def build_session(
    cfg: ExperimentConfig,
    checkpoint: str | None,
    seed: int,
    store_dir: str | Path,
    hold_policy: str = "repeat",
) -> LiveSession:
    env = build_env(cfg)
    if checkpoint is not None:
        policy = _policy_from_checkpoint(checkpoint)
        mental = policy.clone()
        if cfg.human.c is None:
            raise ValueError(
                "serve with --checkpoint needs an explicit human.c in the config "
                "(calibration requires the full pipeline)"
            )
        params = InterventionParams(c=cfg.human.c, sigma=cfg.human.sigma)
    else:
        pipeline = build_pipeline(cfg, seed)
        policy, mental = pipeline.initial_policy, pipeline.mental_model
        params = pipeline.human.params
    human = SimulatedHuman(
        mental_model=mental, params=params,
        q_table=value_iteration(cfg.env_spec) if cfg.env_kind == "gridnav" else None,
        env_spec=cfg.env_spec if cfg.env_kind == "reachgap" else None,
        temperature=cfg.human.temperature,
        expert_noise_std=cfg.human.expert_noise_std,
    )
    lcfg = loss_config(cfg, human)
    state = TrainState.fresh(policy, mental, lcfg.lr)
    return LiveSession(
        env=env, state=state, loss_cfg=lcfg, store=EpisodeStore(store_dir),
        seed=seed, hold_policy=hold_policy,
    )


def create_app(
    cfg: ExperimentConfig,
    checkpoint: str | None = None,
    seed: int = 0,
    tick_hz: float = 10.0,
    ui_dir: str | None = None,
    store_dir: str | Path = "live-runs/session",
    hold_policy: str = "repeat",
) -> FastAPI:
    app = FastAPI()
    session = build_session(cfg, checkpoint, seed, store_dir, hold_policy)
    app.state.session = session
    app.state.tick_interval = 1.0 / tick_hz
    app.state.client_connected = False

    @app.get("/healthz")
    def healthz():
        return JSONResponse({"status": "ok", "phase": session.phase.value})

    ui_path = Path(ui_dir) if ui_dir else None
    if ui_path and ui_path.is_dir():
        index = ui_path / "index.html"

        @app.get("/", response_class=HTMLResponse)
        def root():
            return HTMLResponse(index.read_text())

        app.mount("/static", StaticFiles(directory=str(ui_path)), name="static")
    else:

        @app.get("/", response_class=HTMLResponse)
        def root():
            return HTMLResponse(FALLBACK_PAGE)

    @app.websocket("/session")
    async def session_socket(ws: WebSocket):
        await ws.accept()
        if app.state.client_connected:
            await ws.send_json({"type": "error", "msg": "a session client is already connected"})
            await ws.close()
            return
        app.state.client_connected = True
        send_lock = asyncio.Lock()

        async def send(payload: dict):
            async with send_lock:
                await ws.send_json(payload)

        async def ticker():
            try:
                while session.phase is Phase.RUNNING:
                    frame = session.tick()
                    await send(frame)
                    await asyncio.sleep(app.state.tick_interval)
            except WebSocketDisconnect:
                pass

        tick_task: asyncio.Task | None = None
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await send({"type": "error", "msg": "malformed JSON"})
                    continue
                reply = session.handle_message(msg if isinstance(msg, dict) else {})
                await send(reply)
                if reply.get("type") == "ack" and reply.get("event") == "episode_started":
                    await send(session.frame())
                    if tick_task is None or tick_task.done():
                        tick_task = asyncio.create_task(ticker())
                elif reply.get("type") == "ack" and reply.get("event") == "train":
                    iterations = reply["iterations"]
                    loop = asyncio.get_running_loop()
                    progress: asyncio.Queue = asyncio.Queue()

                    def on_epoch(epoch: int, loss: float):
                        loop.call_soon_threadsafe(
                            progress.put_nowait,
                            {"type": "train_progress", "epoch": epoch, "loss": loss},
                        )

                    train_job = loop.run_in_executor(
                        None, lambda: session.train_round(iterations, on_epoch=on_epoch)
                    )
                    while True:
                        drain = asyncio.create_task(progress.get())
                        done, _ = await asyncio.wait(
                            {drain, train_job}, return_when=asyncio.FIRST_COMPLETED
                        )
                        if drain in done:
                            await send(drain.result())
                            continue
                        drain.cancel()
                        while not progress.empty():
                            await send(progress.get_nowait())
                        break
                    try:
                        await send(train_job.result())
                    except Exception as exc:  # old checkpoint retained on failure
                        await send({"type": "error", "msg": f"training failed: {exc}"})
        except WebSocketDisconnect:
            pass
        finally:
            app.state.client_connected = False
            if tick_task is not None:
                tick_task.cancel()

    return app


def serve_forever(
    cfg: ExperimentConfig,
    checkpoint: str | None,
    host: str,
    port: int,
    tick_hz: float,
    ui_dir: str | None,
    seed: int,
) -> None:
    import uvicorn

    default_ui = Path(__file__).resolve().parents[3] / "frontend" / "dist"
    if ui_dir is None and default_ui.is_dir():
        ui_dir = str(default_ui)
    app = create_app(cfg, checkpoint=checkpoint, seed=seed, tick_hz=tick_hz, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
