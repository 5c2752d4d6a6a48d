#!/usr/bin/env python3
"""Drive the live WebSocket service with a scripted client.

The same server that backs the browser UI is exercised here end to end:
start episodes, seize control for a stretch of ticks, trigger a training
round, and read the stats. For the interactive version run

    mile-lab serve --config exp/live_gridnav.toml --port 8700

and open http://127.0.0.1:8700/ after building the frontend.
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from mile_lab.diffnet import init_params, save_params
from mile_lab.envs import GridNavEnv, policy_spec_for
from mile_lab.harness import ExperimentConfig
from mile_lab.live.server import create_app

cfg = ExperimentConfig.from_toml("exp/live_gridnav.toml")
workdir = Path(tempfile.mkdtemp(prefix="mile-live-demo-"))

net_spec = policy_spec_for(GridNavEnv(cfg.env_spec))
save_params(workdir / "policy", net_spec, init_params(net_spec, 0))

app = create_app(
    cfg, checkpoint=str(workdir / "policy"), seed=0, tick_hz=100.0,
    store_dir=workdir / "store",
)
client = TestClient(app)
print("healthz:", client.get("/healthz").json())

with client.websocket_connect("/session") as ws:
    for episode in range(2):
        ws.send_text(json.dumps({"type": "start_episode"}))
        interventions = 0
        while True:
            msg = ws.receive_json()
            if msg["type"] != "frame":
                continue
            if msg["owner"] == "human":
                interventions += 1
            if msg["done"]:
                print(f"episode {episode}: {msg['t']} ticks, "
                      f"{interventions} human-controlled, success={msg['success']}")
                break
            if msg["t"] == 5:
                ws.send_text(json.dumps({"type": "intervene", "on": True}))
                ws.send_text(json.dumps({"type": "action", "key": "down"}))
            elif msg["t"] == 12:
                ws.send_text(json.dumps({"type": "intervene", "on": False}))

    ws.send_text(json.dumps({"type": "train", "iterations": 1}))
    while True:
        msg = ws.receive_json()
        if msg["type"] == "train_progress" and msg["epoch"] % 40 == 0:
            print(f"training... epoch {msg['epoch']} loss {msg['loss']:.3f}")
        if msg.get("event") == "train_done":
            print(f"training done, new checkpoint {msg['checkpoint_hash']}")
            break

    ws.send_text(json.dumps({"type": "stats"}))
    while True:
        msg = ws.receive_json()
        if msg["type"] == "stats":
            print("stats:", {k: v for k, v in msg.items() if k != "type"})
            break

print(f"recorded episodes live in {workdir / 'store'}")
