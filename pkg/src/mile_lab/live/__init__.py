from .session import LiveSession, Phase, SessionError, params_hash, replay_live_training
from .server import create_app, build_session

__all__ = [
    "LiveSession",
    "Phase",
    "SessionError",
    "params_hash",
    "replay_live_training",
    "create_app",
    "build_session",
]
