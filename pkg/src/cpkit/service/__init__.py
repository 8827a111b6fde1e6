"""HTTP annotation backend: task routing, judgments, five-step sessions,
dataset export. State is a fold over an append-only event log."""

from .app import create_app
from .config import ServiceConfig
from .store import ServiceState

__all__ = ["create_app", "ServiceConfig", "ServiceState"]
