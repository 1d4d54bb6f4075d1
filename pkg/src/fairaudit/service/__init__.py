from .app import create_app, serve
from .client import RemoteOracle
