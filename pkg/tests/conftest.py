"""Shared fixtures and scene-building helpers for the test suite."""

import json
import math
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from scenechain.assets import load_catalog
from scenechain.scene import (
    RoomGeometry,
    Scene,
    SceneObject,
    Vec3,
    yaw_to_quaternion,
)

ISO_YAWS = [k * math.pi / 6 for k in range(-5, 7)]


class StubHandler(BaseHTTPRequestHandler):
    """POST handler replaying scripted (status, payload) responses."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        body = json.loads(self.rfile.read(length).decode() or "{}")
        self.server.requests.append((self.path, body))
        queue = self.server.script[self.path]
        status, payload = queue.pop(0) if len(queue) > 1 else queue[0]
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # keep test output quiet
        pass


class StubServer(ThreadingHTTPServer):
    """In-process HTTP endpoint for exercising the remote clients."""

    def __init__(self):
        super().__init__(("127.0.0.1", 0), StubHandler)
        self.script: dict[str, list[tuple[int, object]]] = {}
        self.requests: list[tuple[str, dict]] = []

    def url(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}"

    def respond(self, path: str, *responses: tuple[int, object]):
        self.script[path] = list(responses)


def make_square_room(side: float = 4.0, room_type: str = "bedroom", room_id: str = "room_0"):
    return RoomGeometry.rectangle(side, side, room_type=room_type, room_id=room_id)


def make_box(
    uid: str,
    description: str = "box",
    center=(0.0, 0.5, 0.0),
    size=(1.0, 1.0, 1.0),
    yaw: float = 0.0,
) -> SceneObject:
    return SceneObject(
        uid=uid,
        description=description,
        position=Vec3(*center),
        rotation=yaw_to_quaternion(yaw),
        size=Vec3(*size),
    )


def make_floor_box(uid: str, description: str, xz, size, yaw: float = 0.0) -> SceneObject:
    """A box resting exactly on the floor, centered at (x, z)."""
    x, z = xz
    _, sy, _ = size
    return make_box(uid, description, center=(x, sy / 2.0, z), size=size, yaw=yaw)


def make_scene(room: RoomGeometry, *objects: SceneObject) -> Scene:
    return Scene(room=room, objects=tuple(objects))


def assert_close(actual: float, expected: float, tol: float = 1e-9, what: str = "value"):
    assert abs(actual - expected) <= tol, f"{what}: {actual!r} != {expected!r} (tol {tol})"


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture
def stub():
    import threading

    server = StubServer()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)


@pytest.fixture
def square_room():
    return make_square_room


@pytest.fixture
def box():
    return make_box


@pytest.fixture
def floor_box():
    return make_floor_box


@pytest.fixture
def scene_with():
    return make_scene
