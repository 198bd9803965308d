import base64
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sketchflow.cli import main as cli_main
from sketchflow.service import create_app

from conftest import DEMO


def b64(path):
    return base64.b64encode(path.read_bytes()).decode()


def request(ws, op, session=None, body=None):
    """Send a request and return its response, letting events stream past."""
    ws.send_json({"kind": "request", "op": op, "session": session,
                  "revision": None, "body": body or {}})
    while True:
        msg = ws.receive_json()
        if msg["kind"] == "response":
            return msg


def make_session(ws):
    resp = request(ws, "create_session",
                   body={"image": b64(DEMO / "image.png"),
                         "masks": [b64(DEMO / "mask.png")]})
    assert resp["kind"] == "response" and "error" not in resp["body"], resp
    return resp["body"]["session"]


def demo_patch():
    return {
        "bodies": [{"density": 0.02,
                    "material": {"young": 150.0, "poisson": 0.3},
                    "mesh": {"spacing": 8, "max_area": 60, "min_angle": 20}}],
        "strokes": [{"kind": "wind", "path": [[2.0, 28.0], [62.0, 28.0]],
                     "strength": 30.0, "radius": 26.0, "particle_speed": 150.0,
                     "emit_rate": 45.0, "active": [0.0, 0.4]}],
        "rigs": [{"kind": "fixed", "anchor": [32.0, 56.0]},
                 {"kind": "fixed", "anchor": [32.0, 52.0]}],
        "sim": {"dt": 0.001, "fps": 24, "frame_count": 8, "damping": 1.0},
    }


@pytest.fixture
def client():
    with TestClient(create_app()) as c:
        yield c


class TestCreateSession:
    def test_create_returns_mesh(self, client):
        with client.websocket_connect("/ws") as ws:
            resp = request(ws, "create_session",
                           body={"image": b64(DEMO / "image.png"),
                                 "masks": [b64(DEMO / "mask.png")]})
            assert resp["revision"] == 0
            meshes = resp["body"]["meshes"]
            assert len(meshes) == 1
            assert len(meshes[0]["vertices"]) >= 3
            assert len(meshes[0]["triangles"]) >= 1

    def test_dimension_mismatch(self, client, tmp_path):
        from PIL import Image

        small = tmp_path / "small.png"
        Image.new("L", (10, 10), 255).save(small)
        with client.websocket_connect("/ws") as ws:
            resp = request(ws, "create_session",
                           body={"image": b64(DEMO / "image.png"),
                                 "masks": [b64(small)]})
            assert resp["body"]["error"]["type"] == "DimensionMismatch"

    def test_two_masks_two_meshes(self, client):
        with client.websocket_connect("/ws") as ws:
            resp = request(ws, "create_session",
                           body={"image": b64(DEMO / "image.png"),
                                 "masks": [b64(DEMO / "mask.png"),
                                           b64(DEMO / "mask.png")]})
            assert len(resp["body"]["meshes"]) == 2

    def test_garbage_image(self, client):
        with client.websocket_connect("/ws") as ws:
            resp = request(ws, "create_session",
                           body={"image": base64.b64encode(b"nope").decode(),
                                 "masks": []})
            assert resp["body"]["error"]["type"] == "BadImage"


class TestMutate:
    def test_mutation_bumps_revision(self, client):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            resp = request(ws, "mutate", sid,
                           {"revision": 0, "patch": {"strokes": demo_patch()["strokes"]}})
            assert resp["body"] == {"revision": 1}
            assert resp["revision"] == 1

    def test_invalid_patch_leaves_revision(self, client):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            bad = {"strokes": [{"kind": "wind", "path": [[0, 0], [1, 0]],
                                "strength": 1.0, "radius": -1}]}
            resp = request(ws, "mutate", sid, {"revision": 0, "patch": bad})
            assert resp["body"]["error"]["type"] == "ValidationError"
            assert resp["body"]["error"]["path"] == "strokes[0].radius"
            assert resp["revision"] == 0
            resp = request(ws, "get_scene", sid)
            assert resp["body"]["scene"]["strokes"] == []

    def test_stale_revision_rejected(self, client):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            ok = request(ws, "mutate", sid,
                         {"revision": 0, "patch": {"sim": {"frame_count": 4}}})
            assert ok["revision"] == 1
            stale = request(ws, "mutate", sid,
                            {"revision": 0, "patch": {"sim": {"frame_count": 9}}})
            assert stale["body"]["error"]["type"] == "StaleRevision"
            resp = request(ws, "get_scene", sid)
            assert resp["body"]["scene"]["sim"]["frame_count"] == 4

    def test_mesh_params_trigger_mesh_event(self, client):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            resp = request(ws, "mutate", sid,
                           {"revision": 0,
                            "patch": {"bodies": [{"mesh": {"spacing": 6.0}}]}})
            assert "error" not in resp["body"]
            event = ws.receive_json()
            assert event["kind"] == "event" and event["op"] == "meshes"
            assert len(event["body"]["meshes"]) == 1

    def test_fuzzed_invalid_patches_all_surface(self, client):
        rng = np.random.default_rng(99)
        invalid = [
            {"strokes": [{"kind": "wind", "path": [[0, 0]], "strength": 1.0}]},
            {"strokes": [{"kind": "gust", "path": [[0, 0], [1, 1]], "strength": 1.0}]},
            {"strokes": [{"kind": "wind", "path": [[0, 0], [1, 1]], "strength": -2.0}]},
            {"strokes": [{"kind": "wind", "path": [[0, 0], [1, 1]], "strength": 1.0,
                          "radius": 0}]},
            {"strokes": [{"kind": "wind", "path": [[0, 0], [1, 1]], "strength": 1.0,
                          "active": [2.0, 1.0]}]},
            {"strokes": [{"kind": "repel", "path": [], "strength": 1.0}]},
            {"rigs": [{"kind": "fixed", "anchor": [1.0, 1.0]}]},
            {"rigs": [{"kind": "pin", "anchor": [32.0, 40.0]}]},
            {"rigs": [{"kind": "wavy", "anchor": [32.0, 40.0], "frequency": 0}]},
            {"rigs": [{"kind": "wavy", "anchor": [32.0, 40.0], "direction": [0, 0]}]},
            {"rigs": [{"kind": "trajectory", "anchor": [32.0, 40.0],
                       "keyframes": [[1.0, [0, 0]], [0.5, [1, 1]]]}]},
            {"rigs": [{"kind": "fixed", "anchor": [32.0, 40.0], "body": 5}]},
            {"sim": {"dt": -0.001}},
            {"sim": {"fps": 0}},
            {"sim": {"frame_count": 0}},
            {"sim": {"damping": -1}},
            {"sim": {"warp_factor": 9}},
            {"output": {"alpha": -3}},
            {"output": {"background": 2.0}},
            {"bodies": [{"density": 0}]},
        ]
        assert len(invalid) >= 20
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            for patch in invalid:
                resp = request(ws, "mutate", sid, {"revision": 0, "patch": patch})
                assert "error" in resp["body"], patch
                assert resp["body"]["error"]["type"] == "ValidationError", patch
                assert resp["body"]["error"]["message"], patch
                assert resp["revision"] == 0


class TestSimulate:
    def test_frame_events_then_done(self, client):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            request(ws, "mutate", sid, {"revision": 0, "patch": demo_patch()})
            resp = request(ws, "simulate", sid, {"frames": 2})
            assert resp["body"]["started"] is True
            events = [ws.receive_json() for _ in range(3)]
            assert [e["op"] for e in events] == ["frame", "frame", "done"]
            assert events[0]["body"]["frame"] == 1
            assert len(events[0]["body"]["positions"]) == 1
            assert events[-1]["body"]["frames"] == 2
            for e in events:
                assert e["revision"] == 1

    def test_mutate_mid_run_cancels(self, client):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            request(ws, "mutate", sid, {"revision": 0, "patch": demo_patch()})
            request(ws, "simulate", sid, {"frames": 400})
            first = ws.receive_json()
            assert first["op"] == "frame"
            resp = request(ws, "mutate", sid,
                           {"revision": 1, "patch": {"sim": {"damping": 0.7}}})
            assert "error" not in resp["body"]
            seen = []
            while True:
                msg = ws.receive_json()
                if msg["kind"] != "event":
                    continue
                seen.append(msg["op"])
                if msg["op"] in ("cancelled", "done", "failed"):
                    break
            assert seen[-1] == "cancelled"
            # no frame event of the cancelled run arrives after the terminal one
            resp = request(ws, "get_scene", sid)
            assert resp["kind"] == "response"

    def test_unstable_run_fails_with_frame(self, client):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            patch = demo_patch()
            patch["bodies"][0]["material"] = {"young": 1e15, "poisson": 0.3}
            patch["bodies"][0]["density"] = 1e-9
            request(ws, "mutate", sid, {"revision": 0, "patch": patch})
            request(ws, "simulate", sid, {"frames": 5})
            while True:
                msg = ws.receive_json()
                if msg["op"] in ("done", "failed", "cancelled"):
                    break
            assert msg["op"] == "failed"
            assert msg["body"]["frame"] is not None
            assert msg["body"]["substep"] is not None


class TestExport:
    def drain_until(self, ws, ops):
        while True:
            msg = ws.receive_json()
            if msg["kind"] == "event" and msg["op"] in ops:
                return msg

    def test_export_without_simulation_is_stale(self, client, tmp_path):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            resp = request(ws, "export", sid, {"dir": str(tmp_path / "exp")})
            assert resp["body"]["error"]["type"] == "StaleSimulation"

    def test_export_matches_headless_run(self, client, tmp_path):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            request(ws, "mutate", sid, {"revision": 0, "patch": demo_patch()})
            request(ws, "simulate", sid, {"frames": 8})
            self.drain_until(ws, ("done",))
            exp = tmp_path / "exp"
            resp = request(ws, "export", sid, {"dir": str(exp)})
            assert "error" not in resp["body"], resp
            assert (exp / "scene.json").exists()
        headless = tmp_path / "headless"
        code = cli_main(["run", "--scene", str(exp / "scene.json"),
                         "--out", str(headless)])
        assert code == 0
        compared = 0
        for p in sorted(headless.iterdir()):
            if p.name == "report.json":  # wall-clock timings differ
                continue
            assert (exp / p.name).exists(), p.name
            assert p.read_bytes() == (exp / p.name).read_bytes(), p.name
            compared += 1
        assert compared >= 17  # 8 flo + 8 frames + sketch + csv + figure

    def test_export_twice_identical(self, client, tmp_path):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            request(ws, "mutate", sid, {"revision": 0, "patch": demo_patch()})
            request(ws, "simulate", sid, {"frames": 2})
            self.drain_until(ws, ("done",))
            a = tmp_path / "a"
            b = tmp_path / "b"
            assert "error" not in request(ws, "export", sid, {"dir": str(a)})["body"]
            assert "error" not in request(ws, "export", sid, {"dir": str(b)})["body"]
        for p in sorted(a.iterdir()):
            if p.name == "report.json":
                continue
            assert p.read_bytes() == (b / p.name).read_bytes(), p.name

    def test_stale_after_mutation(self, client, tmp_path):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            request(ws, "mutate", sid, {"revision": 0, "patch": demo_patch()})
            request(ws, "simulate", sid, {"frames": 2})
            self.drain_until(ws, ("done",))
            request(ws, "mutate", sid,
                    {"revision": 1, "patch": {"sim": {"damping": 0.9}}})
            resp = request(ws, "export", sid, {"dir": str(tmp_path / "x")})
            assert resp["body"]["error"]["type"] == "StaleSimulation"


class TestProtocol:
    def test_unknown_op(self, client):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            resp = request(ws, "frobnicate", sid)
            assert resp["body"]["error"]["type"] == "ValidationError"

    def test_unknown_session(self, client):
        with client.websocket_connect("/ws") as ws:
            resp = request(ws, "get_scene", "s9999")
            assert resp["body"]["error"]["type"] == "ValidationError"

    def test_round_trip_scene_doc(self, client):
        with client.websocket_connect("/ws") as ws:
            sid = make_session(ws)
            patch = demo_patch()
            request(ws, "mutate", sid, {"revision": 0, "patch": patch})
            doc = request(ws, "get_scene", sid)["body"]["scene"]
            assert doc["strokes"] == patch["strokes"]
            assert doc["rigs"] == patch["rigs"]
