"""HTTP service: routes, error contract, determinism, static UI."""

import http.client
import json
import threading

import numpy as np
import pytest

from crossview.datapipe import load_records
from crossview.service import ServiceState, build_server


def _serve(state):
    server = build_server(state, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, server.server_address[1]


@pytest.fixture(scope="module")
def ui_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("site")
    (root / "ui").mkdir()
    (root / "ui" / "index.html").write_text("<!doctype html><title>boxes</title>")
    (root / "ui" / "app.js").write_text("console.log('ready');")
    (root / "secret.txt").write_text("out of bounds")
    return root / "ui"


@pytest.fixture(scope="module")
def full_server(small_dataset, tiny_checkpoint, ui_dir):
    state = ServiceState(small_dataset, checkpoint=tiny_checkpoint, ui_dir=str(ui_dir))
    server, port = _serve(state)
    yield port
    server.shutdown()


@pytest.fixture(scope="module")
def bare_server(small_dataset):
    state = ServiceState(small_dataset)
    server, port = _serve(state)
    yield port
    server.shutdown()


def request(port, method, path, payload=None):
    conn = http.client.HTTPConnection("127.0.0.1", port, timeout=30)
    body = None if payload is None else json.dumps(payload).encode()
    headers = {"Content-Type": "application/json"} if body else {}
    conn.putrequest(method, path, skip_host=False, skip_accept_encoding=False)
    for k, v in headers.items():
        conn.putheader(k, v)
    if body is not None:
        conn.putheader("Content-Length", str(len(body)))
    conn.endheaders(body)
    resp = conn.getresponse()
    raw = resp.read()
    conn.close()
    return resp.status, dict(resp.getheaders()), raw


def get_json(port, path):
    status, headers, raw = request(port, "GET", path)
    return status, headers, json.loads(raw)


def post_json(port, payload):
    status, headers, raw = request(port, "POST", "/transform", payload)
    return status, json.loads(raw), raw


def _eval_ids(dataset_dir):
    return [r.id for r in load_records(dataset_dir, "eval")]


def test_health_and_cors(bare_server):
    status, headers, body = get_json(bare_server, "/health")
    assert status == 200
    assert body == {"status": "ok"}
    assert headers["Access-Control-Allow-Origin"] == "*"


def test_preflight(bare_server):
    status, headers, raw = request(bare_server, "OPTIONS", "/transform")
    assert status == 204
    assert raw == b""
    assert "POST" in headers["Access-Control-Allow-Methods"]


def test_scene_listing_covers_eval_split(bare_server, small_dataset):
    status, _, body = get_json(bare_server, "/scenes")
    assert status == 200
    assert body["count"] == len(_eval_ids(small_dataset))
    ids = [s["id"] for s in body["scenes"]]
    assert ids == _eval_ids(small_dataset)
    first = body["scenes"][0]
    assert set(first) == {"id", "frames", "path_kind", "context0"}


def test_scene_detail_with_and_without_tracks(bare_server, small_dataset):
    rec = load_records(small_dataset, "eval")[0]
    status, _, body = get_json(bare_server, f"/scenes/{rec.id}")
    assert status == 200
    assert "tracks_dct" not in body
    assert "depth0" in body
    assert np.asarray(body["b_ref"]).shape == (rec.frames, 4)

    status, _, full = get_json(bare_server, f"/scenes/{rec.id}?tracks=1")
    assert status == 200
    assert np.asarray(full["tracks_dct"]).shape == rec.dct_tracks.shape


def test_unknown_scene_and_path(bare_server):
    status, _, body = get_json(bare_server, "/scenes/s99999p99")
    assert status == 404 and body["reason"] == "unknown_record"
    status, _, body = get_json(bare_server, "/nope")
    assert status == 404 and body["reason"] == "unknown_path"
    status, headers, raw = request(bare_server, "POST", "/nope", {"a": 1})
    assert status == 404 and json.loads(raw)["reason"] == "unknown_path"


def test_transform_interpolation_round_trip(bare_server, small_dataset):
    rec = load_records(small_dataset, "eval")[0]
    status, body, _ = post_json(
        bare_server, {"method": "interpolation", "record_id": rec.id}
    )
    assert status == 200
    assert body["record_id"] == rec.id
    assert body["method"] == "interpolation"
    assert body["frames"] == rec.frames
    assert np.allclose(body["b_tgt"], rec.b_ref, atol=1e-12)
    assert len(body["per_frame_iou"]) == rec.frames
    assert 0.0 <= body["mean_iou"] <= 1.0


def test_transform_with_designed_keyframes(bare_server, small_dataset):
    rec = load_records(small_dataset, "eval")[0]
    keys = [
        {"frame": 0, "box": [0.4, 0.5, 0.2, 0.2]},
        {"frame": rec.frames - 1, "box": [0.6, 0.5, 0.2, 0.2]},
    ]
    status, body, _ = post_json(
        bare_server,
        {"method": "warp_corners", "record_id": rec.id, "keyframes": keys},
    )
    assert status == 200
    b_ref = np.asarray(body["b_ref"])
    assert np.allclose(b_ref[0], keys[0]["box"], atol=1e-12)
    assert np.allclose(b_ref[-1], keys[1]["box"], atol=1e-12)


def test_keyframe_validation_reasons(bare_server, small_dataset):
    rec_id = _eval_ids(small_dataset)[0]

    def reason_for(keys):
        status, body, _ = post_json(
            bare_server,
            {"method": "interpolation", "record_id": rec_id, "keyframes": keys},
        )
        assert status == 400
        return body["reason"]

    box = [0.5, 0.5, 0.2, 0.2]
    assert reason_for([]) == "keyframes_empty"
    assert reason_for([{"box": box}]) == "invalid_keyframe"
    assert reason_for([{"frame": 0, "box": [0.5]}]) == "invalid_box"
    assert reason_for([{"frame": 2, "box": box}]) == "keyframes_must_start_at_zero"
    assert (
        reason_for([{"frame": 0, "box": box}, {"frame": 9999, "box": box}])
        == "keyframe_out_of_range"
    )
    assert (
        reason_for(
            [
                {"frame": 0, "box": box},
                {"frame": 5, "box": box},
                {"frame": 3, "box": box},
            ]
        )
        == "keyframes_unsorted"
    )


def test_request_validation_reasons(bare_server, small_dataset):
    rec_id = _eval_ids(small_dataset)[0]
    status, body, _ = post_json(bare_server, {"method": "levitation", "record_id": rec_id})
    assert (status, body["reason"]) == (400, "unknown_method")
    status, body, _ = post_json(
        bare_server, {"method": "interpolation", "record_id": rec_id, "direction": "x"}
    )
    assert (status, body["reason"]) == (400, "unknown_direction")
    status, body, _ = post_json(bare_server, {"method": "interpolation", "record_id": "zz"})
    assert (status, body["reason"]) == (404, "unknown_record")
    status, body, _ = post_json(bare_server, {"method": "interpolation"})
    assert (status, body["reason"]) == (400, "missing_record")
    status, body, _ = post_json(
        bare_server,
        {"method": "warp_corners", "record_id": rec_id, "direction": "v2f"},
    )
    assert (status, body["reason"]) == (400, "warp_direction_unsupported")
    status, body, _ = post_json(
        bare_server,
        {
            "method": "warp_corners",
            "inline": {"frames": 8},
            "keyframes": [{"frame": 0, "box": [0.5, 0.5, 0.2, 0.2]}],
        },
    )
    assert (status, body["reason"]) == (400, "warp_requires_record")
    status, body, _ = post_json(
        bare_server,
        {
            "method": "model",
            "record_id": rec_id,
            "sampler": {"num_steps": 0},
        },
    )
    assert (status, body["reason"]) == (400, "invalid_sampler")


def test_malformed_body_is_invalid_json(bare_server):
    status, _, raw = request(bare_server, "POST", "/transform")
    assert status == 400 and json.loads(raw)["reason"] == "invalid_json"
    conn = http.client.HTTPConnection("127.0.0.1", bare_server, timeout=30)
    conn.request("POST", "/transform", body=b"{nope", headers={"Content-Type": "application/json"})
    resp = conn.getresponse()
    body = json.loads(resp.read())
    conn.close()
    assert resp.status == 400 and body["reason"] == "invalid_json"


def test_model_without_checkpoint_is_conflict(bare_server, small_dataset):
    rec_id = _eval_ids(small_dataset)[0]
    status, body, _ = post_json(bare_server, {"method": "model", "record_id": rec_id})
    assert (status, body["reason"]) == (409, "model_not_loaded")


def test_model_transform_and_direction_mismatch(full_server, small_dataset):
    rec_id = _eval_ids(small_dataset)[0]
    payload = {
        "method": "model",
        "record_id": rec_id,
        "sampler": {"num_steps": 4, "seed": 7},
    }
    status, body, raw_a = post_json(full_server, payload)
    assert status == 200, body
    assert body["method"] == "model"
    assert body["checkpoint"]
    assert body["sampler"] == {"num_steps": 4, "seed": 7}
    assert len(body["per_frame_iou"]) == body["frames"]
    _, _, raw_b = post_json(full_server, payload)
    assert raw_a == raw_b

    status, body, _ = post_json(full_server, {**payload, "direction": "v2f"})
    assert (status, body["reason"]) == (400, "direction_mismatch")


def test_identical_requests_have_identical_bodies(bare_server, small_dataset):
    rec_id = _eval_ids(small_dataset)[0]
    payload = {"method": "warp_corners", "record_id": rec_id}
    _, _, raw_a = post_json(bare_server, payload)
    _, _, raw_b = post_json(bare_server, payload)
    assert raw_a == raw_b


def test_concurrent_requests_agree(bare_server, small_dataset):
    rec_id = _eval_ids(small_dataset)[0]
    payload = {"method": "interpolation", "record_id": rec_id}
    results = [None] * 4

    def hit(i):
        results[i] = post_json(bare_server, payload)

    threads = [threading.Thread(target=hit, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(r[0] == 200 for r in results)
    assert len({r[2] for r in results}) == 1


def test_static_ui_serving(full_server):
    status, headers, raw = request(full_server, "GET", "/")
    assert status == 200
    assert "text/html" in headers["Content-Type"]
    assert b"boxes" in raw
    status, headers, raw = request(full_server, "GET", "/app.js")
    assert status == 200
    assert "javascript" in headers["Content-Type"]


def test_static_ui_blocks_path_escape(full_server):
    status, _, raw = request(full_server, "GET", "/../secret.txt")
    assert status == 404
    assert b"out of bounds" not in raw
    status, _, raw = request(full_server, "GET", "/%2e%2e/secret.txt")
    assert status == 404 or b"out of bounds" not in raw
