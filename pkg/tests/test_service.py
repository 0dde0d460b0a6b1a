"""Session API contracts, exercised through the ASGI test client."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from naestudio.audio import save_wav
from naestudio.cli import main
from naestudio.deconstruct import load_view
from naestudio.service import create_app


@pytest.fixture(scope="module")
def bundle_dir(tmp_path_factory):
    rng = np.random.default_rng(1)
    sr = 8000
    t = np.arange(sr) / sr
    x = 0.4 * np.sin(2 * np.pi * 750.0 * t) * (t < 0.6)
    x += 0.3 * rng.standard_normal(sr) * (t > 0.5)
    x += 0.02 * np.sin(2 * np.pi * 2000.0 * t)
    wav = tmp_path_factory.mktemp("svc") / "in.wav"
    save_wav(wav, x, sr)
    out = tmp_path_factory.mktemp("svc") / "bundle"
    assert main(["decompose", str(wav), "--layers", "2,4", "--iters", "120",
                 "--window", "256", "--hop", "64", "--seed", "1", "-o", str(out)]) == 0
    return out


@pytest.fixture()
def client(bundle_dir):
    return TestClient(create_app(bundle_dir))


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_fresh_view_matches_on_disk_export(client, bundle_dir):
    served = client.get("/view").json()
    on_disk = load_view(bundle_dir / "components.json")
    assert served["provenance"]["model_hash"] == on_disk["provenance"]["model_hash"]
    assert served["layers"] == on_disk["layers"]


def test_view_with_hierarchical_selection(client):
    doc = client.get("/view", params={"inner_unit": 0}).json()
    assert doc["selected_inner_unit"] == 0
    assert any(doc["layers"][-1]["silent"]) or True  # flags present per unit
    assert len(doc["layers"][-1]["silent"]) == doc["layers"][-1]["num_units"]
    assert client.get("/view", params={"inner_unit": 99}).status_code == 422


def test_post_set_weight_reflected_in_view_and_script(client):
    base_hash = client.get("/health").json()["model_hash"]
    op = {"kind": "set_weight", "layer": 2, "row": 3, "col": 1, "value": 0.25}
    resp = client.post("/ops", json=op)
    assert resp.status_code == 200
    body = resp.json()
    assert body["model_hash"] != base_hash
    changed = {layer["layer_index"] for layer in body["changed_layers"]}
    assert changed == {2}

    view = client.get("/view").json()
    assert view["layers"][1]["weights_to_next"][3][1] == 0.25
    assert view["provenance"]["model_hash"] == body["model_hash"]

    script = client.get("/script").json()
    assert len(script["ops"]) == 1
    assert script["ops"][0] == {"kind": "set_weight", "layer": 2, "row": 3, "col": 1,
                                "value": 0.25}


def test_zero_delta_jitter_keeps_hash(client):
    base_hash = client.get("/health").json()["model_hash"]
    resp = client.post("/ops", json={"kind": "randomize_multiplicative", "layer": 1,
                                     "delta": 0.0, "seed": 3})
    assert resp.status_code == 200
    assert resp.json()["model_hash"] == base_hash


def test_invalid_ops_are_422(client):
    assert client.post("/ops", json={"kind": "set_weight", "layer": 2, "row": 0,
                                     "col": 0, "value": -1.0}).status_code == 422
    assert client.post("/ops", json={"kind": "permute_columns", "layer": 1}).status_code == 422
    assert client.post("/ops", json={"kind": "set_weight", "layer": 2,
                                     "row": "x"}).status_code == 422


def test_undo_restores_previous_hash(client):
    h0 = client.get("/health").json()["model_hash"]
    r1 = client.post("/ops", json={"kind": "set_weight", "layer": 2, "row": 0, "col": 0,
                                   "value": 0.9})
    h1 = r1.json()["model_hash"]
    r2 = client.post("/ops", json={"kind": "scale_column", "layer": 2, "columns": [1],
                                   "factor": 0.5})
    assert r2.json()["model_hash"] != h1
    undo = client.delete("/ops/last")
    assert undo.status_code == 200
    assert undo.json()["model_hash"] == h1
    undo = client.delete("/ops/last")
    assert undo.json()["model_hash"] == h0
    assert client.delete("/ops/last").status_code == 409


def test_script_replay_matches_served_hash(client, bundle_dir):
    from naestudio.bundle import load_bundle
    from naestudio.manipulate import ManipulationScript, apply_script
    from naestudio.model import model_hash

    client.post("/ops", json={"kind": "permute_columns", "layer": 1, "seed": 11})
    client.post("/ops", json={"kind": "set_weight", "layer": 1, "row": 0, "col": 0,
                              "value": 0.123})
    served_hash = client.get("/health").json()["model_hash"]
    script = ManipulationScript.from_json(json.dumps(client.get("/script").json()))
    replayed = apply_script(load_bundle(bundle_dir).model, script)
    assert model_hash(replayed) == served_hash


class TestRenderEndpoint:
    def test_identical_requests_hit_cache_with_identical_bytes(self, client):
        body = {"mode": "original", "basis_unit": 0, "activation_unit": 0}
        first = client.post("/render", json=body)
        assert first.status_code == 200
        assert first.headers["content-type"].startswith("audio/wav")
        assert first.headers["X-Cache"] == "miss"
        second = client.post("/render", json=body)
        assert second.headers["X-Cache"] == "hit"
        assert second.content == first.content

    def test_conservativity_over_the_api(self, client, bundle_dir):
        import io
        import struct

        def decode(body: bytes) -> np.ndarray:
            assert body[:4] == b"RIFF"
            size = struct.unpack_from("<I", body, 40)[0]
            return np.frombuffer(body, dtype="<f4", count=size // 4, offset=44)

        total = None
        for k in range(4):
            body = {"mode": "original", "basis_unit": k, "activation_unit": k}
            samples = decode(client.post("/render", json=body).content)
            total = samples.astype(np.float64) if total is None else total + samples

        from naestudio.bundle import load_bundle
        from naestudio.resynth import render

        bundle = load_bundle(bundle_dir)
        spec = bundle.spectrogram()
        identity = render(spec, np.ones_like(spec.magnitudes)).audio.astype(np.float32)
        rel = np.linalg.norm(total - identity) / np.linalg.norm(identity)
        assert rel < 1e-6

    def test_render_recomputed_after_edit(self, client):
        body = {"mode": "original", "basis_unit": 1, "activation_unit": 1}
        before = client.post("/render", json=body)
        client.post("/ops", json={"kind": "scale_column", "layer": 2, "columns": [1],
                                  "factor": 0.25})
        after = client.post("/render", json=body)
        assert after.headers["X-Cache"] == "miss"
        assert after.content != before.content
        assert after.headers["X-Model-Hash"] != before.headers["X-Model-Hash"]

    def test_invalid_spec_is_422(self, client):
        assert client.post("/render", json={"mode": "original", "basis_unit": 0,
                                            "activation_unit": 1}).status_code == 422
        assert client.post("/render", json={"mode": "cross_component", "basis_unit": 9,
                                            "activation_unit": 0}).status_code == 422

    def test_concurrent_distinct_renders(self, client):
        from concurrent.futures import ThreadPoolExecutor

        def fetch(k):
            return client.post("/render", json={"mode": "original", "basis_unit": k,
                                                "activation_unit": k}).content

        with ThreadPoolExecutor(4) as pool:
            results = list(pool.map(fetch, [0, 1, 2, 3]))
        again = [fetch(k) for k in range(4)]
        for a, b in zip(results, again):
            assert a == b
