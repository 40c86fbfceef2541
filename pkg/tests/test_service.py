import io
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import httpx
import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from linerec import model as M
from linerec import synth
from linerec.dataset import CharDict
from linerec.errors import DictMismatchError
from linerec.service import ServiceConfig, create_app, self_test


def _png_bytes(arr):
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture(scope="module")
def cdict():
    return CharDict.from_chars(synth.alphabet_chars(6))


@pytest.fixture(scope="module")
def service_dir(tmp_path_factory, cdict):
    root = tmp_path_factory.mktemp("service")
    cdict.to_file(root / "dict.txt")
    M.save_checkpoint(root / "baseline.ocrm", M.init_params(6, seed=1), cdict)
    M.save_checkpoint(root / "finetuned.ocrm", M.init_params(6, seed=2), cdict)
    return root


@pytest.fixture(scope="module")
def config(service_dir):
    return ServiceConfig(
        baseline_checkpoint=service_dir / "baseline.ocrm",
        finetuned_checkpoint=service_dir / "finetuned.ocrm",
        dict_path=service_dir / "dict.txt",
        max_upload_bytes=512 * 1024,
    )


@pytest.fixture(scope="module")
def client(config):
    with TestClient(create_app(config), raise_server_exceptions=False) as client:
        yield client


@pytest.fixture(scope="module")
def line_png(cdict):
    sample = synth.render_line(
        "".join(cdict.chars[:3]), cdict, synth.CLEAN_META, seed=12
    )
    return _png_bytes(sample.pixels)


def test_recognize_both(client, line_png):
    r = client.post(
        "/api/recognize?model=both", files={"file": ("line.png", line_png, "image/png")}
    )
    assert r.status_code == 200
    body = r.json()
    assert set(body) == {"input_digest", "results"}
    assert set(body["results"]) == {"baseline", "finetuned"}
    for result in body["results"].values():
        assert set(result) == {"text", "confidence", "per_char", "aspect_broken",
                               "elapsed_ms"}
        assert 0.0 <= result["confidence"] <= 1.0
        assert len(result["per_char"]) == len(result["text"])


def test_recognize_single_model(client, line_png):
    r = client.post(
        "/api/recognize?model=baseline",
        files={"file": ("line.png", line_png, "image/png")},
    )
    assert r.status_code == 200
    assert set(r.json()["results"]) == {"baseline"}


def test_recognize_unknown_model_is_422(client, line_png):
    r = client.post(
        "/api/recognize?model=banana",
        files={"file": ("line.png", line_png, "image/png")},
    )
    assert r.status_code == 422


def test_recognize_oversized_is_400_before_decode(client):
    blob = b"\x89PNG" + b"\x00" * (600 * 1024)  # over the 512 KiB cap, not an image
    r = client.post(
        "/api/recognize", files={"file": ("big.png", blob, "image/png")}
    )
    assert r.status_code == 400


def test_recognize_undecodable_is_400(client):
    r = client.post(
        "/api/recognize", files={"file": ("junk.png", b"not an image", "image/png")}
    )
    assert r.status_code == 400


def test_recognize_repeatable_digest_and_text(client, line_png):
    a = client.post(
        "/api/recognize", files={"file": ("l.png", line_png, "image/png")}
    ).json()
    b = client.post(
        "/api/recognize", files={"file": ("l.png", line_png, "image/png")}
    ).json()
    assert a["input_digest"] == b["input_digest"]
    for name in ("baseline", "finetuned"):
        assert a["results"][name]["text"] == b["results"][name]["text"]
        assert a["results"][name]["confidence"] == b["results"][name]["confidence"]


def test_models_endpoint(client):
    r = client.get("/api/models")
    assert r.status_code == 200
    body = r.json()
    names = [m["name"] for m in body["models"]]
    assert names == ["baseline", "finetuned"]
    digests = {m["file_digest"] for m in body["models"]}
    assert len(digests) == 2
    assert body["identical"] is False
    sizes = {m["dict_size"] for m in body["models"]}
    assert sizes == {6}
    assert all(m["parameter_count"] > 0 for m in body["models"])


def test_models_identical_flag(service_dir):
    cfg = ServiceConfig(
        baseline_checkpoint=service_dir / "baseline.ocrm",
        finetuned_checkpoint=service_dir / "baseline.ocrm",
        dict_path=service_dir / "dict.txt",
    )
    with TestClient(create_app(cfg)) as client:
        body = client.get("/api/models").json()
    assert body["identical"] is True
    assert body["models"][0]["file_digest"] == body["models"][1]["file_digest"]


def test_health(client):
    r = client.get("/api/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["uptime"] >= 0
    from linerec import __version__

    assert body["versions"]["linerec"] == __version__


def test_startup_fails_on_mismatched_dict(service_dir, tmp_path):
    other = CharDict.from_chars(synth.alphabet_chars(4))
    other.to_file(tmp_path / "other.txt")
    cfg = ServiceConfig(
        baseline_checkpoint=service_dir / "baseline.ocrm",
        finetuned_checkpoint=service_dir / "finetuned.ocrm",
        dict_path=tmp_path / "other.txt",
    )
    with pytest.raises(DictMismatchError):
        create_app(cfg)


def test_self_test(config):
    self_test(config)  # loads models and binds/releases the port


# --- live-server concurrency ---


@pytest.fixture(scope="module")
def live_server(config):
    import uvicorn

    app = create_app(config)
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


def test_concurrent_recognition_matches_sequential(live_server, cdict):
    lines = [
        _png_bytes(
            synth.render_line(cdict.chars[i % 6], cdict, synth.CLEAN_META, seed=i).pixels
        )
        for i in range(8)
    ]

    def post(data):
        with httpx.Client(timeout=30) as hc:
            r = hc.post(
                f"{live_server}/api/recognize?model=both",
                files={"file": ("l.png", data, "image/png")},
            )
            assert r.status_code == 200
            body = r.json()
            return (
                body["input_digest"],
                body["results"]["baseline"]["text"],
                body["results"]["finetuned"]["text"],
            )

    sequential = [post(d) for d in lines]
    jobs = [lines[i % len(lines)] for i in range(96)]
    with ThreadPoolExecutor(max_workers=32) as pool:
        concurrent = list(pool.map(post, jobs))
    for i, got in enumerate(concurrent):
        assert got == sequential[i % len(lines)]

    with httpx.Client(timeout=10) as hc:
        health = hc.get(f"{live_server}/api/health")
    assert health.status_code == 200
    assert health.json()["status"] == "ok"


def test_live_latency_under_two_seconds(live_server, line_png):
    with httpx.Client(timeout=30) as hc:
        start = time.perf_counter()
        r = hc.post(
            f"{live_server}/api/recognize?model=both",
            files={"file": ("l.png", line_png, "image/png")},
        )
        elapsed = time.perf_counter() - start
    assert r.status_code == 200
    assert elapsed < 2.0
