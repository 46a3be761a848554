import io
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from regionfill import masks
from regionfill.inference import InpaintEngine
from regionfill.nn import DiscriminatorConfig, GeneratorConfig
from regionfill.service.app import create_app
from regionfill.training import TrainConfig, init_state, save_checkpoint


def _small_cfg(seed):
    return TrainConfig(
        image_size=16,
        batch_size=2,
        epochs=1,
        pretrain_epochs=0,
        generator=GeneratorConfig(base_width=8, levels=2),
        discriminator=DiscriminatorConfig(levels=2, base_width=8),
        seed=seed,
    )


@pytest.fixture(scope="module")
def checkpoints(tmp_path_factory):
    d = tmp_path_factory.mktemp("svc_ckpt")
    paths = []
    for seed in (3, 4):
        p = d / f"seed{seed}.ckpt"
        save_checkpoint(init_state(_small_cfg(seed)), p)
        paths.append(p)
    return paths


@pytest.fixture()
def client(checkpoints):
    app = create_app(engine=InpaintEngine.from_checkpoint(checkpoints[0]))
    with TestClient(app) as c:
        yield c


def _png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def _post_inpaint(client, img: np.ndarray, m: np.ndarray):
    return client.post(
        "/v1/inpaint",
        files={
            "image": ("img.png", _png_bytes(img), "image/png"),
            "mask": ("mask.png", masks.mask_to_png_bytes(m), "image/png"),
        },
    )


def test_health_reports_loaded_model(client):
    r = client.get("/v1/health")
    assert r.status_code == 200
    body = r.json()
    assert body["loaded"] is True
    assert isinstance(body["model_id"], str) and len(body["model_id"]) == 12
    assert body["uptime_seconds"] >= 0


def test_health_when_empty():
    app = create_app()
    with TestClient(app) as c:
        body = c.get("/v1/health").json()
        assert body["loaded"] is False
        assert body["model_id"] is None


def test_inpaint_round_trip(client):
    rng = np.random.default_rng(11)
    img = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
    m = np.ones((16, 16), dtype=np.uint8)
    m[3:9, 4:12] = 0
    r = _post_inpaint(client, img, m)
    assert r.status_code == 200
    assert r.headers["content-type"] == "image/png"
    assert len(r.headers["X-Model-Id"]) == 12
    assert float(r.headers["X-Processing-Time-Ms"]) > 0
    out = np.asarray(Image.open(io.BytesIO(r.content)))
    assert out.shape == img.shape
    np.testing.assert_array_equal(out[m == 1], img[m == 1])
    assert not np.array_equal(out[m == 0], img[m == 0])


def test_inpaint_all_existing_mask_is_near_identity(client):
    rng = np.random.default_rng(12)
    img = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
    m = np.ones((16, 16), dtype=np.uint8)
    r = _post_inpaint(client, img, m)
    assert r.status_code == 200
    out = np.asarray(Image.open(io.BytesIO(r.content))).astype(np.int16)
    assert np.abs(out - img.astype(np.int16)).max() <= 2


def test_inpaint_bridges_other_resolutions(client):
    rng = np.random.default_rng(13)
    img = rng.integers(0, 256, size=(48, 40, 3), dtype=np.uint8)
    m = np.ones((48, 40), dtype=np.uint8)
    m[10:30, 8:24] = 0
    r = _post_inpaint(client, img, m)
    assert r.status_code == 200
    out = np.asarray(Image.open(io.BytesIO(r.content)))
    assert out.shape == img.shape
    np.testing.assert_array_equal(out[m == 1], img[m == 1])


def test_inpaint_repeat_is_byte_identical(client):
    rng = np.random.default_rng(14)
    img = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
    m = np.ones((16, 16), dtype=np.uint8)
    m[5:10, 5:10] = 0
    r1 = _post_inpaint(client, img, m)
    r2 = _post_inpaint(client, img, m)
    assert r1.content == r2.content


def test_inpaint_dimension_mismatch_echoes_both(client):
    img = np.zeros((16, 16, 3), dtype=np.uint8)
    m = np.ones((8, 12), dtype=np.uint8)
    r = _post_inpaint(client, img, m)
    assert r.status_code == 400
    body = r.json()
    assert body["code"] == "dimension_mismatch"
    assert body["detail"]["image"] == [16, 16]
    assert body["detail"]["mask"] == [8, 12]


def test_inpaint_undecodable_image(client):
    r = client.post(
        "/v1/inpaint",
        files={
            "image": ("img.png", b"this is not a png", "image/png"),
            "mask": ("mask.png", masks.mask_to_png_bytes(np.ones((4, 4), np.uint8)), "image/png"),
        },
    )
    assert r.status_code == 400
    assert r.json()["code"] == "undecodable_image"


def test_inpaint_without_model_is_503():
    app = create_app()
    with TestClient(app) as c:
        img = np.zeros((8, 8, 3), dtype=np.uint8)
        r = _post_inpaint(c, img, np.ones((8, 8), np.uint8))
        assert r.status_code == 503
        assert r.json()["code"] == "model_not_loaded"


def test_inpaint_payload_cap(checkpoints):
    app = create_app(engine=InpaintEngine.from_checkpoint(checkpoints[0]), max_payload=256)
    with TestClient(app) as c:
        img = np.random.default_rng(0).integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
        r = _post_inpaint(c, img, np.ones((64, 64), np.uint8))
        assert r.status_code == 413
        assert r.json()["code"] == "payload_too_large"


def test_model_swap_changes_id(client, checkpoints):
    first = client.get("/v1/health").json()["model_id"]
    r = client.post("/v1/model", json={"checkpoint_path": str(checkpoints[1])})
    assert r.status_code == 200
    assert r.json()["image_size"] == 16
    second = client.get("/v1/health").json()["model_id"]
    assert second == r.json()["model_id"]
    assert second != first


def test_corrupt_checkpoint_keeps_old_model(client, tmp_path):
    before = client.get("/v1/health").json()["model_id"]
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"RFCKgarbagegarbage")
    r = client.post("/v1/model", json={"checkpoint_path": str(bad)})
    assert r.status_code == 422
    assert r.json()["code"] == "bad_checkpoint"
    assert client.get("/v1/health").json()["model_id"] == before
    img = np.zeros((16, 16, 3), dtype=np.uint8)
    assert _post_inpaint(client, img, np.ones((16, 16), np.uint8)).status_code == 200


def test_missing_checkpoint_path_is_422(client, tmp_path):
    r = client.post("/v1/model", json={"checkpoint_path": str(tmp_path / "absent.ckpt")})
    assert r.status_code == 422


def test_concurrent_inpaints_during_swap(client, checkpoints):
    rng = np.random.default_rng(15)
    img = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
    m = np.ones((16, 16), dtype=np.uint8)
    m[4:12, 4:12] = 0
    results: list[tuple[int, str]] = []
    lock = threading.Lock()

    def worker():
        for _ in range(3):
            r = _post_inpaint(client, img, m)
            with lock:
                results.append((r.status_code, r.headers.get("X-Model-Id", "")))

    def swapper():
        for path in (checkpoints[1], checkpoints[0], checkpoints[1]):
            client.post("/v1/model", json={"checkpoint_path": str(path)})

    threads = [threading.Thread(target=worker) for _ in range(4)]
    threads.append(threading.Thread(target=swapper))
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    valid_ids = {
        InpaintEngine.from_checkpoint(checkpoints[0]).model_id,
        InpaintEngine.from_checkpoint(checkpoints[1]).model_id,
    }
    assert len(results) == 12
    for status, model_id in results:
        assert status == 200
        assert model_id in valid_ids
