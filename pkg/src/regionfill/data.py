"""Image corpus handling: manifests, loading, normalization, batch iteration.

Value domains: images live in [-1, 1] inside the models ("internal") and in
[0, 1] for metric computation ("metric"). The two maps below are the only
conversion points in the package.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
import torch
from PIL import Image

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


class CorpusError(ValueError):
    """Empty corpus, corrupt manifest, or unreadable image."""


def to_metric(x):
    """Affine map from the internal [-1, 1] domain to the metric [0, 1] domain."""
    return (x + 1.0) * 0.5


def to_internal(x):
    """Affine map from the metric [0, 1] domain to the internal [-1, 1] domain."""
    return x * 2.0 - 1.0


@dataclass(frozen=True)
class CorpusManifest:
    split: str
    files: tuple[str, ...]
    image_size: int
    checksum: str

    def __len__(self) -> int:
        return len(self.files)


def _file_list_checksum(files: tuple[str, ...]) -> str:
    h = hashlib.sha256()
    for f in files:
        h.update(f.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def build_manifest(
    root_dir: str | Path, split: str = "train", image_size: int = 256
) -> CorpusManifest:
    """Scan a directory for raster images, sorted lexicographically.

    Non-image files are skipped (their count is reported via the skipped
    attribute on the raised error's message only when the corpus ends up
    empty; otherwise silently). Raises CorpusError for an empty corpus.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise CorpusError(f"corpus directory does not exist: {root}")
    files = []
    skipped = 0
    for p in sorted(root.rglob("*")):
        if not p.is_file():
            continue
        if p.suffix.lower() in IMAGE_SUFFIXES:
            files.append(str(p.relative_to(root)))
        else:
            skipped += 1
    if not files:
        raise CorpusError(
            f"no images under {root} ({skipped} non-image files skipped)"
        )
    files_t = tuple(sorted(files))
    return CorpusManifest(
        split=split,
        files=files_t,
        image_size=image_size,
        checksum=_file_list_checksum(files_t),
    )


def save_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    """One path per line, preceded by a header with split, size and checksum."""
    lines = [
        f"# split={manifest.split} size={manifest.image_size} checksum={manifest.checksum}"
    ]
    lines.extend(manifest.files)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> CorpusManifest:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# split="):
        raise CorpusError(f"not a manifest file: {path}")
    header = dict(kv.split("=", 1) for kv in text[0][2:].split())
    files = tuple(line for line in text[1:] if line.strip())
    checksum = _file_list_checksum(files)
    if checksum != header["checksum"]:
        raise CorpusError(f"manifest checksum mismatch in {path}")
    return CorpusManifest(
        split=header["split"],
        files=files,
        image_size=int(header["size"]),
        checksum=checksum,
    )


def load_and_normalize(path: str | Path, size: int) -> torch.Tensor:
    """Read an image file into a (3, size, size) float32 tensor in [-1, 1].

    Grayscale inputs are replicated to 3 channels; resizing is bilinear.
    """
    try:
        with Image.open(path) as img:
            img = img.convert("RGB")
            if img.size != (size, size):
                img = img.resize((size, size), Image.BILINEAR)
            arr = np.asarray(img, dtype=np.float32) / 255.0
    except (OSError, ValueError) as exc:
        raise CorpusError(f"cannot read image {path}: {exc}") from exc
    t = torch.from_numpy(arr).permute(2, 0, 1).contiguous()
    return to_internal(t)


def batch_iter(
    manifest: CorpusManifest, batch_size: int, seed: int, epoch: int = 0
) -> Iterator[tuple[str, ...]]:
    """Yield shuffled batches of file names; the final partial batch is kept.

    The permutation is a pure function of (seed, epoch), so resumed runs
    replay exactly the same schedule.
    """
    if batch_size < 1:
        raise CorpusError(f"batch_size must be >= 1, got {batch_size}")
    rng = np.random.default_rng((seed, epoch))
    order = rng.permutation(len(manifest.files))
    for i in range(0, len(order), batch_size):
        yield tuple(manifest.files[j] for j in order[i : i + batch_size])


def load_batch(
    root_dir: str | Path, names: tuple[str, ...], size: int
) -> torch.Tensor:
    """Stack normalized images into one (B, 3, size, size) tensor."""
    root = Path(root_dir)
    return torch.stack([load_and_normalize(root / n, size) for n in names])


def make_fixture_corpus(out_dir: str | Path, size: int = 64, count: int = 16) -> list[Path]:
    """Write a small deterministic synthetic corpus: gradients, checkerboards,
    and soft blobs. Used by tests and the quickstart; no downloads involved."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(2024)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float32) / (size - 1)
    paths = []
    for i in range(count):
        kind = i % 3
        if kind == 0:
            a = float(rng.uniform(0.2, 1.0))
            b = float(rng.uniform(0.2, 1.0))
            img = np.stack(
                [a * xs, b * ys, 0.5 * (a * xs + b * ys)], axis=-1
            )
        elif kind == 1:
            period = int(rng.integers(4, 12))
            board = ((ys * (size - 1)) // period + (xs * (size - 1)) // period) % 2
            phase = rng.uniform(0, 1, size=3).astype(np.float32)
            img = np.stack([np.abs(board - p) for p in phase], axis=-1)
        else:
            img = np.zeros((size, size, 3), dtype=np.float32)
            for _ in range(int(rng.integers(2, 5))):
                cx, cy = rng.uniform(0.2, 0.8, size=2)
                s = float(rng.uniform(0.05, 0.2))
                blob = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * s * s))
                img += blob[..., None] * rng.uniform(0.3, 1.0, size=3).astype(np.float32)
            img = np.clip(img, 0.0, 1.0)
        arr = (np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
        p = out / f"fixture_{i:02d}.png"
        Image.fromarray(arr).save(p)
        paths.append(p)
    return paths
