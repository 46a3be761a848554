#!/usr/bin/env python3
"""Decode mask PNGs with the service-side loader and print their contents.

Used by the frontend boundary tests to prove that masks exported by the
editor decode to the identical pixel grid on the Python side. For each path
given, prints one line: ``<width> <height> <base64 of row-major 0/1 bytes>``.
"""

import base64
import sys

from regionfill.masks import load_mask


def main() -> int:
    if len(sys.argv) < 2:
        print("usage: decode_mask.py MASK_PNG [MASK_PNG ...]", file=sys.stderr)
        return 2
    for path in sys.argv[1:]:
        m = load_mask(path)
        h, w = m.shape
        print(f"{w} {h} {base64.b64encode(m.tobytes()).decode('ascii')}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
