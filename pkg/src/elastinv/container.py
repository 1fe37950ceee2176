"""Plain-text container shared by ``.efd`` datasets and ``.npk`` parameter packs.

Layout::

    # comment lines are ignored
    key = value            (header, any number of lines)
    @block name d0 d1 ...  (shape of the following numeric block)
    v v v ...              (row-major, one line per leading index)
    @end

Numbers are written with 17 significant digits so a write/read round trip
reproduces every float64 bit.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np


class ContainerError(ValueError):
    """Malformed or inconsistent container file."""


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_container(path, header: dict, blocks: dict, comment: str | None = None) -> None:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    for key, value in header.items():
        if value is None:
            continue
        if "=" in key or key.startswith(("@", "#")) or not key.strip():
            raise ContainerError(f"invalid header key {key!r}")
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = format_float(value)
        else:
            text = str(value)
        if "\n" in text:
            raise ContainerError(f"header value for {key!r} spans lines")
        lines.append(f"{key} = {text}")
    for name, arr in blocks.items():
        a = np.asarray(arr, dtype=np.float64)
        if " " in name:
            raise ContainerError(f"block name {name!r} contains whitespace")
        lines.append("@block " + " ".join([name] + [str(d) for d in a.shape]))
        rows = a.reshape(a.shape[0], -1) if a.ndim >= 1 else a.reshape(1, 1)
        for row in rows:
            lines.append(" ".join(format_float(v) for v in row))
        lines.append("@end")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_container(path) -> tuple[dict, dict]:
    """Return ``(header, blocks)``; header values are left as strings."""
    text = Path(path).read_text(encoding="utf-8")
    header: dict[str, str] = {}
    blocks: dict[str, np.ndarray] = {}
    lines = text.splitlines()
    k = 0
    while k < len(lines):
        raw = lines[k]
        line = raw.strip()
        k += 1
        if not line or line.startswith("#"):
            continue
        if line.startswith("@block"):
            parts = line.split()
            if len(parts) < 2:
                raise ContainerError(f"line {k}: block without a name")
            name = parts[1]
            try:
                shape = tuple(int(p) for p in parts[2:])
            except ValueError:
                raise ContainerError(f"line {k}: bad block shape {parts[2:]}") from None
            if any(d < 0 for d in shape):
                raise ContainerError(f"line {k}: negative block dimension")
            if name in blocks:
                raise ContainerError(f"line {k}: duplicate block {name!r}")
            values = []
            while True:
                if k >= len(lines):
                    raise ContainerError(f"block {name!r} is not terminated by @end")
                row = lines[k].strip()
                k += 1
                if row == "@end":
                    break
                try:
                    values.extend(float(v) for v in row.split())
                except ValueError:
                    raise ContainerError(f"line {k}: non-numeric entry in block {name!r}") from None
            expected = math.prod(shape) if shape else 1
            if len(values) != expected:
                raise ContainerError(
                    f"block {name!r} declares shape {shape} but holds {len(values)} values"
                )
            blocks[name] = np.array(values, dtype=np.float64).reshape(shape)
            continue
        if "=" not in line:
            raise ContainerError(f"line {k}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ContainerError(f"line {k}: empty header key")
        if key in header:
            raise ContainerError(f"line {k}: duplicate header key {key!r}")
        header[key] = value
    return header, blocks


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ContainerError(f"not a boolean: {text!r}")
