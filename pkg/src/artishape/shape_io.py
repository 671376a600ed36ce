"""Binary shape masks: loading, validation, canonical cropping and manifests."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


class ShapeError(ValueError):
    """Raised when an input image or manifest cannot become a valid shape."""


@dataclass(frozen=True)
class ShapeMask:
    """Tightly cropped, single-component binary shape.

    ``grid[x, y]`` is True for shape pixels, ``x`` indexing rows.
    """

    id: str
    grid: np.ndarray
    category: str = ""

    def __post_init__(self):
        grid = np.array(self.grid, dtype=bool)
        if grid.ndim != 2:
            raise ShapeError(f"{self.id}: grid must be 2-D, got shape {grid.shape}")
        if not grid.any():
            raise ShapeError(f"{self.id}: empty foreground")
        if not (grid[0].any() and grid[-1].any() and grid[:, 0].any() and grid[:, -1].any()):
            raise ShapeError(f"{self.id}: grid is not cropped to its bounding box")
        n_comp = count_components(grid)
        if n_comp != 1:
            raise ShapeError(f"{self.id}: {n_comp} components (expected exactly 1)")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def m(self) -> int:
        return int(self.grid.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def pixel_index(self) -> np.ndarray:
        """(m, 2) array of (x, y) shape-pixel coordinates in row-major order."""
        return np.argwhere(self.grid)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.grid.shape, dtype="<u8").tobytes())
        h.update(np.packbits(self.grid).tobytes())
        return h.hexdigest()


def count_components(grid: np.ndarray) -> int:
    _, n = ndimage.label(grid, structure=FOUR_CONNECTED)
    return int(n)


def crop(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=bool)
    if not grid.any():
        raise ShapeError("empty foreground")
    rows = np.flatnonzero(grid.any(axis=1))
    cols = np.flatnonzero(grid.any(axis=0))
    return grid[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1].copy()


def mask_from_array(grid, id="shape", category="") -> ShapeMask:
    return ShapeMask(id=id, grid=crop(grid), category=category)


def dihedral_variants(grid: np.ndarray) -> list[np.ndarray]:
    """The 8 images of ``grid`` under 90-degree rotations and mirroring."""
    out = []
    for g in (grid, grid[:, ::-1]):
        for k in range(4):
            out.append(np.ascontiguousarray(np.rot90(g, k)))
    return out


def canonical_pose(mask: ShapeMask) -> ShapeMask:
    """Pick a fixed representative of the mask's dihedral orbit.

    Rotated or mirrored copies of a shape map to a bit-identical grid, so every
    downstream stage sees the same floating-point inputs.
    """

    def key(g):
        return (g.shape, np.packbits(g).tobytes())

    best = min(dihedral_variants(mask.grid), key=key)
    return ShapeMask(id=mask.id, grid=best, category=mask.category)


# --- image readers -----------------------------------------------------------

def _pnm_tokens(data: bytes, count: int, pos: int = 2):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ShapeError("truncated PNM header")
        tokens.append(int(data[start:pos]))
    return tokens, pos


def _plain_values(data: bytes, pos: int, count: int, bits: bool) -> np.ndarray:
    body = b"\n".join(line.split(b"#", 1)[0] for line in data[pos:].splitlines())
    if bits:
        digits = [c for c in body if c in (ord("0"), ord("1"))]
        vals = np.array(digits[:count], dtype=np.int64) - ord("0")
    else:
        vals = np.array(body.split()[:count], dtype=np.int64)
    if vals.size != count:
        raise ShapeError(f"expected {count} pixel values, found {vals.size}")
    return vals


def read_pnm(path) -> tuple[np.ndarray, str]:
    """Read a PBM/PGM file. Returns (values, kind) with kind 'bits' or 'gray'.

    Gray values are rescaled to the 0..255 range.
    """
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic in (b"P1", b"P4"):
        (w, h), pos = _pnm_tokens(data, 2)
        if magic == b"P1":
            vals = _plain_values(data, pos, w * h, bits=True)
            return vals.reshape(h, w).astype(np.uint8), "bits"
        pos += 1
        row_bytes = (w + 7) // 8
        raw = np.frombuffer(data, dtype=np.uint8, count=row_bytes * h, offset=pos)
        bits = np.unpackbits(raw.reshape(h, row_bytes), axis=1)[:, :w]
        return bits, "bits"
    if magic in (b"P2", b"P5"):
        (w, h, maxval), pos = _pnm_tokens(data, 3)
        if not 0 < maxval < 65536:
            raise ShapeError(f"bad PGM maxval {maxval}")
        if magic == b"P2":
            vals = _plain_values(data, pos, w * h, bits=False)
        else:
            pos += 1
            dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
            vals = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).astype(np.int64)
        vals = vals.reshape(h, w)
        if maxval != 255:
            vals = vals * 255.0 / maxval
        return vals, "gray"
    raise ShapeError(f"{path}: not a PBM/PGM file (magic {magic!r})")


def read_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "1":
            return np.asarray(im, dtype=np.uint8) * 255
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        raise ShapeError(f"{path}: PNG must be single-channel, got mode {im.mode}")


def load_mask(path, threshold: float = 128, invert: bool = False, id: str | None = None,
              category: str = "") -> ShapeMask:
    """Load a binary shape from PBM, PGM or single-channel PNG.

    Gray pixels at or above ``threshold`` are shape; PBM black (1) bits are
    shape. ``invert`` flips polarity for both.
    """
    path = Path(path)
    if id is None:
        id = path.stem
    try:
        if path.suffix.lower() == ".png":
            vals, kind = read_png(path), "gray"
        else:
            vals, kind = read_pnm(path)
    except OSError as exc:
        raise ShapeError(f"{path}: unreadable ({exc})") from exc
    grid = vals == 1 if kind == "bits" else vals >= threshold
    if invert:
        grid = ~grid
    if not grid.any():
        raise ShapeError(f"{path}: empty foreground")
    n_comp = count_components(grid)
    if n_comp != 1:
        raise ShapeError(f"{path}: {n_comp} components (expected exactly 1)")
    return ShapeMask(id=id, grid=crop(grid), category=category)


def pbm_text(grid: np.ndarray) -> str:
    """Plain PBM text, 1 = shape pixel."""
    grid = np.asarray(grid, dtype=bool)
    h, w = grid.shape
    lines = ["P1", f"{w} {h}"]
    lines += [" ".join("1" if v else "0" for v in row) for row in grid]
    return "\n".join(lines) + "\n"


def write_pbm(grid: np.ndarray, path) -> None:
    Path(path).write_text(pbm_text(grid))


def write_pgm(values: np.ndarray, path) -> None:
    """Raw 8-bit PGM."""
    values = np.asarray(values, dtype=np.uint8)
    h, w = values.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + values.tobytes())


# --- manifests ---------------------------------------------------------------

@dataclass
class DatasetManifest:
    entries: list[tuple[Path, str, str]] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e[1] for e in self.entries]

    @property
    def categories(self) -> dict[str, str]:
        return {e[1]: e[2] for e in self.entries}

    def has_labels(self) -> bool:
        return bool(self.entries) and all(e[2] for e in self.entries)

    def load(self, threshold: float = 128, invert: bool = False) -> list[ShapeMask]:
        return [load_mask(p, threshold, invert, id=i, category=c) for p, i, c in self.entries]


def load_manifest(path) -> DatasetManifest:
    """Read a ``path,id,category`` CSV; relative paths resolve against its folder."""
    path = Path(path)
    base = path.parent
    entries = []
    seen = {}
    with open(path, newline="") as fh:
        header_seen = False
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            row = [c.strip() for c in row]
            if not header_seen:
                if row != ["path", "id", "category"]:
                    raise ShapeError(f"line {lineno}: expected header 'path,id,category'")
                header_seen = True
                continue
            if len(row) != 3:
                raise ShapeError(f"line {lineno}: expected 3 fields, got {len(row)}")
            file, sid, cat = row
            if not sid:
                raise ShapeError(f"line {lineno}: empty id")
            if sid in seen:
                raise ShapeError(f"line {lineno}: duplicate id {sid!r} (first on line {seen[sid]})")
            seen[sid] = lineno
            fpath = Path(file)
            if not fpath.is_absolute():
                fpath = base / fpath
            if not fpath.is_file():
                raise ShapeError(f"line {lineno}: missing file {fpath}")
            entries.append((fpath, sid, cat))
    if not header_seen:
        raise ShapeError(f"{path}: missing header 'path,id,category'")
    return DatasetManifest(entries)
