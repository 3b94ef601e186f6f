"""Paired age-group corpus: manifest parsing, sample I/O, normalisation, average faces.

Manifest layout (paths relative to the manifest's directory, ``#`` starts a
comment)::

    f G
    labels 0-5 6-10 11-15          # optional, G tokens
    bridge 1
    X
    young/a.pgm
    young/b.pgm
    Y
    old/a.pgm
    old/b.pgm
    bridge 2
    ...

Sample files are binary graymaps (``P5``) or plain text with one value per
line.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetDims:
    f: int
    G: int
    n_per_bridge: tuple
    group_labels: tuple = ()

    def __post_init__(self):
        if self.G < 2:
            raise DatasetError("need at least two age groups")
        if self.f < 1:
            raise DatasetError("sample dimensionality must be positive")
        if len(self.n_per_bridge) != self.G - 1:
            raise DatasetError(f"expected {self.G - 1} bridge counts, got {len(self.n_per_bridge)}")
        if any(int(n) < 1 for n in self.n_per_bridge):
            raise DatasetError("bridge with zero pairs")
        object.__setattr__(self, "n_per_bridge", tuple(int(n) for n in self.n_per_bridge))
        labels = tuple(self.group_labels) or tuple(f"group{g + 1}" for g in range(self.G))
        if len(labels) != self.G:
            raise DatasetError(f"expected {self.G} group labels, got {len(labels)}")
        object.__setattr__(self, "group_labels", labels)


@dataclass
class FacePairSet:
    """Bridge ``g`` (0-based): column i of X (group g) and Y (group g+1) show one subject."""

    bridge: int
    X: np.ndarray
    Y: np.ndarray
    x_paths: tuple = ()
    y_paths: tuple = ()

    def __post_init__(self):
        if self.X.shape != self.Y.shape:
            raise DatasetError(f"bridge {self.bridge + 1}: X {self.X.shape} vs Y {self.Y.shape}")
        if self.X.ndim != 2 or self.X.shape[1] == 0:
            raise DatasetError(f"bridge {self.bridge + 1}: bridge with zero pairs")

    @property
    def n(self):
        return self.X.shape[1]


@dataclass
class DatasetBundle:
    dims: DatasetDims
    pairs: list = field(default_factory=list)

    def group_samples(self, g):
        """All columns observed in group ``g`` (0-based): X of bridge g, Y of bridge g-1."""
        cols = []
        if g < self.dims.G - 1:
            cols.append(self.pairs[g].X)
        if g > 0:
            cols.append(self.pairs[g - 1].Y)
        if not cols:
            raise DatasetError(f"group {g + 1} has no samples")
        return np.hstack(cols)


@dataclass
class AverageFaceSet:
    faces: list

    def __getitem__(self, g):
        return self.faces[g]

    def __len__(self):
        return len(self.faces)


def bundle_from_arrays(Xs, Ys, group_labels=()):
    """Build a bundle from per-bridge ``f x n`` arrays (younger, older)."""
    if len(Xs) != len(Ys) or not Xs:
        raise DatasetError("need matching, non-empty X and Y lists")
    pairs = [FacePairSet(g, np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64))
             for g, (X, Y) in enumerate(zip(Xs, Ys))]
    f = pairs[0].X.shape[0]
    for p in pairs:
        if p.X.shape[0] != f:
            raise DatasetError("shape mismatch: samples disagree on dimensionality")
    dims = DatasetDims(f, len(pairs) + 1, tuple(p.n for p in pairs), tuple(group_labels))
    return DatasetBundle(dims, pairs)


# -- sample files -------------------------------------------------------------

def _pgm_tokens(data, count, pos):
    tokens = []
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DatasetError("truncated graymap header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path):
    """Read a binary graymap; returns (pixels as float in 0..maxval, width, height, maxval)."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise DatasetError(f"{path}: not a binary graymap")
    (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval < 65536:
        raise DatasetError(f"{path}: bad maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    nbytes = w * h * np.dtype(dtype).itemsize
    raw = data[pos:pos + nbytes]
    if len(raw) != nbytes:
        raise DatasetError(f"{path}: truncated pixel data")
    return np.frombuffer(raw, dtype=dtype).astype(np.float64), w, h, maxval


def write_pgm(path, values, width=None, height=None):
    """Write values in [0,1] as an 8-bit graymap (square image unless a shape is given)."""
    v = np.clip(np.asarray(values, dtype=np.float64).ravel(), 0.0, 1.0)
    if width is None:
        side = int(round(np.sqrt(v.size)))
        width, height = (side, side) if side * side == v.size else (v.size, 1)
    pixels = np.rint(v * 255.0).astype(np.uint8)
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (width, height) + pixels.tobytes())


def write_text_sample(path, values):
    Path(path).write_text("".join(f"{float(x)!r}\n" for x in np.asarray(values, dtype=np.float64).ravel()))


def read_sample(path):
    """Read one sample as a float vector: graymaps scaled by maxval, text verbatim."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing file: {path}")
    with path.open("rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        pixels, _, _, maxval = read_pgm(path)
        return pixels / maxval
    try:
        values = np.array([float(tok) for tok in path.read_text().split()], dtype=np.float64)
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    return values


def write_sample(path, values):
    if str(path).endswith(".pgm"):
        write_pgm(path, values)
    else:
        write_text_sample(path, values)


# -- manifest -----------------------------------------------------------------

def parse_manifest(text):
    """Parse manifest text into ``(f, G, labels, [(x_paths, y_paths), ...])``."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise DatasetError("empty manifest")
    try:
        f, G = (int(tok) for tok in lines[0].split())
    except ValueError:
        raise DatasetError("manifest header must be 'f G'") from None
    labels = ()
    bridges = []
    side = None
    for ln in lines[1:]:
        head = ln.split()
        if head[0] == "labels":
            labels = tuple(head[1:])
        elif head[0] == "bridge":
            if len(head) != 2 or int(head[1]) != len(bridges) + 1:
                raise DatasetError(f"bridges must be numbered 1..G-1 in order, got {ln!r}")
            bridges.append(([], []))
            side = None
        elif ln in ("X", "Y"):
            if not bridges:
                raise DatasetError("path list before any 'bridge' line")
            side = bridges[-1][0] if ln == "X" else bridges[-1][1]
        else:
            if side is None:
                raise DatasetError(f"path outside an X/Y list: {ln!r}")
            side.append(ln)
    if len(bridges) != G - 1:
        raise DatasetError(f"manifest declares G={G} but lists {len(bridges)} bridges")
    for g, (xs, ys) in enumerate(bridges):
        if len(xs) != len(ys):
            raise DatasetError(f"bridge {g + 1}: pair count mismatch ({len(xs)} X vs {len(ys)} Y)")
        if not xs:
            raise DatasetError(f"bridge {g + 1}: bridge with zero pairs")
    return f, G, labels, bridges


def format_manifest(f, G, bridges, labels=()):
    out = [f"{f} {G}"]
    if labels:
        out.append("labels " + " ".join(labels))
    for g, (xs, ys) in enumerate(bridges):
        out += [f"bridge {g + 1}", "X", *map(str, xs), "Y", *map(str, ys)]
    return "\n".join(out) + "\n"


def load_dataset(manifest_path, normalized=True):
    """Load and validate the corpus described by a manifest; values scaled to [0,1]."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DatasetError(f"missing file: {manifest_path}")
    f, G, labels, bridges = parse_manifest(manifest_path.read_text())
    root = manifest_path.parent
    pairs = []
    for g, (xs, ys) in enumerate(bridges):
        mats = []
        for paths in (xs, ys):
            cols = []
            for p in paths:
                v = read_sample(root / p)
                if v.shape != (f,):
                    raise DatasetError(f"shape mismatch: {p} has {v.size} values, expected {f}")
                cols.append(v)
            mats.append(np.column_stack(cols))
        pairs.append(FacePairSet(g, mats[0], mats[1], tuple(xs), tuple(ys)))
    bundle = DatasetBundle(DatasetDims(f, G, tuple(len(xs) for xs, _ in bridges), labels), pairs)
    return normalize(bundle) if normalized else bundle


def normalize(bundle):
    """Scale the whole bundle to [0,1] by its bit depth.

    Data already within [0,1] is returned unchanged; otherwise every entry is
    divided by 255 (8-bit) or 65535 (16-bit), whichever range holds the data.
    Graymaps arrive here already divided by their maxval; the rule matters for
    raw numeric text samples.
    """
    hi = 0.0
    for p in bundle.pairs:
        for M in (p.X, p.Y):
            if not np.all(np.isfinite(M)):
                raise DatasetError("non-finite values")
            if M.size and M.min() < 0:
                raise DatasetError("negative sample values")
            hi = max(hi, float(M.max(initial=0.0)))
    if hi <= 1.0:
        scale = 1.0
    elif hi <= 255.0:
        scale = 255.0
    elif hi <= 65535.0:
        scale = 65535.0
    else:
        raise DatasetError(f"values up to {hi} exceed 16-bit range")
    if scale == 1.0:
        return bundle
    pairs = [replace(p, X=p.X / scale, Y=p.Y / scale) for p in bundle.pairs]
    return DatasetBundle(bundle.dims, pairs)


def compute_average_faces(bundle):
    """Per-group pixel mean over every column observed in that group."""
    return AverageFaceSet([bundle.group_samples(g).mean(axis=1) for g in range(bundle.dims.G)])
