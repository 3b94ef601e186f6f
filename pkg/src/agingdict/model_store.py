"""Binary model files.

Layout (all integers and floats little-endian, matrices column-major)::

    b"ADLM"  u32 version
    then seven sections, each ``u64 byte_length`` followed by its payload:
      DIMS      u64 f, G, m, k; u64 n_per_bridge[G-1]
      LABELS    G x (u32 byte_count, UTF-8 bytes)
      HYPER     f64 lambda, gamma, rel_tol; u64 k, m, max_outer_iter; i64 rng_seed; u8 center
      BASES     G x (f64[f*m] H, f64[f] offset)
      DICTS     G x f64[m*k]
      AVERAGES  G x f64[f]
      LOG       f64 initial_objective; u8 converged; u64 rows, cols; f64[rows*cols] row-major

The log keeps the deterministic columns only (no timings) so that a fixed
seed reproduces the file byte for byte.
"""

import struct
from pathlib import Path

import numpy as np

from agingdict.dataset import DatasetDims
from agingdict.dictionary_learning import AgingModel, HyperParams, LogRow, TrainingError
from agingdict.projection import ProjectionBasis

MAGIC = b"ADLM"
VERSION = 1
LOG_COLS = len(LogRow.PERSISTED)


class ModelFormatError(ValueError):
    pass


def _f64(a):
    return np.asarray(a, dtype="<f8").ravel(order="F").tobytes()


def _section(payload):
    return struct.pack("<Q", len(payload)) + payload


def encode(model):
    dims, hyp = model.dims, model.hyper
    G, f, m, k = dims.G, dims.f, model.m, model.k
    sections = [
        struct.pack("<4Q", f, G, m, k) + struct.pack(f"<{G - 1}Q", *dims.n_per_bridge),
        b"".join(struct.pack("<I", len(b)) + b for b in (s.encode("utf-8") for s in dims.group_labels)),
        struct.pack("<3d3Qq?", hyp.lam, hyp.gamma, hyp.rel_tol, hyp.k, hyp.m, hyp.max_outer_iter,
                    hyp.rng_seed, bool(hyp.center)),
        b"".join(_f64(b.H) + _f64(b.offset) for b in model.bases),
        b"".join(_f64(D) for D in model.dictionaries),
        b"".join(_f64(r) for r in model.averages),
    ]
    rows = np.array([r.persisted() for r in model.training_log], dtype="<f8").reshape(-1, LOG_COLS)
    sections.append(struct.pack("<d?2Q", model.initial_objective, bool(model.converged), *rows.shape)
                    + rows.tobytes(order="C"))
    return MAGIC + struct.pack("<I", VERSION) + b"".join(_section(s) for s in sections)


def save(model, path):
    Path(path).write_bytes(encode(model))


class _Reader:
    def __init__(self, data):
        self.data, self.pos = data, 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ModelFormatError("unexpected end of section")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def f64(self, shape):
        n = int(np.prod(shape))
        arr = np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)
        return arr.reshape(shape, order="F")

    def section(self):
        (length,) = self.unpack("<Q")
        return _Reader(self.take(length))

    def done(self):
        if self.pos != len(self.data):
            raise ModelFormatError("section length mismatch")


def decode(data):
    r = _Reader(bytes(data))
    if r.take(4) != MAGIC:
        raise ModelFormatError("bad magic")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise ModelFormatError(f"version mismatch: file {version}, supported {VERSION}")

    s = r.section()
    f, G, m, k = s.unpack("<4Q")
    if G < 2:
        raise ModelFormatError("G must be >= 2")
    n_per_bridge = s.unpack(f"<{G - 1}Q")
    s.done()

    s = r.section()
    labels = []
    for _ in range(G):
        (nb,) = s.unpack("<I")
        labels.append(s.take(nb).decode("utf-8"))
    s.done()

    s = r.section()
    lam, gamma, rel_tol, hk, hm, max_outer, seed, center = s.unpack("<3d3Qq?")
    s.done()

    s = r.section()
    bases = []
    for g in range(G):
        H = s.f64((f, m))
        bases.append(ProjectionBasis(g, H, s.f64((f,))))
    s.done()

    s = r.section()
    dicts = [s.f64((m, k)) for _ in range(G)]
    s.done()

    s = r.section()
    averages = [s.f64((f,)) for _ in range(G)]
    s.done()

    s = r.section()
    initial, converged, nrows, ncols = s.unpack("<d?2Q")
    if ncols != LOG_COLS:
        raise ModelFormatError(f"log has {ncols} columns, expected {LOG_COLS}")
    table = np.frombuffer(s.take(8 * nrows * ncols), dtype="<f8").reshape(nrows, ncols)
    s.done()
    r.done()

    rows = []
    for vals in table:
        rec = dict(zip(LogRow.PERSISTED, (float(v) for v in vals)))
        for name in ("iteration", "lasso_unconverged", "reseeded"):
            rec[name] = int(rec[name])
        rows.append(LogRow(**rec))
    try:
        model = AgingModel(
            dims=DatasetDims(int(f), int(G), tuple(n_per_bridge), tuple(labels)),
            hyper=HyperParams(lam=lam, gamma=gamma, k=int(hk), m=int(hm), max_outer_iter=int(max_outer),
                              rel_tol=rel_tol, rng_seed=int(seed), center=bool(center)),
            bases=bases, dictionaries=dicts, averages=averages, training_log=rows,
            initial_objective=initial, converged=bool(converged),
        )
        model.validate()
    except (TrainingError, ValueError) as exc:
        raise ModelFormatError(str(exc)) from None
    return model


def load(path):
    return decode(Path(path).read_bytes())

