"""Surface grid files, OBJ export, run configuration and geodesic archives.

Grid file layout
----------------
Line 1 is a JSON object terminated by ``\\n``::

    {"n_theta": 24, "n_phi": 49, "units": "mm", "format": "binary", "seam": "open"}

followed by ``n_phi * n_cols * 3`` float64 values in row-major order
(row = phi index, column = theta index, then x, y, z).  ``format`` is
``"binary"`` (little-endian IEEE doubles, no padding) or ``"csv"`` (one
point per line, three comma-separated values).  With ``"seam": "closed"``
the block carries an extra ``theta = 2 pi`` column (``n_cols = n_theta + 1``)
that must reproduce column 0; with ``"open"`` (the default) ``n_cols =
n_theta``.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from .grid import DTYPE, GridError, SphericalGrid, as_tensor, build_grid, check_surface, pole_points
from .metric import MetricWeights, area
from .optim import OptimizeConfig
from .pipelines import MATCH_MODES, MatchConfig, MatchResult

FORMATS = ("binary", "csv")
HEADER_KEYS = ("n_theta", "n_phi", "units", "format")


class SurfaceFormatError(ValueError):
    """Malformed grid file; ``key`` names the offending header field when there is one."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


# ---------------------------------------------------------------------------
# grid files

def _parse_header(line: bytes, path) -> dict:
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SurfaceFormatError(f"{path}: header is not a JSON object ({exc})") from None
    if not isinstance(header, dict):
        raise SurfaceFormatError(f"{path}: header is not a JSON object")
    for key in HEADER_KEYS:
        if key not in header:
            raise SurfaceFormatError(f"{path}: header is missing key {key!r}", key)
    for key in ("n_theta", "n_phi"):
        v = header[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise SurfaceFormatError(f"{path}: header key {key!r} must be a positive integer, "
                                     f"got {v!r}", key)
    if not isinstance(header["units"], str):
        raise SurfaceFormatError(f"{path}: header key 'units' must be a string", "units")
    if header["format"] not in FORMATS:
        raise SurfaceFormatError(f"{path}: header key 'format' must be one of {FORMATS}, "
                                 f"got {header['format']!r}", "format")
    seam = header.get("seam", "open")
    if seam not in ("open", "closed"):
        raise SurfaceFormatError(f"{path}: header key 'seam' must be 'open' or 'closed', "
                                 f"got {seam!r}", "seam")
    header["seam"] = seam
    return header


def read_surface_file(path):
    """Parse a grid file without invariant checks: ``(header, array)``, array ``(n_phi, n_cols, 3)``."""
    path = Path(path)
    raw = path.read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise SurfaceFormatError(f"{path}: no header line")
    header = _parse_header(raw[:nl], path)
    n_cols = header["n_theta"] + (header["seam"] == "closed")
    count = header["n_phi"] * n_cols * 3
    body = raw[nl + 1:]
    if header["format"] == "binary":
        if len(body) != 8 * count:
            raise SurfaceFormatError(f"{path}: binary block has {len(body)} bytes, "
                                     f"expected {8 * count}")
        data = np.frombuffer(body, dtype="<f8").copy()
    else:
        rows = [r for r in csv.reader(body.decode("utf-8").splitlines()) if r]
        try:
            data = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
        except ValueError as exc:
            raise SurfaceFormatError(f"{path}: bad CSV value ({exc})") from None
        if data.ndim != 2 or data.shape[1] != 3 or data.size != count:
            raise SurfaceFormatError(f"{path}: CSV block has {len(rows)} rows of "
                                     f"{data.shape[1] if data.ndim == 2 else '?'} values, "
                                     f"expected {count // 3} rows of 3")
    return header, data.reshape(header["n_phi"], n_cols, 3)


def load_surface(path, normalize: bool = False, pole_tol: float | None = None):
    """Read and validate a grid file; returns ``(grid, f, header)``.

    Seam and pole violations raise :class:`GridError` with row/column
    indices.  ``normalize`` rescales to unit surface area.
    """
    header, data = read_surface_file(path)
    grid = build_grid(header["n_theta"], header["n_phi"])
    closing = None
    if header["seam"] == "closed":
        closing, data = data[:, -1], data[:, :-1]
    try:
        f = check_surface(grid, torch.as_tensor(data, dtype=DTYPE), pole_tol, closing)
    except GridError as exc:
        raise GridError(f"{path}: {exc}") from None
    if normalize:
        f = normalize_area(grid, f)
    return grid, f, header


def save_surface(path, f, units: str = "1", fmt: str = "binary", seam: str = "open"):
    """Write ``f`` (``(n_phi, n_theta, 3)``) in the grid format."""
    if fmt not in FORMATS:
        raise ValueError(f"fmt must be one of {FORMATS}, got {fmt!r}")
    if seam not in ("open", "closed"):
        raise ValueError(f"seam must be 'open' or 'closed', got {seam!r}")
    a = as_tensor(f).detach().numpy()
    if a.ndim != 3 or a.shape[-1] != 3:
        raise GridError(f"expected a surface of shape (n_phi, n_theta, 3), got {a.shape}")
    header = {"n_theta": a.shape[1], "n_phi": a.shape[0], "units": units,
              "format": fmt, "seam": seam}
    if seam == "closed":
        a = np.concatenate([a, a[:, :1]], axis=1)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        if fmt == "binary":
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
        else:
            fh.write("".join("%.17g,%.17g,%.17g\n" % tuple(p)
                             for p in a.reshape(-1, 3)).encode("utf-8"))
    return path


def normalize_area(grid: SphericalGrid, f):
    """Scale ``f`` about its centroid so that its surface area is 1."""
    f = as_tensor(f)
    A = float(area(grid, f))
    if not A > 0:
        raise GridError("surface has zero area; cannot normalize")
    c = f.reshape(-1, 3).mean(dim=0)
    return c + (f - c) / math.sqrt(A)


# ---------------------------------------------------------------------------
# OBJ meshes

def mesh_faces(n_phi: int, n_theta: int) -> np.ndarray:
    """Triangles (0-based) of the grid mesh: split quads plus a fan at each pole.

    Vertices are the grid points in row-major order followed by the north
    and south pole; orientation follows ``d_phi x d_theta``.
    """
    idx = np.arange(n_phi * n_theta).reshape(n_phi, n_theta)
    nxt = np.roll(idx, -1, axis=1)
    a, b, c, d = idx[:-1], idx[1:], nxt[:-1], nxt[1:]
    quads = np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3),
                            np.stack([b, d, c], -1).reshape(-1, 3)])
    north, south = n_phi * n_theta, n_phi * n_theta + 1
    nf = np.stack([np.full(n_theta, north), idx[0], nxt[0]], -1)
    sf = np.stack([np.full(n_theta, south), nxt[-1], idx[-1]], -1)
    return np.concatenate([nf, quads, sf])


def mesh_vertices(f) -> np.ndarray:
    f = as_tensor(f).detach()
    north, south = pole_points(f)
    return np.concatenate([f.reshape(-1, 3).numpy(), north[None].numpy(), south[None].numpy()])


def euler_characteristic(n_vertices: int, faces) -> int:
    faces = np.asarray(faces)
    edges = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    n_edges = len(np.unique(edges, axis=0))
    return n_vertices - n_edges + len(faces)


def write_obj(path, f):
    verts = mesh_vertices(f)
    faces = mesh_faces(*as_tensor(f).shape[:2])
    with open(path, "w") as fh:
        fh.writelines("v %.17g %.17g %.17g\n" % tuple(v) for v in verts)
        fh.writelines("f %d %d %d\n" % tuple(t + 1) for t in faces)
    return Path(path)


def read_obj(path):
    """Minimal reader for meshes written by :func:`write_obj`: ``(vertices, faces)``, 0-based."""
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(v) for v in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(v.split("/")[0]) - 1 for v in parts[1:4]])
    return np.array(verts), np.array(faces, dtype=int)


# ---------------------------------------------------------------------------
# run configuration

@dataclass
class RunConfig:
    weights: tuple = (0.0, 0.5, 1.0, 0.0)
    n_theta: int | None = None     # None: taken from the input files
    n_phi: int | None = None
    deg: int = 5
    deg_bar: int = 5
    T: int = 5
    N: int = 3
    mode: str = "param"
    derivative: str = "forward"
    interior: str = "original"
    safety: float = 0.9
    init: str = "none"
    multires: bool = False
    normalize: str = "unit_area"   # or "none"
    optimizer: dict = field(default_factory=dict)
    output_dir: str | None = None
    inputs: dict | None = None     # input file paths, recorded in snapshots

    def validate(self):
        if len(self.weights) != 4:
            raise ValueError(f"weights must have 4 entries, got {len(self.weights)}")
        w = MetricWeights(*self.weights)
        if self.mode not in MATCH_MODES:
            raise ValueError(f"mode must be one of {MATCH_MODES}, got {self.mode!r}")
        if self.normalize not in ("unit_area", "none"):
            raise ValueError(f"normalize must be 'unit_area' or 'none', got {self.normalize!r}")
        for key in ("n_theta", "n_phi"):
            v = getattr(self, key)
            if v is not None and (not isinstance(v, int) or v < 3):
                raise ValueError(f"{key} must be an integer >= 3, got {v!r}")
        self.match_config(w).validate()
        return self

    def match_config(self, weights: MetricWeights | None = None) -> MatchConfig:
        return MatchConfig(weights=weights or MetricWeights(*self.weights), T=self.T,
                           deg=self.deg, deg_bar=self.deg_bar, N=self.N, mode=self.mode,
                           derivative=self.derivative, interior=self.interior,
                           safety=self.safety, init=self.init, multires=self.multires,
                           optimizer=OptimizeConfig.from_dict(self.optimizer))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = list(self.weights)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ValueError(f"unknown run-config keys: {unknown}")
        d = dict(d)
        if "weights" in d:
            d["weights"] = tuple(float(v) for v in d["weights"])
        return cls(**d).validate()

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(d)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")
        return Path(path)


# ---------------------------------------------------------------------------
# geodesic archives

@dataclass
class GeodesicArchive:
    directory: Path
    frames: list
    trace: Path
    config: Path
    summary: Path
    distance: float
    version: str


def trace_rows(result: MatchResult):
    """One row per optimizer iteration over all solves of a match."""
    rows = []
    for k, rep in enumerate(result.reports):
        for e in rep.trace[1:]:
            rows.append((k, e.iteration, e.value, e.grad_norm, e.step))
    return rows


def export_geodesic(result: MatchResult, directory,
                    run_config: RunConfig | None = None) -> GeodesicArchive:
    """Write ``T + 1`` OBJ frames, the energy trace, the config snapshot and a summary."""
    from . import __version__

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    samples = result.geodesic.surfaces().detach()
    frames = []
    for i, f in enumerate(samples):
        frames.append(write_obj(out / f"frame_{i:03d}.obj", f))
    trace = out / "trace.csv"
    with open(trace, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["solve", "iteration", "energy", "grad_norm", "step"])
        wr.writerows((k, i, repr(v), repr(g), repr(s)) for k, i, v, g, s in trace_rows(result))
    cfg = out / "config.json"
    if run_config is not None:
        cfg.write_text(run_config.to_json() + "\n")
    else:
        cfg.write_text(json.dumps(_match_config_dict(result.config), indent=2,
                                  sort_keys=True) + "\n")
    summary = out / "summary.json"
    summary.write_text(json.dumps({
        "distance": result.distance, "energy": result.energy,
        "frames": len(frames), "converged": result.converged,
        "iterations": result.iterations, "rotation": list(map(float, result.rotation)),
        "version": __version__}, indent=2) + "\n")
    return GeodesicArchive(out, frames, trace, cfg, summary, result.distance, __version__)


def _match_config_dict(cfg: MatchConfig | None) -> dict:
    if cfg is None:
        return {}
    d = asdict(cfg)
    d["weights"] = list(cfg.weights.astuple())
    return d


def save_samples(directory, samples, units: str = "1"):
    """Write each surface of a path as a grid file; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    return [save_surface(Path(directory) / f"frame_{i:03d}.grid", f, units)
            for i, f in enumerate(as_tensor(samples))]
