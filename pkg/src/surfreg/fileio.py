"""OBJ meshes, CSV iteration logs and JSON run configuration."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from surfreg.errors import InvalidInputError, ObjParseError

LOG_COLUMNS = ("iter", "e_fit", "e_rigid", "e_arap", "e_plane", "e_total", "step_rot", "step_trans", "rmsd")


@dataclass
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if len(self.normals) != len(self.vertices):
                raise InvalidInputError("normals must be per vertex")
        if len(self.faces):
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise InvalidInputError("face index out of range")
            f = self.faces
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
                raise InvalidInputError("degenerate face with repeated vertex")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def with_vertices(self, vertices: np.ndarray, normals: Optional[np.ndarray] = None) -> Mesh:
        return Mesh(np.array(vertices, dtype=float), self.faces.copy(), normals)


def _floats(parts: list[str], line_no: int, what: str) -> list[float]:
    if len(parts) < 3:
        raise ObjParseError(line_no, f"{what} needs 3 coordinates")
    try:
        vals = [float(p) for p in parts[:3]]
    except ValueError:
        raise ObjParseError(line_no, f"malformed number in {what}") from None
    if not all(math.isfinite(v) for v in vals):
        raise ObjParseError(line_no, f"non-finite coordinate in {what}")
    return vals


def parse_obj(text: str) -> Mesh:
    """Parse the v / vn / f subset of Wavefront OBJ.

    Face entries may carry /t/n suffixes (only the vertex index is used),
    negative indices count back from the last vertex defined so far, and
    polygons are fan-triangulated. Anything else is skipped.
    """
    verts: list[list[float]] = []
    normals: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    face_lines: list[int] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "v":
            verts.append(_floats(parts[1:], line_no, "vertex"))
        elif tag == "vn":
            normals.append(_floats(parts[1:], line_no, "normal"))
        elif tag == "f":
            if len(parts) < 4:
                raise ObjParseError(line_no, "face needs at least 3 vertices")
            idx = []
            for tok in parts[1:]:
                head = tok.split("/", 1)[0]
                try:
                    k = int(head)
                except ValueError:
                    raise ObjParseError(line_no, f"malformed face index {tok!r}") from None
                if k == 0:
                    raise ObjParseError(line_no, "face index 0 is invalid")
                idx.append(k - 1 if k > 0 else len(verts) + k)
            for j in range(1, len(idx) - 1):
                faces.append((idx[0], idx[j], idx[j + 1]))
                face_lines.append(line_no)
    n = len(verts)
    for (a, b, c), line_no in zip(faces, face_lines):
        if min(a, b, c) < 0 or max(a, b, c) >= n:
            raise ObjParseError(line_no, "face index out of range")
        if a == b or b == c or a == c:
            raise ObjParseError(line_no, "degenerate face with repeated vertex")
    vn = None
    if normals and len(normals) == n:
        vn = np.array(normals, dtype=float)
    return Mesh(np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3), vn)


def write_obj(mesh: Mesh) -> str:
    """Serialize with shortest round-trip floats, so parse_obj(write_obj(m)) == m."""
    out = io.StringIO()
    out.write(f"# {mesh.n_vertices} vertices, {len(mesh.faces)} faces\n")
    for x, y, z in mesh.vertices.tolist():
        out.write(f"v {x!r} {y!r} {z!r}\n")
    if mesh.normals is not None:
        for x, y, z in mesh.normals.tolist():
            out.write(f"vn {x!r} {y!r} {z!r}\n")
        for a, b, c in (mesh.faces + 1).tolist():
            out.write(f"f {a}//{a} {b}//{b} {c}//{c}\n")
    else:
        for a, b, c in (mesh.faces + 1).tolist():
            out.write(f"f {a} {b} {c}\n")
    return out.getvalue()


def read_obj(path) -> Mesh:
    with open(path, encoding="utf-8", errors="replace") as fh:
        return parse_obj(fh.read())


def write_iteration_log(reports) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(LOG_COLUMNS)
    for rep in reports:
        e = rep.energies
        writer.writerow(
            [
                rep.iter,
                *(repr(float(v)) for v in (e.e_fit, e.e_rigid, e.e_arap, e.e_plane, e.e_total)),
                repr(float(rep.step_rot_norm)),
                repr(float(rep.step_trans_norm)),
                repr(float(rep.rmsd_to_projection)),
            ]
        )
    return out.getvalue()


def parse_iteration_log(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [{k: (int(v) if k == "iter" else float(v)) for k, v in row.items()} for row in rows]


@dataclass
class RunConfig:
    mode: str = "rigid"
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    w4: float = 0.0
    tikhonov: float = 1e-6
    max_iters: Optional[int] = None
    stop_tol: float = 1e-6
    seed: int = 0
    source: Optional[str] = None
    target: Optional[str] = None
    output: Optional[str] = None
    log: Optional[str] = None

    def __post_init__(self):
        if self.mode not in ("rigid", "arap"):
            raise InvalidInputError(f"mode must be 'rigid' or 'arap', got {self.mode!r}")
        if self.max_iters is None:
            self.max_iters = 50 if self.mode == "rigid" else 100

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        data = json.loads(text)
        if not isinstance(data, dict):
            raise InvalidInputError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)
