"""Synthetic 3DBall data and multi-view dataset files.

3DBall draws three overlapping clouds in 3-D space (each a blend of an
isotropic Gaussian and a uniform solid ball) and keeps the xy, yz and xz
projections as three 2-D views.

On disk a multi-view dataset is a JSON manifest pointing at one delimited
numeric file per view and an optional label file::

    {
      "name": "hayes",
      "views": ["view1.csv", "view2.csv"],
      "labels": "labels.csv",
      "delimiter": ",",
      "has_header": false
    }

Relative paths are resolved against the manifest's directory. View files
hold one object per row; the label file holds one 1-based integer per row.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .clustering import MultiViewDataset
from .powerset import Frame, meta_centers

__all__ = [
    "BallSpec",
    "DatasetManifest",
    "DatasetError",
    "MissingFileError",
    "RaggedRowError",
    "NonNumericError",
    "RowCountMismatchError",
    "generate_3dball",
    "standardize",
    "load_manifest",
    "write_dataset",
    "describe",
    "overlap_region",
    "view_overlap",
]

DEFAULT_BALL_CONFIG = "3dball_v1.json"


def _default_config() -> dict:
    return json.loads(resources.files("mvlrecm").joinpath("data").joinpath(DEFAULT_BALL_CONFIG).read_text())


@dataclass(frozen=True)
class BallSpec:
    """Parameters of the 3DBall generator.

    Per-cluster arrays have one entry per cluster. ``mix`` is the fraction
    of each cluster drawn from the Gaussian; the rest is uniform in a ball.
    """

    n_per_cluster: tuple = (500, 500, 500)
    centers: tuple = ()
    gaussian_sd: tuple = ()
    ball_radius: tuple = ()
    mix: float = 0.5
    seed: int = 0

    def __post_init__(self):
        k = len(self.n_per_cluster)
        for name in ("centers", "gaussian_sd", "ball_radius"):
            if len(getattr(self, name)) != k:
                raise ValueError(f"{name} needs {k} entries, got {len(getattr(self, name))}")
        if any(len(c) != 3 for c in self.centers):
            raise ValueError("centers must be points in 3-D")
        if any(n < 0 for n in self.n_per_cluster):
            raise ValueError("cluster sizes must be non-negative")
        if not 0.0 <= self.mix <= 1.0:
            raise ValueError(f"mix must be in [0, 1], got {self.mix}")
        if any(s < 0 for s in self.gaussian_sd) or any(r < 0 for r in self.ball_radius):
            raise ValueError("spreads must be non-negative")

    @classmethod
    def default(cls, seed: int = 0, **overrides) -> "BallSpec":
        """The packaged default geometry (``data/3dball_v1.json``)."""
        cfg = _default_config()
        kw = dict(
            n_per_cluster=tuple(cfg["n_per_cluster"]),
            centers=tuple(tuple(c) for c in cfg["centers"]),
            gaussian_sd=tuple(cfg["gaussian_sd"]),
            ball_radius=tuple(cfg["ball_radius"]),
            mix=cfg["mix"],
            seed=seed,
        )
        kw.update(overrides)
        return cls(**kw)

    @classmethod
    def from_dict(cls, d: dict) -> "BallSpec":
        base = asdict(cls.default())
        base.update(d)
        base["n_per_cluster"] = tuple(base["n_per_cluster"])
        base["centers"] = tuple(tuple(c) for c in base["centers"])
        base["gaussian_sd"] = tuple(base["gaussian_sd"])
        base["ball_radius"] = tuple(base["ball_radius"])
        return cls(**base)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_per_cluster"] = list(self.n_per_cluster)
        d["centers"] = [list(c) for c in self.centers]
        d["gaussian_sd"] = list(self.gaussian_sd)
        d["ball_radius"] = list(self.ball_radius)
        return d

    @property
    def n_objects(self) -> int:
        return int(sum(self.n_per_cluster))


VIEW_AXES = ((0, 1), (1, 2), (0, 2))


def _uniform_ball(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    direction = rng.standard_normal((n, 3))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = radius * rng.random((n, 1)) ** (1.0 / 3.0)
    return direction / norms * r


def generate_3dball(spec: Optional[BallSpec] = None, return_points: bool = False):
    """Draw a 3DBall dataset.

    Objects are ordered by cluster; within a cluster the Gaussian draws come
    first. Labels are 1-based.

    Returns
    -------
    MultiViewDataset
        Three 2-column views (xy, yz, xz) with labels.
    points : (N, 3) array
        Only when ``return_points`` is true.
    """
    spec = spec or BallSpec.default()
    rng = np.random.default_rng(spec.seed)
    chunks, labels = [], []
    for k, n in enumerate(spec.n_per_cluster):
        n_gauss = int(round(spec.mix * n))
        center = np.asarray(spec.centers[k], dtype=float)
        g = center + spec.gaussian_sd[k] * rng.standard_normal((n_gauss, 3))
        u = center + _uniform_ball(rng, n - n_gauss, spec.ball_radius[k])
        chunks.append(np.vstack([g, u]))
        labels.append(np.full(n, k + 1))
    points = np.vstack(chunks)
    views = [points[:, list(ax)].copy() for ax in VIEW_AXES]
    data = MultiViewDataset(views, np.concatenate(labels), name="3dball")
    return (data, points) if return_points else data


def overlap_region(points, centers) -> np.ndarray:
    """Objects closer to some two-cluster meta-center than to every cluster center."""
    points = np.asarray(points, dtype=float)
    centers = np.asarray(centers, dtype=float)
    frame = Frame(centers.shape[0])
    card = frame.cardinalities()[1:]
    d = np.linalg.norm(points[:, None, :] - meta_centers(frame, centers)[None], axis=2)
    return d[:, card == 2].min(axis=1) < d[:, card == 1].min(axis=1)


def view_overlap(data: MultiViewDataset, spec: BallSpec, weights=None) -> np.ndarray:
    """Overlap regions of a 3DBall dataset as seen through its views.

    An object counts as overlapping when it lies in the overlap region
    (see :func:`overlap_region`, with the projected true centers) of views
    holding at least half of the total view weight. Uniform weights by
    default, i.e. a majority of views.
    """
    centers = np.asarray(spec.centers, dtype=float)
    per_view = np.array(
        [overlap_region(X, centers[:, list(ax)]) for X, ax in zip(data.views, VIEW_AXES)], dtype=float
    )
    w = np.full(len(per_view), 1.0 / len(per_view)) if weights is None else np.asarray(weights, dtype=float)
    return w @ per_view >= 0.5 * w.sum()


def standardize(data: MultiViewDataset) -> MultiViewDataset:
    """Z-score every feature of every view; constant features become 0."""
    views = []
    for X in data.views:
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        safe = np.where(sd > 0, sd, 1.0)
        Z = (X - mu) / safe
        Z[:, sd == 0] = 0.0
        views.append(Z)
    return MultiViewDataset(views, data.labels, name=data.name)


def describe(data: MultiViewDataset) -> dict:
    """Summary in the shape of a dataset table row: N, Q, C and each D_q."""
    return {
        "name": data.name,
        "N": data.n_objects,
        "Q": data.n_views,
        "C": data.n_classes,
        "D": list(data.dims),
    }


# ---------------------------------------------------------------------------
# files


class DatasetError(ValueError):
    """Problem reading a dataset from disk."""


class MissingFileError(DatasetError):
    pass


class RaggedRowError(DatasetError):
    pass


class NonNumericError(DatasetError):
    pass


class RowCountMismatchError(DatasetError):
    pass


@dataclass(frozen=True)
class DatasetManifest:
    view_files: tuple
    label_file: Optional[str] = None
    delimiter: str = ","
    has_header: bool = False
    name: str = ""
    base_dir: Path = field(default=Path("."), compare=False)

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        path = Path(path)
        if not path.is_file():
            raise MissingFileError(f"{path}: manifest not found")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{exc.lineno}: invalid manifest JSON ({exc.msg})") from None
        if not isinstance(raw, dict) or not raw.get("views"):
            raise DatasetError(f"{path}: manifest must be an object with a non-empty 'views' list")
        return cls(
            view_files=tuple(raw["views"]),
            label_file=raw.get("labels"),
            delimiter=raw.get("delimiter", ","),
            has_header=bool(raw.get("has_header", False)),
            name=raw.get("name", path.stem),
            base_dir=path.parent,
        )

    def resolve(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def _read_table(path: Path, delimiter: str, has_header: bool) -> np.ndarray:
    if not path.is_file():
        raise MissingFileError(f"{path}: file not found")
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if has_header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise RaggedRowError(f"{path}:{lineno}: expected {width} fields, found {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise NonNumericError(f"{path}:{lineno}: non-numeric value {bad!r}") from None
    return np.array(rows, dtype=float).reshape(len(rows), width or 0)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_manifest(path) -> MultiViewDataset:
    """Read the views (and labels, if listed) named by a manifest file."""
    man = DatasetManifest.read(path)
    views, files = [], []
    for vf in man.view_files:
        p = man.resolve(vf)
        views.append(_read_table(p, man.delimiter, man.has_header))
        files.append(p)
    counts = [X.shape[0] for X in views]
    if len(set(counts)) > 1:
        detail = ", ".join(f"{f} has {n} rows" for f, n in zip(files, counts))
        raise RowCountMismatchError(f"views disagree on the number of objects: {detail}")
    labels = None
    if man.label_file:
        lp = man.resolve(man.label_file)
        lab = _read_table(lp, man.delimiter, man.has_header)
        if lab.shape[1] != 1:
            raise RaggedRowError(f"{lp}: label file must have one column, found {lab.shape[1]}")
        if lab.shape[0] != counts[0]:
            raise RowCountMismatchError(
                f"{lp} has {lab.shape[0]} rows but {files[0]} has {counts[0]}"
            )
        if np.any(lab != np.round(lab)) or np.any(lab < 1):
            raise DatasetError(f"{lp}: labels must be integers >= 1")
        labels = lab[:, 0].astype(np.int64)
    return MultiViewDataset(views, labels, name=man.name)


def write_dataset(data: MultiViewDataset, directory, name: Optional[str] = None) -> Path:
    """Write views, labels and a manifest; returns the manifest path.

    Values are written with 17 significant digits so reloading is exact.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    view_files = []
    for q, X in enumerate(data.views, start=1):
        fn = f"view{q}.csv"
        np.savetxt(directory / fn, X, delimiter=",", fmt="%.17g")
        view_files.append(fn)
    manifest = {"name": name or data.name or "dataset", "views": view_files, "delimiter": ",", "has_header": False}
    if data.labels is not None:
        np.savetxt(directory / "labels.csv", data.labels, fmt="%d")
        manifest["labels"] = "labels.csv"
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path
