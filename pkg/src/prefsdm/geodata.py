"""Point datasets, covariate rasters and grid-cell bookkeeping.

Coordinates are easting/northing in 10-km units. Cells are half-open
``[x0 + c*w, x0 + (c+1)*w)`` along each axis, except that points on the far
outer edge of the region belong to the last row/column so that the whole
closed bounding box is covered. Cell index is ``row * n_cols + col`` with rows
running along y.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateCovariateError,
    OutOfRegionError,
    ParseError,
    ValidationError,
)


class Location(NamedTuple):
    x: float
    y: float


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridSpec:
    origin: Location
    cell_width: float
    cell_height: float
    n_cols: int
    n_rows: int

    def __post_init__(self):
        object.__setattr__(self, "origin", Location(float(self.origin[0]), float(self.origin[1])))
        if not (np.isfinite(self.origin.x) and np.isfinite(self.origin.y)):
            raise ValidationError("grid origin must be finite")
        if not (self.cell_width > 0 and self.cell_height > 0):
            raise ValidationError("cell sizes must be strictly positive")
        if int(self.n_cols) < 1 or int(self.n_rows) < 1:
            raise ValidationError("grid needs at least one row and one column")
        object.__setattr__(self, "n_cols", int(self.n_cols))
        object.__setattr__(self, "n_rows", int(self.n_rows))

    @classmethod
    def regular(cls, width, height, n_cols, n_rows, origin=(0.0, 0.0)):
        """Grid of ``n_cols x n_rows`` cells tiling ``[origin, origin + (width, height)]``."""
        return cls(Location(*origin), width / n_cols, height / n_rows, n_cols, n_rows)

    @property
    def n_cells(self) -> int:
        return self.n_cols * self.n_rows

    @property
    def bounds(self):
        x0, y0 = self.origin
        return x0, y0, x0 + self.n_cols * self.cell_width, y0 + self.n_rows * self.cell_height

    @property
    def area(self) -> float:
        return self.n_cells * self.cell_width * self.cell_height

    def cell_areas(self) -> np.ndarray:
        return np.full(self.n_cells, self.cell_width * self.cell_height)

    def row_col(self, cell):
        cell = np.asarray(cell)
        return cell // self.n_cols, cell % self.n_cols

    def index(self, row, col):
        return np.asarray(row) * self.n_cols + np.asarray(col)

    def centroids(self) -> np.ndarray:
        rows, cols = self.row_col(np.arange(self.n_cells))
        x0, y0 = self.origin
        return np.column_stack([x0 + (cols + 0.5) * self.cell_width,
                                y0 + (rows + 0.5) * self.cell_height])

    def contains(self, coords) -> np.ndarray:
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        x0, y0, x1, y1 = self.bounds
        x, y = coords[:, 0], coords[:, 1]
        return np.isfinite(x) & np.isfinite(y) & (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)


def cell_of(loc, grid: GridSpec):
    """Index of the cell containing ``loc``; accepts one location or an (n, 2) array."""
    arr = np.asarray(loc, dtype=float)
    single = arr.ndim == 1
    coords = np.atleast_2d(arr)
    inside = grid.contains(coords)
    if not inside.all():
        bad = coords[~inside][0]
        raise OutOfRegionError(f"location ({bad[0]}, {bad[1]}) lies outside the grid")
    x0, y0 = grid.origin
    col = np.floor((coords[:, 0] - x0) / grid.cell_width).astype(np.int64)
    row = np.floor((coords[:, 1] - y0) / grid.cell_height).astype(np.int64)
    col = np.clip(col, 0, grid.n_cols - 1)
    row = np.clip(row, 0, grid.n_rows - 1)
    cells = row * grid.n_cols + col
    return int(cells[0]) if single else cells


@dataclass(frozen=True)
class CovariateRaster:
    grid: GridSpec
    names: tuple
    values: np.ndarray
    standardization_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1 and len(self.names) <= 1 and values.size == self.grid.n_cells:
            values = values.reshape(-1, len(self.names))
        if values.size == 0:
            values = values.reshape(self.grid.n_cells, 0)
        if values.shape != (self.grid.n_cells, len(self.names)):
            raise ValidationError(
                f"raster values have shape {values.shape}, expected "
                f"({self.grid.n_cells}, {len(self.names)})")
        if not np.isfinite(values).all():
            raise ValidationError("every cell needs a complete, finite covariate vector")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def empty(cls, grid):
        """Raster with no covariates (intercept-only models)."""
        return cls(grid, (), np.zeros((grid.n_cells, 0)))

    @property
    def n_covariates(self) -> int:
        return len(self.names)

    def design(self, cells=None) -> np.ndarray:
        """Intercept column followed by covariates, for all cells or the given ones."""
        vals = self.values if cells is None else self.values[np.asarray(cells)]
        return np.column_stack([np.ones(len(vals)), vals])

    def select(self, names):
        idx = [self.names.index(n) for n in names]
        stats = {n: self.standardization_stats[n] for n in names if n in self.standardization_stats}
        return CovariateRaster(self.grid, tuple(names), self.values[:, idx], stats)


def standardize_covariates(raster: CovariateRaster) -> CovariateRaster:
    """Center and scale every column with the sample (n - 1) standard deviation.

    The (mean, sd) pair of each column is stored in ``standardization_stats``
    so the original scale can be recovered as ``value * sd + mean``.
    """
    vals = raster.values
    out = np.empty_like(vals)
    stats = {}
    for j, name in enumerate(raster.names):
        col = vals[:, j]
        mean = col.mean()
        sd = col.std(ddof=1) if len(col) > 1 else 0.0
        if not sd > 0:
            raise DegenerateCovariateError(name)
        out[:, j] = (col - mean) / sd
        stats[name] = (float(mean), float(sd))
    return CovariateRaster(raster.grid, raster.names, out, stats)


@dataclass(frozen=True)
class PresenceAbsenceDataset:
    ids: tuple
    coords: np.ndarray
    y: np.ndarray
    species_tag: str = ""

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        y = np.asarray(self.y).astype(np.int8).reshape(-1)
        ids = tuple(str(i) for i in self.ids)
        if not (len(ids) == len(coords) == len(y)):
            raise ValidationError("ids, coords and responses must have equal length")
        if len(set(ids)) != len(ids):
            raise ValidationError("site ids must be unique")
        if not np.isin(y, (0, 1)).all():
            raise ValidationError("responses must be 0 or 1")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "coords", _frozen(coords))
        object.__setattr__(self, "y", _frozen(y, np.int8))

    def __len__(self):
        return len(self.ids)

    def subset(self, index):
        index = np.asarray(index, dtype=np.int64)
        return PresenceAbsenceDataset(tuple(self.ids[i] for i in index), self.coords[index],
                                      self.y[index], self.species_tag)


@dataclass(frozen=True)
class PresenceOnlyDataset:
    coords: np.ndarray
    species_tag: str = ""

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "coords", _frozen(coords))

    def __len__(self):
        return len(self.coords)


@dataclass(frozen=True)
class DegradationLayers:
    """Per-cell availability ``u``, conditional sampling probability ``p`` and ``q = u * p``."""

    u: np.ndarray
    p: np.ndarray
    q: np.ndarray = field(init=False)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if u.shape != p.shape:
            raise ValidationError("u and p must have one entry per cell")
        if not (np.all((u >= 0) & (u <= 1)) and np.all((p >= 0) & (p <= 1))):
            raise ValidationError("u and p must lie in [0, 1]")
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "p", _frozen(p))
        object.__setattr__(self, "q", _frozen(u * p))

    @classmethod
    def ones(cls, n_cells):
        return cls(np.ones(n_cells), np.ones(n_cells))

    @classmethod
    def from_uq(cls, u, q):
        u = np.asarray(u, dtype=float)
        q = np.asarray(q, dtype=float)
        if np.any(q > u):
            raise ValidationError("q cannot exceed u")
        p = np.divide(q, u, out=np.zeros_like(q), where=u > 0)
        return cls(u, np.clip(p, 0.0, 1.0))

    @classmethod
    def from_effort(cls, po_counts, u=None):
        """Sampling effort: p_i = 1 where any presence-only point was seen, else 0.

        ``po_counts`` are per-cell counts pooled over whatever species define
        the effort surface; ``u`` defaults to full availability.
        """
        po_counts = np.asarray(po_counts)
        u = np.ones(len(po_counts)) if u is None else u
        return cls(u, (po_counts > 0).astype(float))

    def __len__(self):
        return len(self.u)


class IngestReport(NamedTuple):
    n_read: int
    n_outside: int
    n_duplicate: int

    @property
    def n_dropped(self):
        return self.n_outside + self.n_duplicate


def ingest_points(rows, region: GridSpec, kind=None, species_tag="", unit_scale=1.0):
    """Parse ``id,x,y[,y01]`` records into a validated dataset.

    ``rows`` is an iterable of text lines (header first) or a single string.
    With ``kind=None`` the presence of a fourth column decides between
    presence/absence and presence-only. Coordinates are multiplied by
    ``unit_scale`` (e.g. 0.1 to turn km into 10-km units). Points outside the
    region and duplicated points (same coordinates, or a repeated id) are
    dropped and counted in the returned :class:`IngestReport`.
    """
    if isinstance(rows, str):
        rows = io.StringIO(rows)
    reader = csv.reader(rows)
    header = None
    ids, xs, ys, resp = [], [], [], []
    for lineno, rec in enumerate(reader, start=1):
        if not rec or all(not f.strip() for f in rec):
            continue
        if header is None:
            header = [h.strip() for h in rec]
            if len(header) not in (3, 4):
                raise ParseError(f"expected columns id,x,y[,y01], got {header}", lineno)
            if kind is None:
                kind = "pa" if len(header) == 4 else "po"
            if kind == "pa" and len(header) != 4:
                raise ParseError("presence/absence file needs a response column", lineno)
            continue
        if len(rec) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(rec)}", lineno)
        try:
            x = float(rec[1]) * unit_scale
            y = float(rec[2]) * unit_scale
        except ValueError:
            raise ParseError(f"non-numeric coordinate in {rec}", lineno) from None
        ids.append(rec[0].strip())
        xs.append(x)
        ys.append(y)
        if kind == "pa":
            token = rec[3].strip()
            try:
                val = float(token)
            except ValueError:
                raise ParseError(f"non-numeric response {token!r}", lineno) from None
            if val not in (0.0, 1.0):
                raise ValidationError(f"line {lineno}: response {token!r} is not 0 or 1")
            resp.append(int(val))
    if kind is None:
        kind = "po"
    coords = np.column_stack([xs, ys]) if xs else np.zeros((0, 2))
    inside = region.contains(coords) if len(coords) else np.zeros(0, bool)
    keep = []
    seen_xy, seen_id = set(), set()
    n_dup = 0
    for i in np.flatnonzero(inside):
        key = (coords[i, 0], coords[i, 1])
        if key in seen_xy or ids[i] in seen_id:
            n_dup += 1
            continue
        seen_xy.add(key)
        seen_id.add(ids[i])
        keep.append(i)
    keep = np.asarray(keep, dtype=np.int64)
    report = IngestReport(len(coords), int((~inside).sum()), n_dup)
    if kind == "pa":
        ds = PresenceAbsenceDataset(tuple(ids[i] for i in keep), coords[keep],
                                    np.asarray(resp, dtype=np.int8)[keep] if len(keep) else [],
                                    species_tag)
    else:
        ds = PresenceOnlyDataset(coords[keep], species_tag)
    return ds, report


class CellCounts(NamedTuple):
    counts: np.ndarray
    n_empty: int


def counts_per_cell(points, grid: GridSpec) -> CellCounts:
    coords = getattr(points, "coords", points)
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    cells = cell_of(coords, grid) if len(coords) else np.zeros(0, np.int64)
    counts = np.bincount(cells, minlength=grid.n_cells).astype(np.int64)
    return CellCounts(counts, int((counts == 0).sum()))


def block_average(values, cells=None, areas=None) -> float:
    """Area-weighted mean of per-cell values over the cell set ``cells``.

    For a 0/1 realization this is the proportion of the block where the
    indicator is one; for a probability surface it is the expected value of
    that proportion.
    """
    values = np.asarray(values, dtype=float)
    if cells is not None:
        cells = np.asarray(cells, dtype=np.int64)
        values = values[cells]
        if areas is not None:
            areas = np.asarray(areas, dtype=float)[cells]
    if values.size == 0:
        raise ValidationError("block average over an empty set of cells")
    if areas is None:
        return float(values.mean())
    areas = np.asarray(areas, dtype=float)
    return float(np.dot(areas, values) / areas.sum())


# ---- file formats ---------------------------------------------------------

def _fmt(v):
    return repr(float(v))


def read_points(path, region, kind=None, species_tag="", unit_scale=1.0):
    with open(path, newline="", encoding="utf-8") as fh:
        return ingest_points(fh, region, kind=kind, species_tag=species_tag, unit_scale=unit_scale)


def write_points(path, dataset):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(dataset, PresenceAbsenceDataset):
            w.writerow(["id", "x", "y", "y01"])
            for i, (x, y), r in zip(dataset.ids, dataset.coords, dataset.y):
                w.writerow([i, _fmt(x), _fmt(y), int(r)])
        else:
            w.writerow(["id", "x", "y"])
            for i, (x, y) in enumerate(dataset.coords):
                w.writerow([f"po{i}", _fmt(x), _fmt(y)])


def write_raster(path, raster: CovariateRaster):
    grid = raster.grid
    cent = grid.centroids()
    rows, cols = grid.row_col(np.arange(grid.n_cells))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "row", "col", "cx", "cy", *raster.names])
        for c in range(grid.n_cells):
            w.writerow([c, int(rows[c]), int(cols[c]), _fmt(cent[c, 0]), _fmt(cent[c, 1]),
                        *(_fmt(v) for v in raster.values[c])])


def read_raster(path) -> CovariateRaster:
    """Read a ``cell,row,col,cx,cy,<names...>`` file; the grid is inferred from the centroids."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:5]] != ["cell", "row", "col", "cx", "cy"]:
            raise ParseError("raster header must start with cell,row,col,cx,cy", 1)
        names = tuple(h.strip() for h in header[5:])
        recs = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(rec)}", lineno)
            try:
                recs.append([float(v) for v in rec])
            except ValueError:
                raise ParseError(f"non-numeric field in {rec}", lineno) from None
    arr = np.asarray(recs, dtype=float).reshape(-1, len(header))
    rows = arr[:, 1].astype(np.int64)
    cols = arr[:, 2].astype(np.int64)
    n_rows, n_cols = rows.max() + 1, cols.max() + 1
    if len(arr) != n_rows * n_cols:
        raise ValidationError("raster does not cover a complete rectangular grid")
    ux = np.unique(arr[:, 3])
    uy = np.unique(arr[:, 4])
    w = (ux[-1] - ux[0]) / (n_cols - 1) if n_cols > 1 else None
    h = (uy[-1] - uy[0]) / (n_rows - 1) if n_rows > 1 else None
    w = w if w is not None else (h if h is not None else 1.0)
    h = h if h is not None else w
    grid = GridSpec(Location(ux[0] - w / 2, uy[0] - h / 2), w, h, n_cols, n_rows)
    order = np.argsort(grid.index(rows, cols), kind="stable")
    return CovariateRaster(grid, names, arr[order, 5:])


def write_degradation(path, layers: DegradationLayers):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "u", "p"])
        for c in range(len(layers)):
            w.writerow([c, _fmt(layers.u[c]), _fmt(layers.p[c])])


def read_degradation(path, n_cells=None) -> DegradationLayers:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["cell", "u", "p"]:
            raise ParseError("degradation header must be cell,u,p", 1)
        cells, u, p = [], [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                cells.append(int(rec[0]))
                u.append(float(rec[1]))
                p.append(float(rec[2]))
            except (ValueError, IndexError):
                raise ParseError(f"bad degradation record {rec}", lineno) from None
    n = n_cells if n_cells is not None else (max(cells) + 1 if cells else 0)
    uu, pp = np.ones(n), np.ones(n)
    uu[cells] = u
    pp[cells] = p
    return DegradationLayers(uu, pp)


def file_digest(path) -> str:
    import hashlib
    h = hashlib.sha256()
    with open(os.fspath(path), "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
