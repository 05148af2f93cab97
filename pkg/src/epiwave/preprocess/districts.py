"""Point-to-district assignment.

Two maps are provided: a rectangular grid for desk-scale data, and a
polygon map for real boundaries. Both load from a JSON description.
"""
import json
from pathlib import Path

import numpy as np


class GridDistrictMap:
    """Rectangular lat/lon grid; each cell belongs to one district.

    ``cells`` lists the district index of every cell in row-major order
    (row 0 at ``lat_min``), so several cells may share a district. Points
    outside the bounding box get -1.
    """

    kind = "grid"

    def __init__(self, lat_min, lat_max, lon_min, lon_max, rows, cols, districts, cells=None):
        self.lat_min, self.lat_max = float(lat_min), float(lat_max)
        self.lon_min, self.lon_max = float(lon_min), float(lon_max)
        self.rows, self.cols = int(rows), int(cols)
        self.districts = [str(d) for d in districts]
        if cells is None:
            cells = [min(c, len(self.districts) - 1) for c in range(self.rows * self.cols)]
        self.cells = np.asarray(cells, dtype=int)
        if self.cells.shape != (self.rows * self.cols,):
            raise ValueError(f"expected {self.rows * self.cols} cell entries, got {self.cells.shape}")
        if set(self.cells.tolist()) != set(range(len(self.districts))):
            raise ValueError("every district needs at least one cell and cells must index districts")

    @property
    def cell_height(self):
        return (self.lat_max - self.lat_min) / self.rows

    @property
    def cell_width(self):
        return (self.lon_max - self.lon_min) / self.cols

    def assign(self, lat, lon):
        lat = np.asarray(lat, dtype=np.float64)
        lon = np.asarray(lon, dtype=np.float64)
        r = np.floor((lat - self.lat_min) / self.cell_height).astype(int)
        c = np.floor((lon - self.lon_min) / self.cell_width).astype(int)
        inside = (r >= 0) & (r < self.rows) & (c >= 0) & (c < self.cols)
        out = np.full(lat.shape, -1, dtype=int)
        out[inside] = self.cells[r[inside] * self.cols + c[inside]]
        return out

    def cell_bounds(self, cell):
        """(lat_lo, lat_hi, lon_lo, lon_hi) of one grid cell."""
        r, c = divmod(int(cell), self.cols)
        lat_lo = self.lat_min + r * self.cell_height
        lon_lo = self.lon_min + c * self.cell_width
        return lat_lo, lat_lo + self.cell_height, lon_lo, lon_lo + self.cell_width

    def to_dict(self):
        return {
            "type": "grid",
            "lat_min": self.lat_min, "lat_max": self.lat_max,
            "lon_min": self.lon_min, "lon_max": self.lon_max,
            "rows": self.rows, "cols": self.cols,
            "districts": self.districts,
            "cells": self.cells.tolist(),
        }


def _points_in_ring(lat, lon, ring):
    """Even-odd ray casting; ``ring`` is a sequence of (lat, lon) vertices."""
    ring = np.asarray(ring, dtype=np.float64)
    y0, x0 = ring[:, 0], ring[:, 1]
    y1, x1 = np.roll(y0, -1), np.roll(x0, -1)
    inside = np.zeros(lat.shape, dtype=bool)
    for a_y, a_x, b_y, b_x in zip(y0, x0, y1, x1):
        crosses = (a_y > lat) != (b_y > lat)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = a_x + (lat - a_y) * (b_x - a_x) / (b_y - a_y)
        inside ^= crosses & (lon < x_at)
    return inside


class PolygonDistrictMap:
    """Districts given as simple polygons of (lat, lon) vertices."""

    kind = "polygons"

    def __init__(self, districts, polygons):
        self.districts = [str(d) for d in districts]
        self.polygons = [np.asarray(p, dtype=np.float64) for p in polygons]
        if len(self.polygons) != len(self.districts):
            raise ValueError("one polygon per district required")

    def assign(self, lat, lon):
        lat = np.asarray(lat, dtype=np.float64)
        lon = np.asarray(lon, dtype=np.float64)
        out = np.full(lat.shape, -1, dtype=int)
        for k, ring in enumerate(self.polygons):
            hit = (out < 0) & _points_in_ring(lat, lon, ring)
            out[hit] = k
        return out

    def to_dict(self):
        return {"type": "polygons", "districts": self.districts,
                "polygons": [p.tolist() for p in self.polygons]}


def district_map_from_dict(d: dict):
    kind = d.get("type", "grid")
    if kind == "grid":
        return GridDistrictMap(d["lat_min"], d["lat_max"], d["lon_min"], d["lon_max"],
                               d["rows"], d["cols"], d["districts"], d.get("cells"))
    if kind == "polygons":
        return PolygonDistrictMap(d["districts"], d["polygons"])
    raise ValueError(f"unknown district map type {kind!r}")


def load_district_map(path):
    return district_map_from_dict(json.loads(Path(path).read_text()))


def save_district_map(dmap, path):
    Path(path).write_text(json.dumps(dmap.to_dict(), indent=1))
