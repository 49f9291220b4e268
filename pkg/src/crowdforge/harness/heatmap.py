"""Heat-map accumulation and export, plus age-band filtering of run outputs."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Optional

import numpy as np

from ..citygen.city import SemanticCity
from ..errors import InputError
from ..kernels import accumulate_heatmap
from ..population import Population


@dataclass
class HeatmapGrid:
    """Per-cell counts of agent samples; row 0 is the southernmost row of cells."""

    cell_size: float
    origin: tuple
    width: int
    height: int
    counts: np.ndarray
    outside: int = 0

    @classmethod
    def empty(cls, origin, width: int, height: int, cell_size: float) -> "HeatmapGrid":
        if cell_size <= 0 or width <= 0 or height <= 0:
            raise InputError("heat-map needs a positive cell size and grid dimensions")
        return cls(float(cell_size), (float(origin[0]), float(origin[1])), int(width), int(height),
                   np.zeros((int(height), int(width)), dtype=np.int64))

    @classmethod
    def for_city(cls, city: SemanticCity, cell_size: float = 2.0) -> "HeatmapGrid":
        w, h = city.extent
        return cls.empty((0.0, 0.0), int(np.ceil(w / cell_size)) + 1, int(np.ceil(h / cell_size)) + 1, cell_size)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def record(self, xy: np.ndarray) -> None:
        xy = np.asarray(xy, float).reshape(-1, 2)
        inside = accumulate_heatmap(self.counts, xy[:, 0], xy[:, 1], self.origin[0], self.origin[1], self.cell_size)
        self.outside += len(xy) - inside

    def sampler(self, keep: Optional[np.ndarray] = None):
        """Simulation sampler callback; ``keep`` is a boolean mask over person ids."""
        def fn(tick, time, pids, xy, states, kinds):
            if keep is not None:
                xy = xy[keep[pids]]
            self.record(xy)
        return fn

    def csv_text(self, header: Optional[dict] = None) -> str:
        lines = []
        if header is not None:
            lines.append("# " + json.dumps(header, sort_keys=True))
        lines.append("row,col,count")
        rows, cols = np.nonzero(self.counts)
        for r, c in zip(rows, cols):
            lines.append(f"{r},{c},{self.counts[r, c]}")
        return "\n".join(lines) + "\n"

    def pgm_bytes(self, header: Optional[dict] = None) -> bytes:
        """16-bit binary PGM scaled linearly so the busiest cell is white; north is up."""
        top = int(self.counts.max()) if self.counts.size else 0
        if top > 0:
            img = np.rint(self.counts.astype(np.float64) * (65535.0 / top)).astype(">u2")
        else:
            img = np.zeros(self.counts.shape, dtype=">u2")
        img = img[::-1]
        head = "P5\n"
        if header is not None:
            head += "# " + json.dumps(header, sort_keys=True) + "\n"
        head += f"{self.width} {self.height}\n65535\n"
        return head.encode("ascii") + img.tobytes()

    def save_csv(self, path: str, header: Optional[dict] = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.csv_text(header))

    def save_pgm(self, path: str, header: Optional[dict] = None) -> None:
        with open(path, "wb") as fh:
            fh.write(self.pgm_bytes(header))


def read_pgm(data: bytes) -> np.ndarray:
    """Parse a binary 16-bit PGM written by :meth:`HeatmapGrid.pgm_bytes` (rows north to south)."""
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end].decode("ascii"))
        pos = end
    pos += 1
    if fields[0] != "P5":
        raise InputError("not a binary PGM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(data[pos:], dtype=dtype, count=w * h).reshape(h, w)


def read_trajectories(fh: IO[str]) -> tuple[Optional[dict], list[dict]]:
    header, records = None, []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if "header" in rec:
            header = rec["header"]
        else:
            records.append(rec)
    return header, records


def age_mask(population: Population, lo: float, hi: float) -> np.ndarray:
    """Boolean mask over person ids for ages in [lo, hi)."""
    return np.array([lo <= p.age < hi for p in population.persons], dtype=bool)


def filter_by_age(records: Iterable[dict], population: Population, lo: float, hi: float) -> list[dict]:
    keep = age_mask(population, lo, hi)
    return [r for r in records if keep[r["personId"]]]


def heatmap_from_records(records: Iterable[dict], grid: HeatmapGrid) -> HeatmapGrid:
    xy = np.array([[r["x"], r["y"]] for r in records], dtype=float).reshape(-1, 2)
    grid.record(xy)
    return grid
