"""Plain-text radio maps: gain layers in dB on a regular grid.

Format::

    # catp-radiomap 1
    origin <x0> <y0>
    spacing <h>
    shape <ny> <nx>
    units dB
    layers <name1> <name2> ...
    layer <name1>
    <nx values of row 0>
    ...
    layer <name2>
    ...

Rows run along increasing y, columns along increasing x. Values are
written with ``repr`` so a file round-trips bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fields import Grid2D

MAGIC = "# catp-radiomap 1"


class RadioMapFormatError(ValueError):
    pass


@dataclass
class RadioMap:
    grid: Grid2D
    layers: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, values in self.layers.items():
            arr = np.asarray(values, dtype=float)
            if arr.shape != self.grid.shape:
                raise ValueError(f"layer {name!r} has shape {arr.shape}, grid is {self.grid.shape}")
            if any(ch.isspace() for ch in name) or not name:
                raise ValueError(f"layer names must be non-empty and contain no whitespace: {name!r}")
            self.layers[name] = arr

    def gain_db(self, points, layer: str):
        return self.grid.bilinear(self.layers[layer], points)

    def write(self, path):
        g = self.grid
        lines = [
            MAGIC,
            f"origin {g.origin[0]!r} {g.origin[1]!r}",
            f"spacing {g.spacing!r}",
            f"shape {g.shape[0]} {g.shape[1]}",
            "units dB",
            "layers " + " ".join(self.layers),
        ]
        for name, values in self.layers.items():
            lines.append(f"layer {name}")
            lines.extend(" ".join(repr(float(v)) for v in row) for row in values)
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path) -> "RadioMap":
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0].strip() != MAGIC:
            raise RadioMapFormatError(f"{path}: missing '{MAGIC}' header")
        header = {}
        i = 1
        while i < len(lines) and not lines[i].startswith("layer "):
            key, _, rest = lines[i].partition(" ")
            header[key] = rest.split()
            i += 1
        try:
            origin = tuple(float(v) for v in header["origin"])
            spacing = float(header["spacing"][0])
            ny, nx = (int(v) for v in header["shape"])
            names = header["layers"]
        except (KeyError, ValueError, IndexError) as exc:
            raise RadioMapFormatError(f"{path}: malformed header ({exc})") from exc
        if header.get("units") != ["dB"]:
            raise RadioMapFormatError(f"{path}: only dB units are supported")
        layers = {}
        for name in names:
            if i >= len(lines) or lines[i] != f"layer {name}":
                raise RadioMapFormatError(f"{path}: expected 'layer {name}' at line {i + 1}")
            rows = lines[i + 1 : i + 1 + ny]
            if len(rows) != ny:
                raise RadioMapFormatError(f"{path}: layer {name} is truncated")
            values = np.array([[float(v) for v in row.split()] for row in rows])
            if values.shape != (ny, nx):
                raise RadioMapFormatError(f"{path}: layer {name} has shape {values.shape}, expected {(ny, nx)}")
            layers[name] = values
            i += 1 + ny
        return cls(Grid2D(origin, spacing, (ny, nx)), layers)


@dataclass
class RadioMapChannel:
    """Deterministic channel read from a radio-map layer (e.g. an external ray-tracing result)."""

    radio_map: RadioMap
    layer: str

    fading_kind = "none"
    rician_k = 0.0

    def large_scale_db(self, p, q):
        return self.radio_map.gain_db(p, self.layer)

    def large_scale_amplitude(self, p, q):
        return 10.0 ** (self.large_scale_db(p, q) / 20.0)

    def mean_power_gain(self, p, q):
        return self.large_scale_amplitude(p, q) ** 2

    def mean_gain_db(self, p, q):
        return self.large_scale_db(p, q)

    def realization_db(self, p, q, t=0.0):
        return self.large_scale_db(p, q)

    def gain(self, p, q, t=0.0):
        return self.large_scale_amplitude(p, q).astype(complex)
