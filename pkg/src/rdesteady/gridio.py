"""Grid files, graymap heatmaps, peak detection and JSON summaries."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridParseError
from .randeq import DensityGrid2D, GridSpec2D

_HEADER_KEYS = ("x_min", "x_max", "y_min", "y_max", "nx", "ny", "normalized")


def write_grid_csv(g: DensityGrid2D, path, meta: dict | None = None):
    """Write ``g`` as comment header plus ``ny`` rows (y increasing) of ``nx`` values.

    Values use ``%.17g`` so a read gives back the same doubles.  ``meta`` is
    written as one ``# meta: {json}`` line after the header.
    """
    s = g.spec
    lines = [
        f"# x_min={s.x_min!r} x_max={s.x_max!r} y_min={s.y_min!r} y_max={s.y_max!r} "
        f"nx={s.nx} ny={s.ny} normalized={'true' if g.normalized else 'false'}"
    ]
    merged = dict(g.meta, **(meta or {}))
    if merged:
        lines.append("# meta: " + json.dumps(merged, sort_keys=True, default=_jsonable))
    for row in g.values:
        lines.append(",".join("%.17g" % v for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid_csv(path) -> DensityGrid2D:
    """Inverse of :func:`write_grid_csv`; malformed input raises :class:`GridParseError`."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise GridParseError("missing grid header", 1)
    fields = {}
    for tok in text[0][1:].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise GridParseError(f"bad header token {tok!r}", 1)
        fields[key] = val
    missing = [k for k in _HEADER_KEYS if k not in fields]
    if missing:
        raise GridParseError(f"header lacks {', '.join(missing)}", 1)
    try:
        spec = GridSpec2D(float(fields["x_min"]), float(fields["x_max"]),
                          float(fields["y_min"]), float(fields["y_max"]),
                          int(fields["nx"]), int(fields["ny"]))
    except ValueError as exc:
        raise GridParseError(f"invalid header: {exc}", 1) from None
    if fields["normalized"] not in ("true", "false"):
        raise GridParseError(f"normalized must be true or false, got {fields['normalized']!r}", 1)

    meta = {}
    values = np.empty(spec.shape)
    row = 0
    for lineno, line in enumerate(text[1:], start=2):
        if line.startswith("#"):
            if line.startswith("# meta: "):
                try:
                    meta.update(json.loads(line[len("# meta: "):]))
                except json.JSONDecodeError as exc:
                    raise GridParseError(f"bad meta line: {exc}", lineno) from None
            continue
        if not line.strip():
            continue
        if row >= spec.ny:
            raise GridParseError(f"more than ny={spec.ny} data rows", lineno)
        parts = line.split(",")
        if len(parts) != spec.nx:
            raise GridParseError(f"expected {spec.nx} columns, found {len(parts)}", lineno)
        try:
            values[row] = [float(p) for p in parts]
        except ValueError as exc:
            raise GridParseError(str(exc), lineno) from None
        row += 1
    if row != spec.ny:
        raise GridParseError(f"expected {spec.ny} data rows, found {row}", len(text))
    try:
        return DensityGrid2D(spec, values, fields["normalized"] == "true", meta)
    except ValueError as exc:
        raise GridParseError(str(exc), len(text)) from None


def heatmap_pixels(values, gamma=0.5):
    """8-bit pixels, top image row = last grid row."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    v = np.asarray(values, dtype=float)
    vmax = float(v.max()) if v.size else 0.0
    if not vmax > 0:
        warnings.warn("grid maximum is zero; writing an all-black image", RuntimeWarning,
                      stacklevel=3)
        return np.zeros(v.shape, dtype=np.uint8)
    pix = np.rint(255.0 * np.clip(v / vmax, 0.0, 1.0) ** gamma)
    return np.flipud(pix).astype(np.uint8)


def write_heatmap_pgm(g: DensityGrid2D, path, gamma: float = 0.5):
    """Binary portable graymap (P5, maxval 255), ``nx`` wide and ``ny`` high."""
    pix = heatmap_pixels(g.values, gamma)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (g.spec.nx, g.spec.ny))
        fh.write(np.ascontiguousarray(pix).tobytes())


def read_pgm(path):
    """Pixels of a P5 graymap written by :func:`write_heatmap_pgm`."""
    data = Path(path).read_bytes()
    magic, dims, maxval, rest = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError("not an 8-bit P5 graymap")
    w, h = (int(t) for t in dims.split())
    return np.frombuffer(rest, dtype=np.uint8, count=w * h).reshape(h, w)


@dataclass
class PeakList:
    peaks: list = field(default_factory=list)
    threshold_fraction: float = 0.05
    merge_radius: int = 3

    def __len__(self):
        return len(self.peaks)

    def as_dicts(self):
        return [{"x": x, "y": y, "density": d} for x, y, d in self.peaks]


def find_peaks(g: DensityGrid2D, threshold_fraction: float = 0.05, merge_radius: int = 3,
               window: GridSpec2D | None = None) -> PeakList:
    """Strict local maxima over the 8-neighbourhood above ``threshold_fraction * max``.

    Candidates are visited by descending value; one closer than
    ``merge_radius`` cells (Chebyshev) to an already kept peak is dropped.
    ``window``, if given, restricts both the candidates and the reference
    maximum to cells whose centers fall inside it.
    """
    if not 0 < threshold_fraction < 1:
        raise ValueError("threshold_fraction must lie in (0, 1)")
    v = g.values
    ny, nx = v.shape
    inside = np.ones(v.shape, dtype=bool)
    if window is not None:
        xc, yc = g.spec.x_centers, g.spec.y_centers
        inside = (((yc >= window.y_min) & (yc <= window.y_max))[:, None]
                  & ((xc >= window.x_min) & (xc <= window.x_max))[None, :])
    if not inside.any():
        return PeakList([], threshold_fraction, merge_radius)
    vmax = float(v[inside].max())
    if not vmax > 0:
        return PeakList([], threshold_fraction, merge_radius)

    pad = np.pad(v, 1, mode="constant", constant_values=-np.inf)
    strict = np.ones(v.shape, dtype=bool)
    for dj in (-1, 0, 1):
        for di in (-1, 0, 1):
            if dj or di:
                strict &= v > pad[1 + dj:1 + dj + ny, 1 + di:1 + di + nx]
    cand = np.argwhere(strict & inside & (v >= threshold_fraction * vmax))
    # descending value, ties broken by row-major position
    order = sorted(range(len(cand)), key=lambda n: (-v[tuple(cand[n])], tuple(cand[n])))
    kept = []
    for n in order:
        j, i = cand[n]
        if all(max(abs(int(j) - a), abs(int(i) - b)) >= merge_radius for a, b in kept):
            kept.append((int(j), int(i)))
    xc, yc = g.spec.x_centers, g.spec.y_centers
    peaks = [(float(xc[i]), float(yc[j]), float(v[j, i])) for j, i in kept]
    return PeakList(peaks, threshold_fraction, merge_radius)


def build_summary(scenario, seed, n_samples, noise_stds, peaks=None, kappa_probes=None,
                  verification=None, **extra):
    """Summary record; keys beyond the fixed schema go under ``extra``."""
    out = {
        "scenario": scenario,
        "seed": int(seed),
        "n_samples": int(n_samples),
        "noise_stds": [float(s) for s in noise_stds],
        "peaks": peaks.as_dicts() if isinstance(peaks, PeakList) else list(peaks or []),
        "kappa_probes": list(kappa_probes or []),
        "verification": dict(verification or {}),
    }
    if extra:
        out["extra"] = extra
    return out


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and not math.isfinite(o):
        return None
    raise TypeError(f"cannot serialize {type(o).__name__}")
