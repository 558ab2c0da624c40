"""Uniform planar arrays: steering vectors, beamwidths, and beam codebooks.

Angle convention used throughout the package: ``theta`` is the polar angle
measured from the array broadside (the normal of the element plane) and
``phi`` is the azimuth inside the element plane, so the unit direction in the
array frame is ``(sin(theta)cos(phi), sin(theta)sin(phi), cos(theta))``.
A codebook field of view is a rectangle ``(el_min, el_max, az_min, az_max)``
in these coordinates; the front hemisphere is ``(0, pi/2, -pi, pi)``.

Codebooks are tiled ring by ring: rows of constant ``theta`` spaced by the
local elevation 3 dB beamwidth, each row filled in azimuth with beams spaced
by the local azimuth 3 dB beamwidth.  Beamwidths come from the actual array
pattern via bisection on the -3 dB crossing, not from a closed form.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# Bisection tolerance for -3 dB crossings (radians).
_WIDTH_TOL = 1e-4
# Beams whose 3 dB width exceeds the search domain report this sentinel.
_UNBOUNDED = math.inf


class CodebookError(ValueError):
    """Raised for invalid codebook construction requests."""


@dataclass(frozen=True)
class ArrayConfig:
    """Geometry of a uniform planar array.

    ``n_x``/``n_y`` are element counts along the in-plane axes, ``d_x``/``d_y``
    the element spacings in meters, ``wavelength`` the carrier wavelength.
    """

    n_x: int
    n_y: int
    d_x: float
    d_y: float
    wavelength: float

    def __post_init__(self) -> None:
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("element counts must be >= 1")
        if self.d_x <= 0 or self.d_y <= 0 or self.wavelength <= 0:
            raise ValueError("spacings and wavelength must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_x * self.n_y

    @classmethod
    def half_wavelength(cls, n_x: int, n_y: int, carrier_hz: float = 60e9) -> "ArrayConfig":
        """Square-lattice array with half-wavelength spacing at ``carrier_hz``."""
        lam = SPEED_OF_LIGHT / carrier_hz
        return cls(n_x=n_x, n_y=n_y, d_x=lam / 2, d_y=lam / 2, wavelength=lam)

    def to_dict(self) -> dict:
        return {
            "n_x": self.n_x,
            "n_y": self.n_y,
            "d_x": self.d_x,
            "d_y": self.d_y,
            "wavelength": self.wavelength,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayConfig":
        return cls(n_x=int(d["n_x"]), n_y=int(d["n_y"]), d_x=float(d["d_x"]),
                   d_y=float(d["d_y"]), wavelength=float(d["wavelength"]))


def steering_vector(cfg: ArrayConfig, theta: float, phi: float) -> np.ndarray:
    """Unit-norm steering vector at polar angle ``theta``, azimuth ``phi``.

    Element ordering is y-major: the entry for grid position ``(m, n)`` with
    ``m`` along y and ``n`` along x sits at flat index ``m * n_x + n`` and
    equals ``exp(j(m*Omega_y + n*Omega_x)) / sqrt(n_elements)``.
    """
    return steering_matrix(cfg, np.asarray([theta]), np.asarray([phi]))[0]


def steering_matrix(cfg: ArrayConfig, thetas: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """Stack of steering vectors, shape ``(len(thetas), n_elements)``."""
    thetas = np.asarray(thetas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    k = 2 * np.pi / cfg.wavelength
    sin_t = np.sin(thetas)
    omega_y = k * cfg.d_y * sin_t * np.sin(phis)
    omega_x = k * cfg.d_x * sin_t * np.cos(phis)
    m = np.arange(cfg.n_y)
    n = np.arange(cfg.n_x)
    phase = (omega_y[:, None, None] * m[None, :, None]
             + omega_x[:, None, None] * n[None, None, :])
    vecs = np.exp(1j * phase).reshape(len(thetas), cfg.n_elements)
    return vecs / math.sqrt(cfg.n_elements)


def array_gain(cfg: ArrayConfig, weights: np.ndarray, theta, phi) -> np.ndarray:
    """Normalized power gain ``|w^H a(theta, phi)|^2`` (1.0 when matched)."""
    a = steering_matrix(cfg, np.atleast_1d(theta), np.atleast_1d(phi))
    g = np.abs(a @ np.conj(weights)) ** 2
    return g if np.ndim(theta) else float(g[0])


def ula_beamwidth(n_elements: int) -> float:
    """Broadside 3 dB beamwidth (rad) of a square half-wavelength array.

    Rule of thumb: a side of the square array acts as a uniform linear array
    of ``sqrt(n_elements)`` elements, whose half-power width is
    ``0.886 * 2 / sqrt(n_elements)``.
    """
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    return 0.886 * 2.0 / math.sqrt(n_elements)


def _cut_gain(cfg: ArrayConfig, weights: np.ndarray, theta0: float, phi0: float,
              offset: float, axis: str) -> float:
    """Pattern gain along the elevation or azimuth cut through the mainlobe.

    The elevation cut continues smoothly through the broadside pole:
    ``(theta < 0)`` maps to ``(-theta, phi + pi)``.
    """
    if axis == "el":
        theta = theta0 + offset
        phi = phi0
        if theta < 0:
            theta, phi = -theta, phi + np.pi
        elif theta > np.pi:
            theta, phi = 2 * np.pi - theta, phi + np.pi
    else:
        theta, phi = theta0, phi0 + offset
    return array_gain(cfg, weights, theta, phi)


def _half_width(cfg: ArrayConfig, weights: np.ndarray, theta0: float, phi0: float,
                axis: str, sign: float, guess: float) -> float:
    """Distance from the mainlobe to the -3 dB crossing on one side."""
    limit = np.pi
    lo = 0.0
    hi = max(guess / 6.0, 1e-3)
    while _cut_gain(cfg, weights, theta0, phi0, sign * hi, axis) > 0.5:
        lo = hi
        hi *= 1.4
        if hi >= limit:
            if _cut_gain(cfg, weights, theta0, phi0, sign * limit, axis) > 0.5:
                return _UNBOUNDED
            hi = limit
            break
    while hi - lo > _WIDTH_TOL:
        mid = 0.5 * (lo + hi)
        if _cut_gain(cfg, weights, theta0, phi0, sign * mid, axis) > 0.5:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def beamwidth(cfg: ArrayConfig, theta0: float, phi0: float, axis: str) -> float:
    """Numeric 3 dB beamwidth of the conjugate-matched beam at a direction.

    ``axis`` is ``"el"`` (polar cut) or ``"az"`` (azimuth cut).  Returns
    ``inf`` when the pattern never drops 3 dB within the cut domain (e.g. the
    azimuth cut of a broadside beam, or any cut of a single-element array).
    """
    w = steering_vector(cfg, theta0, phi0)
    guess = ula_beamwidth(max(cfg.n_elements, 1))
    down = _half_width(cfg, w, theta0, phi0, axis, -1.0, guess)
    up = _half_width(cfg, w, theta0, phi0, axis, +1.0, guess)
    return down + up


@dataclass
class Codebook:
    """A set of unit-norm beamforming weight vectors on a 3 dB-spaced grid.

    ``beams`` has shape ``(n_beams, n_elements)``; ``directions`` holds the
    per-beam mainlobe ``(theta, phi)`` and ``half_power_beamwidths`` the
    per-beam ``(elevation, azimuth)`` 3 dB widths, both in radians.  Beams are
    ordered row-major by (elevation ring, azimuth index), which fixes the
    beam-pair numbering across runs.
    """

    config: ArrayConfig
    beams: np.ndarray
    directions: np.ndarray
    half_power_beamwidths: np.ndarray

    @property
    def n_beams(self) -> int:
        return self.beams.shape[0]

    @property
    def content_hash(self) -> str:
        payload = self._payload()
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("ascii")).hexdigest()[:16]

    def _payload(self) -> dict:
        interleaved = np.empty((self.n_beams, 2 * self.config.n_elements))
        interleaved[:, 0::2] = self.beams.real
        interleaved[:, 1::2] = self.beams.imag
        # Unbounded widths (degenerate cuts) serialize as null.
        widths = [[w if math.isfinite(w) else None for w in row]
                  for row in self.half_power_beamwidths.tolist()]
        return {
            "array": self.config.to_dict(),
            "directions": self.directions.tolist(),
            "half_power_beamwidths": widths,
            "weights": interleaved.tolist(),
        }

    def to_dict(self) -> dict:
        d = self._payload()
        d["content_hash"] = self.content_hash
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Codebook":
        cfg = ArrayConfig.from_dict(d["array"])
        weights = np.asarray(d["weights"], dtype=float)
        beams = weights[:, 0::2] + 1j * weights[:, 1::2]
        widths = np.asarray(
            [[math.inf if w is None else w for w in row]
             for row in d["half_power_beamwidths"]], dtype=float)
        book = cls(
            config=cfg,
            beams=beams,
            directions=np.asarray(d["directions"], dtype=float),
            half_power_beamwidths=widths,
        )
        stored = d.get("content_hash")
        if stored is not None and stored != book.content_hash:
            raise CodebookError("codebook content hash mismatch")
        return book

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path) -> "Codebook":
        with open(path, "r", encoding="ascii") as f:
            return cls.from_dict(json.load(f))


# Lattice pitch as a multiple of the 3 dB beamwidth.  Mainlobes of adjacent
# beams sit one beamwidth apart (up to this factor); the triangular row
# packing keeps the deepest quantization dip near the floor achievable for
# grids built from matched steering vectors at this density.
_SPACING = 1.05


def build_codebook(cfg: ArrayConfig,
                   field_of_view: tuple[float, float, float, float]) -> Codebook:
    """Tile a field of view with beams separated by their 3 dB beamwidths.

    ``field_of_view`` is ``(el_min, el_max, az_min, az_max)``: a polar-angle
    band times an azimuth arc, restricted to the front hemisphere
    (``el_max <= pi/2``; the rear pattern of an ideal planar array mirrors
    the front one, so rear beams would duplicate front beams).

    For half-wavelength arrays the beam footprint is shift invariant in sine
    space ``(u, v) = (sin(el)cos(az), sin(el)sin(az))``, so the grid is a
    triangular lattice there, scaled per axis by the numerically measured
    broadside 3 dB widths; rows run along ``u`` and alternate rows are offset
    by half a pitch.  Beam weights are the steering vectors of the grid
    directions, so the matched array gain at each mainlobe is exactly 1.
    """
    el_min, el_max, az_min, az_max = (float(v) for v in field_of_view)
    if not (0.0 <= el_min <= el_max <= np.pi / 2 + 1e-12):
        raise CodebookError("elevation range must satisfy 0 <= el_min <= el_max <= pi/2")
    if el_max <= el_min and az_max <= az_min:
        raise CodebookError("empty field of view")
    if az_max <= az_min:
        raise CodebookError("empty azimuth span")
    az_span = min(az_max - az_min, 2 * np.pi)
    full_circle = az_span >= 2 * np.pi - 1e-9
    az_mid = az_min + az_span / 2

    # Numeric footprint half-axes in sine space, measured once at broadside
    # (the elevation cut at phi=0 sweeps u, at phi=pi/2 it sweeps v).
    w_u = beamwidth(cfg, 0.0, 0.0, "el")
    w_v = beamwidth(cfg, 0.0, np.pi / 2, "el")
    r_max = math.sin(el_max)
    r_min = math.sin(el_min)

    if not (math.isfinite(w_u) and math.isfinite(w_v)):
        # No angular resolution along one axis (single row/column or single
        # element): fall back to at most a one-dimensional grid.
        directions = _degenerate_grid(cfg, w_u, w_v, el_min, el_max, az_min,
                                      az_max, az_span, az_mid)
    else:
        # Elevation rows are circles of constant radius in sine space, where
        # the footprint does not vary.  Radial pitch carries the sqrt(3)/2
        # row compression of a triangular packing; each row is filled at one
        # beamwidth of arc, alternate rows offset by half a step.  The
        # outermost row sits exactly on sin(el_max) so the field-of-view rim
        # has mainlobes on it.
        w = min(w_u, w_v)
        pitch_r = _SPACING * w * math.sqrt(3) / 2
        radii: list[float] = []
        pole = False
        if r_min <= 1e-12:
            pole = True
            start = pitch_r
        else:
            radii.append(r_min)
            start = r_min + pitch_r
        k = 0
        while start + k * pitch_r <= r_max - 0.45 * pitch_r:
            radii.append(start + k * pitch_r)
            k += 1
        if r_max > (radii[-1] if radii else 0.0) + 1e-9 and r_max > 0.3 * pitch_r:
            radii.append(r_max)

        directions = []
        if pole:
            directions.append((0.0 if el_min <= 0 else el_min, az_mid))
        for row, r in enumerate(radii):
            arc = az_span * r
            n_az = max(1, int(math.ceil(arc / (_SPACING * w))))
            step = az_span / n_az
            stagger = 0.5 * step if row % 2 else 0.0
            for i in range(n_az):
                phi = az_min + (i + 0.5) * step + (stagger if full_circle else 0.0)
                if phi > np.pi:
                    phi -= 2 * np.pi
                directions.append((math.asin(min(r, 1.0)), phi))
        if not directions:
            directions.append(((el_min + el_max) / 2, az_mid))

    dirs = np.asarray(directions, dtype=float)
    beams = steering_matrix(cfg, dirs[:, 0], dirs[:, 1])
    widths = np.asarray(
        [[beamwidth(cfg, t, p, "el"), beamwidth(cfg, t, p, "az")] for t, p in directions],
        dtype=float,
    )
    return Codebook(config=cfg, beams=beams, directions=dirs,
                    half_power_beamwidths=widths)


def _in_arc(phi: float, lo: float, hi: float) -> bool:
    return (phi - lo) % (2 * np.pi) <= (hi - lo) + 1e-12


def _degenerate_grid(cfg, w_u, w_v, el_min, el_max, az_min, az_max, az_span,
                     az_mid) -> list[tuple[float, float]]:
    """Grid for arrays without 2-D angular resolution (single row or element)."""
    if not math.isfinite(w_u) and not math.isfinite(w_v):
        return [((el_min + el_max) / 2, az_mid)]
    # One resolved axis: tile it, pointing the unresolved axis at phi = 0/pi
    # (u axis resolved) or +-pi/2 (v axis resolved).
    w_fin = w_u if math.isfinite(w_u) else w_v
    along_u = math.isfinite(w_u)
    r_max, r_min = math.sin(el_max), math.sin(el_min)
    out: list[tuple[float, float]] = []
    n = int(math.floor(r_max / (_SPACING * w_fin)))
    for j in range(-n, n + 1):
        r = abs(j) * _SPACING * w_fin
        if r > r_max + 1e-12 or r < r_min - 1e-12:
            continue
        if j == 0:
            out.append((el_min if el_min > 0 else 0.0, az_mid))
            continue
        phi = (0.0 if j > 0 else np.pi) if along_u else (np.pi / 2 if j > 0 else -np.pi / 2)
        if _in_arc(phi, az_min, az_max):
            out.append((math.asin(min(r, 1.0)), phi))
    return out or [((el_min + el_max) / 2, az_mid)]


FRONT_HEMISPHERE = (0.0, np.pi / 2, -np.pi, np.pi)


def pair_codebook_hash(rx: Codebook, tx: Codebook) -> str:
    """Joint identity of an (rx, tx) codebook pair, used to guard databases."""
    return hashlib.sha256(
        f"{rx.content_hash}:{tx.content_hash}".encode("ascii")
    ).hexdigest()[:16]
