"""Street-canyon scene generation and geometric multipath ray synthesis.

This is the stand-in for a full ray tracer: two building walls and the road
surface reflect via the image method (up to two bounces), vehicles are
axis-aligned metal boxes that block but do not reflect, and per-ray power
follows free-space loss times Fresnel reflection and surface-roughness
factors.  Ray gains carry the 0 dBm / 0 dBi convention: ``|gain|^2`` is the
received power in milliwatts for a 1 mW transmitter with isotropic antennas.

The communicating vehicle (CV) transmits and the roadside unit (RSU)
receives, so ray departure angles are in the CV array frame and arrival
angles in the RSU array frame.  Angles use the package convention (polar from
array broadside, azimuth in the array plane).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .arrays import SPEED_OF_LIGHT

VACUUM_PERMITTIVITY = 8.8541878128e-12


class SceneError(ValueError):
    """Raised when a scene cannot be traced."""


# ---------------------------------------------------------------------------
# Materials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Material:
    """Electromagnetic surface description for reflections."""

    name: str
    rel_permittivity: float
    conductivity: float          # S/m
    roughness_loss_db: float = 0.0  # power loss per bounce

    def __post_init__(self) -> None:
        if self.rel_permittivity < 1 or self.conductivity < 0:
            raise ValueError("invalid material parameters")


def rayleigh_roughness_loss_db(rms_height_m: float, wavelength_m: float,
                               cos_incidence: float = 1.0) -> float:
    """Specular power reduction of a rough surface, Rayleigh criterion.

    Field factor ``exp(-g/2)`` with ``g = (4*pi*sigma_h*cos(theta)/lambda)^2``,
    returned as a positive dB power loss.
    """
    g = (4 * np.pi * rms_height_m * cos_incidence / wavelength_m) ** 2
    return 10 * g / math.log(10)


_LAMBDA_60GHZ = SPEED_OF_LIGHT / 60e9

CONCRETE = Material("concrete", rel_permittivity=5.31, conductivity=0.8967,
                    roughness_loss_db=rayleigh_roughness_loss_db(0.2e-3, _LAMBDA_60GHZ))
ASPHALT = Material("asphalt", rel_permittivity=3.18, conductivity=0.3338,
                   roughness_loss_db=rayleigh_roughness_loss_db(0.34e-3, _LAMBDA_60GHZ))
PERFECT_CONDUCTOR = Material("pec", rel_permittivity=1.0, conductivity=1e9)


def fresnel_tm(material: Material, cos_incidence: float, wavelength: float) -> complex:
    """Vertical (TM) Fresnel reflection coefficient at the given incidence.

    ``cos_incidence`` is measured from the surface normal.  The complex
    permittivity includes the conductivity term at the carrier frequency, so
    the returned coefficient carries the reflection phase.
    """
    freq = SPEED_OF_LIGHT / wavelength
    eta = material.rel_permittivity - 1j * material.conductivity / (
        2 * np.pi * freq * VACUUM_PERMITTIVITY)
    cos_t = complex(cos_incidence)
    root = np.sqrt(eta - (1 - cos_t ** 2))
    return complex((eta * cos_t - root) / (eta * cos_t + root))


# ---------------------------------------------------------------------------
# Scene primitives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mounting:
    """Array orientation: rows of ``rotation`` are the local axes in world
    coordinates, so ``v_local = rotation @ v_world``."""

    rotation: tuple[tuple[float, float, float], ...]

    @classmethod
    def identity(cls) -> "Mounting":
        return cls(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)))

    @classmethod
    def aimed(cls, boresight_world, reference_axis=(1.0, 0.0, 0.0)) -> "Mounting":
        """Mounting whose broadside (local z) points along ``boresight_world``."""
        z = np.asarray(boresight_world, dtype=float)
        nz = np.linalg.norm(z)
        if nz == 0:
            raise ValueError("boresight must be a nonzero vector")
        z = z / nz
        ref = np.asarray(reference_axis, dtype=float)
        x = ref - np.dot(ref, z) * z
        if np.linalg.norm(x) < 1e-9:
            ref = np.array([0.0, 1.0, 0.0])
            x = ref - np.dot(ref, z) * z
        x = x / np.linalg.norm(x)
        y = np.cross(z, x)
        return cls(tuple(tuple(row) for row in (x, y, z)))

    def local_angles(self, v_world) -> tuple[float, float]:
        """(theta, phi) of a world-frame direction in this array's frame."""
        v = np.asarray(v_world, dtype=float)
        v = v / np.linalg.norm(v)
        u = np.asarray(self.rotation) @ v
        theta = math.acos(min(1.0, max(-1.0, u[2])))
        phi = math.atan2(u[1], u[0])
        return theta, phi


@dataclass(frozen=True)
class VehicleBox:
    """Axis-aligned vehicle body: ``dims`` is (width, length, height); the box
    spans ``center_x +- length/2`` along the road and sits on the ground."""

    center_x: float
    center_y: float
    dims: tuple[float, float, float]
    kind: str = "car"
    is_cv: bool = False

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        w, length, h = self.dims
        lo = np.array([self.center_x - length / 2, self.center_y - w / 2, 0.0])
        hi = np.array([self.center_x + length / 2, self.center_y + w / 2, h])
        return lo, hi


@dataclass(frozen=True)
class Wall:
    """Vertical building face, the plane ``y = position``."""

    position: float
    material: Material
    height: float = 30.0


@dataclass
class Scene:
    """One street snapshot: reflectors, vehicle boxes, and the two terminals."""

    walls: tuple[Wall, ...]
    ground: Material | None
    vehicles: list[VehicleBox]
    rsu_pos: np.ndarray | None
    cv_pos: np.ndarray | None
    rsu_mounting: Mounting
    cv_mounting: Mounting
    cv_longitudinal: float = 0.0
    seed: int = 0

    def swapped(self) -> "Scene":
        """Exchange the two terminals (used by reciprocity checks)."""
        return replace(self, rsu_pos=self.cv_pos, cv_pos=self.rsu_pos,
                       rsu_mounting=self.cv_mounting, cv_mounting=self.rsu_mounting)

    def to_dict(self) -> dict:
        return {
            "walls": [(w.position, w.material.name, w.height) for w in self.walls],
            "ground": self.ground.name if self.ground else None,
            "vehicles": [(v.center_x, v.center_y, v.dims, v.kind, v.is_cv)
                         for v in self.vehicles],
            "rsu_pos": None if self.rsu_pos is None else list(self.rsu_pos),
            "cv_pos": None if self.cv_pos is None else list(self.cv_pos),
            "rsu_mounting": self.rsu_mounting.rotation,
            "cv_mounting": self.cv_mounting.rotation,
            "cv_longitudinal": self.cv_longitudinal,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# Traffic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrafficConfig:
    """Vehicle stream statistics: Erlang bumper gaps and a car/truck mix."""

    kappa: int = 6
    mu_zeta: float = 0.209        # 1 / mean gap (1/m)
    car_truck_ratio: tuple[float, float] = (3.0, 2.0)
    car_dims: tuple[float, float, float] = (1.8, 5.0, 1.5)
    truck_dims: tuple[float, float, float] = (2.5, 12.0, 3.8)
    lane_offsets: tuple[float, ...] = (3.5, 7.0)

    def __post_init__(self) -> None:
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.mu_zeta <= 0:
            raise ValueError("mu_zeta must be positive")
        if min(self.car_dims + self.truck_dims) <= 0:
            raise ValueError("vehicle dimensions must be positive")

    @property
    def mean_gap(self) -> float:
        return 1.0 / self.mu_zeta

    @property
    def truck_fraction(self) -> float:
        cars, trucks = self.car_truck_ratio
        return trucks / (cars + trucks)

    @property
    def mean_vehicle_length(self) -> float:
        p = self.truck_fraction
        return (1 - p) * self.car_dims[1] + p * self.truck_dims[1]


def sample_gap(cfg: TrafficConfig, rng: np.random.Generator) -> float:
    """Bumper-to-bumper gap draw: Erlang with shape kappa, mean 1/mu_zeta."""
    return float(rng.gamma(cfg.kappa, 1.0 / (cfg.kappa * cfg.mu_zeta)))


def sample_vehicle(cfg: TrafficConfig, rng: np.random.Generator) -> tuple[str, tuple]:
    """Draw a vehicle type and its dimensions by the car/truck weights."""
    if rng.random() < cfg.truck_fraction:
        return "truck", cfg.truck_dims
    return "car", cfg.car_dims


@dataclass(frozen=True)
class StreetGeometry:
    """Static canyon layout shared by all snapshots."""

    wall_near_y: float = -3.0
    wall_far_y: float = 14.0
    wall_height: float = 30.0
    wall_material: Material = CONCRETE
    ground_material: Material = ASPHALT
    rsu_pos: tuple[float, float, float] = (0.0, -1.0, 7.0)
    cv_lane: int = 1
    cv_antenna_height: float = 1.5
    x_min: float = -20.0
    x_max: float = 60.0
    rsu_aim: tuple[float, float, float] | None = None  # default: the CV bin center


def generate_scene(traffic: TrafficConfig, geometry: StreetGeometry,
                   d0: float, sigma_d: float, rng: np.random.Generator,
                   seed: int = 0) -> Scene:
    """Random snapshot: CV placed uniformly in the location bin, every lane
    filled with an independent Erlang-gap vehicle train.

    The CV is always a car; its own box never blocks its link.  Non-CV lanes
    start from a random phase so snapshots are independent draws.
    """
    if geometry.cv_lane >= len(traffic.lane_offsets):
        raise ValueError("cv_lane is not a configured lane")
    d_l = d0 + rng.uniform(-sigma_d, sigma_d) if sigma_d > 0 else float(d0)

    vehicles: list[VehicleBox] = []
    for lane, lane_y in enumerate(traffic.lane_offsets):
        if lane == geometry.cv_lane:
            car_len = traffic.car_dims[1]
            vehicles.append(VehicleBox(d_l, lane_y, traffic.car_dims, "car", is_cv=True))
            front = d_l + car_len / 2
            while True:
                rear = front + sample_gap(traffic, rng)
                kind, dims = sample_vehicle(traffic, rng)
                if rear > geometry.x_max:
                    break
                vehicles.append(VehicleBox(rear + dims[1] / 2, lane_y, dims, kind))
                front = rear + dims[1]
            rear = d_l - car_len / 2
            while True:
                front = rear - sample_gap(traffic, rng)
                kind, dims = sample_vehicle(traffic, rng)
                if front < geometry.x_min:
                    break
                vehicles.append(VehicleBox(front - dims[1] / 2, lane_y, dims, kind))
                rear = front - dims[1]
        else:
            cursor = geometry.x_min - rng.uniform(
                0.0, traffic.mean_gap + traffic.mean_vehicle_length)
            while cursor < geometry.x_max:
                kind, dims = sample_vehicle(traffic, rng)
                vehicles.append(VehicleBox(cursor + dims[1] / 2, lane_y, dims, kind))
                cursor += dims[1] + sample_gap(traffic, rng)

    cv_pos = np.array([d_l, traffic.lane_offsets[geometry.cv_lane],
                       geometry.cv_antenna_height])
    rsu_pos = np.asarray(geometry.rsu_pos, dtype=float)
    aim = geometry.rsu_aim
    if aim is None:
        aim = (d0, traffic.lane_offsets[geometry.cv_lane], geometry.cv_antenna_height)
    rsu_mounting = Mounting.aimed(np.asarray(aim, dtype=float) - rsu_pos)
    walls = (Wall(geometry.wall_near_y, geometry.wall_material, geometry.wall_height),
             Wall(geometry.wall_far_y, geometry.wall_material, geometry.wall_height))
    return Scene(walls=walls, ground=geometry.ground_material, vehicles=vehicles,
                 rsu_pos=rsu_pos, cv_pos=cv_pos, rsu_mounting=rsu_mounting,
                 cv_mounting=Mounting.identity(), cv_longitudinal=d_l, seed=seed)


# ---------------------------------------------------------------------------
# Rays
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ray:
    """One propagation path: complex amplitude (phase included), delay, and
    the departure/arrival directions in the respective array frames."""

    gain: complex
    delay: float
    aoa: tuple[float, float]
    aod: tuple[float, float]
    bounce_count: int

    @property
    def power(self) -> float:
        return abs(self.gain) ** 2


@dataclass
class ChannelInstance:
    """Ray list of one snapshot, strongest first, plus provenance."""

    rays: list[Ray]
    cv_longitudinal: float
    seed: int
    los_blocked: bool

    def to_json_line(self) -> str:
        return json.dumps({
            "seed": self.seed,
            "d_l": self.cv_longitudinal,
            "los_blocked": self.los_blocked,
            "rays": [[r.gain.real, r.gain.imag, r.delay,
                      r.aoa[0], r.aoa[1], r.aod[0], r.aod[1], r.bounce_count]
                     for r in self.rays],
        })

    @classmethod
    def from_json_line(cls, line: str) -> "ChannelInstance":
        d = json.loads(line)
        rays = [Ray(gain=complex(v[0], v[1]), delay=v[2], aoa=(v[3], v[4]),
                    aod=(v[5], v[6]), bounce_count=int(v[7])) for v in d["rays"]]
        return cls(rays=rays, cv_longitudinal=d["d_l"], seed=int(d["seed"]),
                   los_blocked=bool(d["los_blocked"]))


def save_instances(path, instances) -> None:
    with open(path, "w", encoding="ascii") as f:
        for inst in instances:
            f.write(inst.to_json_line() + "\n")


def load_instances(path) -> list[ChannelInstance]:
    out = []
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(ChannelInstance.from_json_line(line))
    return out


class _Surface:
    """Reflecting plane with mirror and segment-crossing operations."""

    def __init__(self, axis: int, position: float, material: Material,
                 z_range: tuple[float, float] | None = None):
        self.axis = axis          # 1 = wall (y-plane), 2 = ground (z-plane)
        self.position = position
        self.material = material
        self.z_range = z_range

    def mirror(self, p: np.ndarray) -> np.ndarray:
        q = p.copy()
        q[self.axis] = 2 * self.position - q[self.axis]
        return q

    def intersect(self, a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
        da = a[self.axis] - self.position
        db = b[self.axis] - self.position
        if da == db:
            return None
        t = da / (da - db)
        if not 1e-9 < t < 1 - 1e-9:
            return None
        p = a + t * (b - a)
        if self.z_range is not None and not (self.z_range[0] - 1e-9 <= p[2]
                                             <= self.z_range[1] + 1e-9):
            return None
        return p

    def cos_incidence(self, d_unit: np.ndarray) -> float:
        return abs(float(d_unit[self.axis]))


def _segment_hits_box(a: np.ndarray, b: np.ndarray, lo: np.ndarray,
                      hi: np.ndarray) -> bool:
    """Exact segment vs axis-aligned box test (slab method)."""
    d = b - a
    t0, t1 = 0.0, 1.0
    for k in range(3):
        if d[k] == 0.0:
            if a[k] < lo[k] or a[k] > hi[k]:
                return False
            continue
        ta = (lo[k] - a[k]) / d[k]
        tb = (hi[k] - a[k]) / d[k]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return False
    # Clip to the open segment and ignore pure surface grazing.
    return t1 > max(t0, 0.0) + 1e-12 and t0 < 1.0


def _blocked(a: np.ndarray, b: np.ndarray, boxes) -> bool:
    return any(_segment_hits_box(a, b, lo, hi) for lo, hi in boxes)


def _reflection_sequences(surfaces, max_bounces: int):
    yield ()
    if max_bounces >= 1:
        for s in surfaces:
            yield (s,)
    if max_bounces >= 2:
        for s1 in surfaces:
            for s2 in surfaces:
                if s1 is not s2:
                    yield (s1, s2)


def trace_rays(scene: Scene, wavelength: float, max_bounces: int = 2,
               l_p: int = 25) -> ChannelInstance:
    """Enumerate image-method paths CV -> RSU and keep the strongest ``l_p``.

    Candidate paths are reflection sequences over {walls, ground} up to
    ``max_bounces``; any path with a segment intersecting a (non-CV) vehicle
    box is discarded.  Per-path amplitude is free-space loss times the TM
    Fresnel coefficient and a fixed roughness loss per bounce; phase is
    ``-2*pi*length/lambda`` plus the reflection-coefficient phases.
    """
    if scene.rsu_pos is None or scene.cv_pos is None:
        raise SceneError("scene lacks RSU or CV position")
    if max_bounces not in (0, 1, 2):
        raise ValueError("max_bounces must be 0, 1, or 2")
    if l_p < 1:
        raise ValueError("l_p must be >= 1")

    tx = np.asarray(scene.cv_pos, dtype=float)
    rx = np.asarray(scene.rsu_pos, dtype=float)
    surfaces = [_Surface(1, w.position, w.material, (0.0, w.height))
                for w in scene.walls]
    if scene.ground is not None:
        surfaces.append(_Surface(2, 0.0, scene.ground))
    boxes = [v.bounds for v in scene.vehicles if not v.is_cv]

    rays: list[Ray] = []
    los_blocked = False
    for seq in _reflection_sequences(surfaces, max_bounces):
        # Unfold transmitter images along the sequence, then walk back from
        # the receiver to recover the physical reflection points.
        images = [tx]
        for s in seq:
            images.append(s.mirror(images[-1]))
        points = [rx]
        ok = True
        for i in range(len(seq) - 1, -1, -1):
            p = seq[i].intersect(images[i + 1], points[-1])
            if p is None:
                ok = False
                break
            points.append(p)
        if not ok:
            continue
        path = [tx] + points[::-1]          # tx, P_1, ..., P_k, rx
        if any(_blocked(path[i], path[i + 1], boxes) for i in range(len(path) - 1)):
            if not seq:
                los_blocked = True
            continue
        length = float(np.linalg.norm(images[-1] - rx)) if seq else float(
            np.linalg.norm(rx - tx))
        coeff = complex(1.0, 0.0)
        for i, s in enumerate(seq):
            d = path[i + 1] - path[i]
            d = d / np.linalg.norm(d)
            coeff *= fresnel_tm(s.material, s.cos_incidence(d), wavelength)
            coeff *= 10 ** (-s.material.roughness_loss_db / 20)
        amp = wavelength / (4 * np.pi * length)
        gain = amp * np.exp(-2j * np.pi * length / wavelength) * coeff
        aod = scene.cv_mounting.local_angles(path[1] - path[0])
        aoa = scene.rsu_mounting.local_angles(path[-2] - path[-1])
        rays.append(Ray(gain=complex(gain), delay=length / SPEED_OF_LIGHT,
                        aoa=aoa, aod=aod, bounce_count=len(seq)))

    rays.sort(key=lambda r: (-r.power, r.delay, r.bounce_count))
    return ChannelInstance(rays=rays[:l_p], cv_longitudinal=scene.cv_longitudinal,
                           seed=scene.seed, los_blocked=los_blocked)
