"""Barometer, magnetometer, IMU and GPS models plus the sensor rate scheduler.

Every stochastic term is a :class:`NoiseProcess`: additive white Gaussian noise
on top of a random-walk bias ``b[k+1] = b[k] + sigma_walk * sqrt(dt) * n[k]``.
Each process owns its own ``numpy.random.Generator`` so a sensor suite is
reproducible bit-for-bit from a single seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import GRAVITY, RigidBodyState
from .frames import as_vec3, quat_rotate_inverse

# International Standard Atmosphere, troposphere only
ISA_T0 = 288.15  # K
ISA_P0 = 101325.0  # Pa
ISA_LAPSE = 0.0065  # K/m
ISA_EXPONENT = 5.2561
ISA_MAX_ALTITUDE = 11000.0  # m
AIR_DENSITY = 1.293  # kg/m^3

EARTH_RADIUS = 6371000.0  # m, spherical model
MAX_PROJECTION_RANGE = 500_000.0  # m

SENSOR_ORDER = ("barometer", "magnetometer", "imu", "gps")
DEFAULT_RATES = {"barometer": 250.0, "magnetometer": 250.0, "imu": 250.0, "gps": 1.0}


class NoiseProcess:
    """White noise plus random-walk bias for one (possibly vector) channel.

    ``draw(dt)`` advances the bias by one step of length ``dt`` and returns the
    pair ``(white, bias)`` so callers can use the two terms separately.
    """

    def __init__(self, sigma_white=0.0, sigma_walk=0.0, bias=0.0, rng=None, shape=()):
        self.sigma_white = float(sigma_white)
        self.sigma_walk = float(sigma_walk)
        if self.sigma_white < 0 or self.sigma_walk < 0:
            raise ValueError("noise standard deviations must be non-negative")
        self.shape = tuple(np.atleast_1d(shape)) if shape != () else ()
        self.bias = np.broadcast_to(np.asarray(bias, dtype=float), self.shape).copy()
        if isinstance(rng, np.random.Generator):
            self.rng = rng
        else:
            self.rng = np.random.default_rng(rng)

    @classmethod
    def noiseless(cls, shape=()) -> "NoiseProcess":
        return cls(0.0, 0.0, 0.0, rng=0, shape=shape)

    def draw(self, dt: float):
        if self.sigma_walk > 0.0:
            self.bias = self.bias + self.sigma_walk * math.sqrt(dt) * self.rng.standard_normal(self.shape)
        if self.sigma_white > 0.0:
            white = self.sigma_white * self.rng.standard_normal(self.shape)
        else:
            white = np.zeros(self.shape)
        return white, self.bias.copy()

    def sample(self, dt: float):
        white, bias = self.draw(dt)
        return white + bias


@dataclass
class GeoOrigin:
    """World origin on the globe and the local geomagnetic field there.

    Angles for the magnetic field are radians; strength is in Gauss. The
    defaults sit near Zurich with field values of the right magnitude, chosen
    for convenience.
    """

    lat0: float = 47.397742
    lon0: float = 8.545594
    alt0: float = 488.0
    declination: float = math.radians(2.5)
    inclination: float = math.radians(63.5)
    strength: float = 0.48

    def __post_init__(self):
        if not -90.0 <= self.lat0 <= 90.0:
            raise ValueError("lat0 must be within [-90, 90] degrees")
        if not -180.0 <= self.lon0 <= 180.0:
            raise ValueError("lon0 must be within [-180, 180] degrees")
        if not -math.pi / 2 < self.inclination < math.pi / 2:
            raise ValueError("inclination must lie strictly within (-pi/2, pi/2)")
        if self.strength < 0:
            raise ValueError("field strength must be non-negative")


@dataclass
class BaroReading:
    temperature: float  # K
    pressure: float  # Pa
    pressure_altitude: float  # m
    t: float


@dataclass
class MagReading:
    field: np.ndarray  # Gauss, body FLU
    t: float


@dataclass
class ImuReading:
    gyro: np.ndarray  # rad/s, body FLU
    accel: np.ndarray  # m/s^2 specific force, body FLU
    t: float


@dataclass
class GpsReading:
    latitude: float  # deg
    longitude: float  # deg
    altitude: float  # m MSL
    velocity: np.ndarray  # m/s ENU
    t: float

    def __post_init__(self):
        if abs(self.latitude) > 90.0 or abs(self.longitude) > 180.0:
            raise ValueError("GPS fix outside valid geodetic range")


# -- barometer ---------------------------------------------------------------


def isa_temperature(h: float) -> float:
    return ISA_T0 - ISA_LAPSE * h


def isa_pressure(h: float) -> float:
    return ISA_P0 / (ISA_T0 / isa_temperature(h)) ** ISA_EXPONENT


def barometer_sample(
    state: RigidBodyState,
    origin: GeoOrigin,
    noise: NoiseProcess | None = None,
    drift: NoiseProcess | None = None,
    dt: float = 0.004,
    g: float = GRAVITY,
) -> BaroReading:
    """ISA barometer. ``noise`` supplies the white term ``w``; ``drift`` the bias ``d``.

    Raises ``ValueError`` above 11 km where the single-layer model stops being valid.
    """
    h = float(state.p[2]) + origin.alt0
    if h > ISA_MAX_ALTITUDE:
        raise ValueError(f"altitude {h:.1f} m exceeds the 11 km validity of the ISA model")
    w = float(noise.draw(dt)[0]) if noise is not None else 0.0
    d = float(drift.sample(dt)) if drift is not None else 0.0
    T = isa_temperature(h)
    p = ISA_P0 / (ISA_T0 / T) ** ISA_EXPONENT + w + d
    pa = h - w / (g * AIR_DENSITY)
    return BaroReading(temperature=T, pressure=p, pressure_altitude=pa, t=state.t)


# -- magnetometer ------------------------------------------------------------


def geomagnetic_components(declination: float, inclination: float, strength: float) -> np.ndarray:
    """Noise-free ``(S_X, S_Y, S_Z)`` = horizontal-north, horizontal-east, vertical-down."""
    H = strength * math.cos(inclination)
    return np.array([H * math.cos(declination), H * math.sin(declination), H * math.tan(inclination)])


def geographic_to_inertial(components, convention: str = "NED") -> np.ndarray:
    """Map field components into the ENU simulation frame.

    ``"NED"`` treats the components as north/east/down (the World Magnetic
    Model layout); ``"ENU"`` takes them verbatim.
    """
    c = as_vec3(components)
    if convention == "NED":
        return np.array([c[1], c[0], -c[2]])
    if convention == "ENU":
        return c.copy()
    raise ValueError(f"unknown geomagnetic convention {convention!r}")


def magnetometer_sample(
    state: RigidBodyState,
    origin: GeoOrigin,
    noise: NoiseProcess | None = None,
    dt: float = 0.004,
    convention: str = "NED",
) -> MagReading:
    comps = geomagnetic_components(origin.declination, origin.inclination, origin.strength)
    if noise is not None:
        comps = comps + noise.sample(dt)
    field_world = geographic_to_inertial(comps, convention)
    return MagReading(field=quat_rotate_inverse(state.q, field_world), t=state.t)


# -- IMU ---------------------------------------------------------------------


def imu_sample(
    state: RigidBodyState,
    accel_true,
    noise_g: NoiseProcess | None = None,
    noise_a: NoiseProcess | None = None,
    dt: float = 0.004,
    g: float = GRAVITY,
) -> ImuReading:
    """Gyro ``w + eta_g + b_g``; accelerometer measures body specific force.

    ``accel_true`` is the inertial ``v_dot`` from the dynamics. The accelerometer
    output is ``q⁻¹ ⊙ (v_dot + g e3) + eta_a + b_a`` so a hovering vehicle reads
    ``+g`` on its body z axis.
    """
    gyro = state.omega.copy()
    if noise_g is not None:
        gyro = gyro + noise_g.sample(dt)
    a = as_vec3(accel_true) + np.array([0.0, 0.0, g])
    accel = quat_rotate_inverse(state.q, a)
    if noise_a is not None:
        accel = accel + noise_a.sample(dt)
    return ImuReading(gyro=gyro, accel=accel, t=state.t)


# -- GPS ---------------------------------------------------------------------


def local_to_geodetic(x: float, y: float, origin: GeoOrigin) -> tuple[float, float]:
    """Inverse azimuthal-equidistant projection of local east/north metres.

    Returns ``(lat, lon)`` in degrees. The angular distance from the origin is
    the planar range divided by :data:`EARTH_RADIUS`.
    """
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("local position must be finite")
    rho = math.hypot(x, y)
    if rho >= MAX_PROJECTION_RANGE:
        raise ValueError(f"range {rho:.0f} m exceeds projection limit {MAX_PROJECTION_RANGE:.0f} m")
    if rho == 0.0:
        return origin.lat0, origin.lon0

    phi0 = math.radians(origin.lat0)
    lam0 = math.radians(origin.lon0)
    xr = x / EARTH_RADIUS
    yr = y / EARTH_RADIUS
    c = rho / EARTH_RADIUS
    sin_c, cos_c = math.sin(c), math.cos(c)
    sin_p0, cos_p0 = math.sin(phi0), math.cos(phi0)

    phi = math.asin(cos_c * sin_p0 + yr * sin_c * cos_p0 / c)
    lam = lam0 + math.atan2(xr * sin_c, c * cos_p0 * cos_c - yr * sin_p0 * sin_c)
    lon = math.degrees(lam)
    lon = (lon + 180.0) % 360.0 - 180.0
    return math.degrees(phi), lon


def gps_sample(
    state: RigidBodyState,
    origin: GeoOrigin,
    noise: NoiseProcess | None = None,
    velocity_noise: NoiseProcess | None = None,
    dt: float = 1.0,
) -> GpsReading:
    p = state.p.copy()
    if noise is not None:
        p = p + noise.sample(dt)
    v = state.v.copy()
    if velocity_noise is not None:
        v = v + velocity_noise.sample(dt)
    lat, lon = local_to_geodetic(float(p[0]), float(p[1]), origin)
    return GpsReading(latitude=lat, longitude=lon, altitude=float(p[2]) + origin.alt0, velocity=v, t=state.t)


# -- suite & scheduling ------------------------------------------------------


@dataclass
class SensorNoiseConfig:
    """Standard deviations for every noise term. Defaults are our own choices."""

    baro_white: float = 1.0  # Pa
    baro_walk: float = 0.01  # Pa / sqrt(s)
    mag_white: float = 0.004  # Gauss
    mag_walk: float = 0.0001  # Gauss / sqrt(s)
    gyro_white: float = 0.0003  # rad/s
    gyro_walk: float = 0.00003  # rad/s / sqrt(s)
    accel_white: float = 0.02  # m/s^2
    accel_walk: float = 0.0005  # m/s^2 / sqrt(s)
    gps_white: float = 0.3  # m (applied to all three axes)
    gps_walk: float = 0.005  # m / sqrt(s)
    gps_velocity_white: float = 0.05  # m/s

    @classmethod
    def noiseless(cls) -> "SensorNoiseConfig":
        return cls(**{name: 0.0 for name in cls.__dataclass_fields__})


class SensorScheduler:
    """Decides which sensors sample on each physics tick.

    Tick ``k`` is the instant ``t = k * dt``. A sensor with rate ``r`` has taken
    ``floor(k * dt * r)`` samples by tick ``k``, so it is due whenever that
    count increments. The first sample lands at ``t = 1/r`` and a sensor can be
    due at most once per tick.
    """

    EPS = 1e-9

    def __init__(self, rates: dict[str, float], physics_dt: float):
        if not physics_dt > 0:
            raise ValueError("physics_dt must be positive")
        self.physics_dt = float(physics_dt)
        self.rates = {}
        for name, rate in rates.items():
            rate = float(rate)
            if not rate > 0 or not math.isfinite(rate):
                raise ValueError(f"sensor rate for {name!r} must be positive, got {rate}")
            if rate * physics_dt > 1.0 + self.EPS:
                raise ValueError(f"sensor rate for {name!r} ({rate} Hz) exceeds the physics rate")
            self.rates[name] = rate
        known = [n for n in SENSOR_ORDER if n in self.rates]
        self._order = known + sorted(n for n in self.rates if n not in SENSOR_ORDER)

    def _count(self, k: int, rate: float) -> int:
        return math.floor(k * self.physics_dt * rate + self.EPS)

    def tick(self, k: int) -> list[str]:
        if k <= 0:
            return []
        return [n for n in self._order if self._count(k, self.rates[n]) > self._count(k - 1, self.rates[n])]


def scheduler_tick(sim_time: float, sensor_rates: dict[str, float], physics_dt: float) -> list[str]:
    """Stateless form of :meth:`SensorScheduler.tick` keyed on simulation time."""
    k = round(sim_time / physics_dt)
    return SensorScheduler(sensor_rates, physics_dt).tick(k)


@dataclass
class SensorBatch:
    """Readings taken on one tick; absent sensors are ``None``."""

    t: float
    barometer: BaroReading | None = None
    magnetometer: MagReading | None = None
    imu: ImuReading | None = None
    gps: GpsReading | None = None

    def readings(self) -> list:
        return [r for r in (self.barometer, self.magnetometer, self.imu, self.gps) if r is not None]


class SensorSuite:
    """Per-vehicle set of sensors sharing one seeded RNG family.

    Each noise term draws from its own child stream spawned from ``seed`` so
    enabling or re-rating one sensor never perturbs another's sequence.
    """

    def __init__(
        self,
        origin: GeoOrigin,
        noise: SensorNoiseConfig | None = None,
        rates: dict[str, float] | None = None,
        physics_dt: float = 0.004,
        seed: int | Sequence[int] = 0,
        mag_convention: str = "NED",
        g: float = GRAVITY,
    ):
        self.origin = origin
        self.noise = noise or SensorNoiseConfig()
        self.scheduler = SensorScheduler(rates if rates is not None else dict(DEFAULT_RATES), physics_dt)
        self.mag_convention = mag_convention
        self.g = g
        n = self.noise
        streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(8)]
        self.baro_w = NoiseProcess(n.baro_white, 0.0, rng=streams[0])
        self.baro_d = NoiseProcess(0.0, n.baro_walk, rng=streams[1])
        self.mag = NoiseProcess(n.mag_white, n.mag_walk, rng=streams[2], shape=3)
        self.gyro = NoiseProcess(n.gyro_white, n.gyro_walk, rng=streams[3], shape=3)
        self.accel = NoiseProcess(n.accel_white, n.accel_walk, rng=streams[4], shape=3)
        self.gps_p = NoiseProcess(n.gps_white, n.gps_walk, rng=streams[5], shape=3)
        self.gps_v = NoiseProcess(n.gps_velocity_white, 0.0, rng=streams[6], shape=3)
        self.counts = {name: 0 for name in self.scheduler.rates}

    def period(self, name: str) -> float:
        return 1.0 / self.scheduler.rates[name]

    def sample(self, k: int, state: RigidBodyState, accel_true) -> SensorBatch:
        """Sample every sensor due on tick ``k`` from ``state`` (taken at that tick)."""
        batch = SensorBatch(t=state.t)
        for name in self.scheduler.tick(k):
            dt = self.period(name)
            if name == "barometer":
                batch.barometer = barometer_sample(state, self.origin, self.baro_w, self.baro_d, dt, self.g)
            elif name == "magnetometer":
                batch.magnetometer = magnetometer_sample(state, self.origin, self.mag, dt, self.mag_convention)
            elif name == "imu":
                batch.imu = imu_sample(state, accel_true, self.gyro, self.accel, dt, self.g)
            elif name == "gps":
                batch.gps = gps_sample(state, self.origin, self.gps_p, self.gps_v, dt)
            else:
                continue
            self.counts[name] += 1
        return batch
