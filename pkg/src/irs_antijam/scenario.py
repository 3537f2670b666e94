"""Scenario configuration, 3-D geometry, large-scale pathloss and RNG streams.

All physical quantities are converted to linear scale here; everything
downstream works in watts and linear power gains.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import sys
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ScenarioConfig",
    "GeometryLayout",
    "pathloss_db",
    "pathloss_gain",
    "noise_power_dbm",
    "noise_power_watts",
    "dbm_to_watts",
    "watts_to_dbm",
    "planar_shape",
    "build_geometry",
    "load_scenario",
    "parse_scenario",
    "paper_profile",
    "desk_profile",
    "rng_stream",
    "config_hash",
]

Point = tuple[float, float, float]

# 3GPP-style exponents used for every link of the scenario.
_PATHLOSS = {
    "los-like": (35.6, 22.0),
    "nlos-like": (32.6, 36.7),
}
LINK_KIND = {
    "AD": "los-like",
    "AI": "los-like",
    "IU": "los-like",
    "AU": "nlos-like",
    "DU": "nlos-like",
    "JU": "nlos-like",
}

BASELINE_IRS_MODES = ("none", "random", "optimized")


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0


def pathloss_db(kind: str, distance):
    """Large-scale pathloss in dB for a link of the given kind.

    ``kind`` is ``"los-like"`` (35.6 + 22 log10 d) or ``"nlos-like"``
    (32.6 + 36.7 log10 d); ``distance`` is in meters and may be an array.
    """
    try:
        intercept, slope = _PATHLOSS[kind]
    except KeyError:
        raise ValueError(f"unknown pathloss kind {kind!r}") from None
    d = np.asarray(distance, dtype=float)
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise ValueError("pathloss distance must be positive and finite")
    out = intercept + slope * np.log10(d)
    return float(out) if out.ndim == 0 else out


def pathloss_gain(kind: str, distance):
    """Linear power gain 10^(-PL/10)."""
    return 10.0 ** (-np.asarray(pathloss_db(kind, distance)) / 10.0)


def noise_power_dbm(bandwidth_hz: float) -> float:
    """AWGN power -170 + 10 log10(BW) dBm."""
    if not bandwidth_hz > 0 or not math.isfinite(bandwidth_hz):
        raise ValueError("bandwidth must be positive")
    return -170.0 + 10.0 * math.log10(bandwidth_hz)


def noise_power_watts(bandwidth_hz: float) -> float:
    return float(dbm_to_watts(noise_power_dbm(bandwidth_hz)))


def planar_shape(n: int) -> tuple[int, int]:
    """Most nearly square (rows, cols) factorization with rows >= cols.

    128 -> (16, 8) and 2048 -> (64, 32), the apertures of the default surfaces.
    """
    if n < 1:
        raise ValueError("element count must be >= 1")
    cols = max(c for c in range(1, math.isqrt(n) + 1) if n % c == 0)
    return n // cols, cols


@dataclass(frozen=True)
class ScenarioConfig:
    """Every knob of one simulated deployment.

    Defaults reproduce the full-size deployment (32 antennas, 16 users,
    a 16x8 legitimate IRS and a 64x32 DIRS). Positions are in meters,
    phases in radians, powers in dBm; Rician factors are linear.
    """

    n_antennas: int = 32
    n_irs: int = 128
    n_dirs: int = 2048
    n_users: int = 16
    power_budget_dbm: float = 10.0 * math.log10(16)
    bandwidth_hz: float = 180e3
    carrier_wavelength_m: float = 0.06
    ap_center: Point = (2.0, 0.0, 5.0)
    irs_center: Point = (10.0, 280.0, 5.0)
    dirs_center: Point = (2.0, 0.0, 2.0)
    user_region_center: Point = (0.0, 300.0, 0.0)
    user_region_radius_m: float = 20.0
    dirs_alphabet: tuple[float, ...] = (math.pi / 9, 6 * math.pi / 5)
    irs_alphabet_bits: int = 2
    dirs_alphabet_bits: int = 1
    rician_ad: float = 3.0
    rician_ai: float = 3.0
    rician_iu: float = 3.0
    element_spacing_m: float | None = None
    seed: int = 1
    trials: int = 100
    dirs_redraw_per_symbol: bool = True
    # beyond the core parameter list
    irs_shape: tuple[int, int] | None = None
    dirs_shape: tuple[int, int] | None = None
    jammer_center: Point = (2.0, 0.0, 5.0)
    jammer_power_dbm: float = 0.0
    dirs_draws: int = 2000
    beta_scale: float = 1.0
    baseline_irs: str = "none"
    frozen_users: bool = False
    rcg_restarts: int = 1

    def __post_init__(self):
        set_ = lambda name, value: object.__setattr__(self, name, value)  # noqa: E731
        for name in ("ap_center", "irs_center", "dirs_center",
                     "user_region_center", "jammer_center"):
            pt = tuple(float(x) for x in getattr(self, name))
            if len(pt) != 3 or not all(math.isfinite(x) for x in pt):
                raise ValueError(f"{name} must be a finite 3-D point")
            set_(name, pt)
        set_("dirs_alphabet", tuple(float(p) for p in self.dirs_alphabet))
        if self.element_spacing_m is None:
            set_("element_spacing_m", self.carrier_wavelength_m / 2)
        if self.irs_shape is None:
            set_("irs_shape", planar_shape(self.n_irs) if self.n_irs > 0 else (0, 0))
        if self.dirs_shape is None:
            set_("dirs_shape", planar_shape(self.n_dirs))
        set_("irs_shape", tuple(int(x) for x in self.irs_shape))
        set_("dirs_shape", tuple(int(x) for x in self.dirs_shape))
        self._validate()

    def _validate(self):
        for name in ("n_antennas", "n_irs", "n_dirs", "n_users", "trials",
                     "dirs_draws", "rcg_restarts"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not math.isfinite(self.power_budget_dbm):
            raise ValueError("power_budget_dbm must be finite")
        # -inf dBm is a silent jammer
        if math.isnan(self.jammer_power_dbm) or self.jammer_power_dbm == math.inf:
            raise ValueError("jammer_power_dbm must be finite or -inf")
        if not self.user_region_radius_m > 0:
            raise ValueError("user_region_radius_m must be > 0")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be > 0")
        if not self.carrier_wavelength_m > 0 or not self.element_spacing_m > 0:
            raise ValueError("wavelength and element spacing must be > 0")
        for name in ("rician_ad", "rician_ai", "rician_iu", "beta_scale"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if self.irs_alphabet_bits < 1 or self.dirs_alphabet_bits < 1:
            raise ValueError("alphabet bit counts must be >= 1")
        q = self.dirs_alphabet
        if len(q) != 2 ** self.dirs_alphabet_bits:
            raise ValueError(
                f"dirs_alphabet needs {2 ** self.dirs_alphabet_bits} phases, got {len(q)}")
        if len(set(q)) != len(q) or any(not 0 <= p < 2 * math.pi for p in q):
            raise ValueError("dirs_alphabet phases must be distinct and in [0, 2pi)")
        if self.irs_shape[0] * self.irs_shape[1] != self.n_irs:
            raise ValueError("irs_shape does not match n_irs")
        if self.dirs_shape[0] * self.dirs_shape[1] != self.n_dirs:
            raise ValueError("dirs_shape does not match n_dirs")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.baseline_irs not in BASELINE_IRS_MODES:
            raise ValueError(f"baseline_irs must be one of {BASELINE_IRS_MODES}")

    # derived quantities, all linear scale
    @property
    def irs_alphabet(self) -> np.ndarray:
        m = 2 ** self.irs_alphabet_bits
        return 2 * np.pi * np.arange(m) / m

    @property
    def power_budget_watts(self) -> float:
        return float(dbm_to_watts(self.power_budget_dbm))

    @property
    def per_user_power_dbm(self) -> float:
        return self.power_budget_dbm - 10.0 * math.log10(self.n_users)

    @property
    def noise_watts(self) -> float:
        return noise_power_watts(self.bandwidth_hz)

    @property
    def jammer_power_watts(self) -> float:
        return float(dbm_to_watts(self.jammer_power_dbm))

    def replace(self, **changes) -> "ScenarioConfig":
        # shapes follow the element counts unless given explicitly
        if "n_irs" in changes and "irs_shape" not in changes:
            changes["irs_shape"] = None
        if "n_dirs" in changes and "dirs_shape" not in changes:
            changes["dirs_shape"] = None
        return dataclasses.replace(self, **changes)

    def with_per_user_power(self, dbm: float) -> "ScenarioConfig":
        return self.replace(power_budget_dbm=dbm + 10.0 * math.log10(self.n_users))

    def to_dict(self) -> dict[str, Any]:
        return {f.name: _jsonable(getattr(self, f.name)) for f in dataclasses.fields(self)}


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


def config_hash(config: ScenarioConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def paper_profile(**overrides) -> ScenarioConfig:
    return ScenarioConfig(**overrides)


def desk_profile(**overrides) -> ScenarioConfig:
    """Reduced deployment that keeps a full sweep within minutes."""
    base = dict(n_antennas=8, n_users=4, n_irs=32, n_dirs=256,
                power_budget_dbm=10.0 * math.log10(4), trials=200, dirs_draws=500)
    base.update(overrides)
    return ScenarioConfig(**base)


# ---------------------------------------------------------------- RNG streams

def rng_stream(seed: int, trial: int, name: str) -> np.random.Generator:
    """Independent generator for one (trial, purpose) pair.

    Streams depend only on the master seed, the trial index and the name,
    never on scheduling, so trials can run in any order or process.
    """
    key = (int(trial), zlib.crc32(name.encode()))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


# ------------------------------------------------------------------ geometry

@dataclass(frozen=True)
class GeometryLayout:
    ap_positions: np.ndarray        # (N_A, 3)
    irs_positions: np.ndarray       # (N_I, 3)
    dirs_positions: np.ndarray      # (N_D, 3)
    user_positions: np.ndarray      # (K, 3)
    jammer_position: np.ndarray     # (3,)
    d_ad: float
    d_ai: float
    d_iu: np.ndarray                # (K,)
    d_au: np.ndarray
    d_du: np.ndarray
    d_ju: np.ndarray
    d_nr: np.ndarray = field(repr=False)  # (N_D, N_A) antenna n to DIRS element r
    d_n: np.ndarray = field(repr=False)   # (N_A,) antenna n to DIRS center


def _ula(center, n, spacing):
    offsets = (np.arange(n) - (n - 1) / 2) * spacing
    pos = np.tile(np.asarray(center, dtype=float), (n, 1))
    pos[:, 0] += offsets
    return pos


def _upa_xz(center, shape, spacing):
    # rows along x, columns along z; element index = row * cols + col
    rows, cols = shape
    x = (np.arange(rows) - (rows - 1) / 2) * spacing
    z = (np.arange(cols) - (cols - 1) / 2) * spacing
    xx, zz = np.meshgrid(x, z, indexing="ij")
    pos = np.tile(np.asarray(center, dtype=float), (rows * cols, 1))
    pos[:, 0] += xx.ravel()
    pos[:, 2] += zz.ravel()
    return pos


def sample_disk(center, radius, n, rng) -> np.ndarray:
    """Uniform points in a horizontal disk."""
    r = radius * np.sqrt(rng.random(n))
    theta = 2 * np.pi * rng.random(n)
    pos = np.tile(np.asarray(center, dtype=float), (n, 1))
    pos[:, 0] += r * np.cos(theta)
    pos[:, 1] += r * np.sin(theta)
    return pos


def _dist(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1)


def build_geometry(config: ScenarioConfig, rng: np.random.Generator) -> GeometryLayout:
    """Place every array element and draw the user positions.

    Raises
    ------
    ValueError
        If any link distance (including antenna-to-DIRS-element pairs)
        is not strictly positive.
    """
    s = config.element_spacing_m
    ap = _ula(config.ap_center, config.n_antennas, s)
    irs = _upa_xz(config.irs_center, config.irs_shape, s) if config.n_irs else np.zeros((0, 3))
    dirs = _upa_xz(config.dirs_center, config.dirs_shape, s)
    users = sample_disk(config.user_region_center, config.user_region_radius_m,
                        config.n_users, rng)
    jam = np.asarray(config.jammer_center)

    d_nr = _dist(dirs[:, None, :], ap[None, :, :])
    d_n = _dist(ap, config.dirs_center)
    geom = GeometryLayout(
        ap_positions=ap,
        irs_positions=irs,
        dirs_positions=dirs,
        user_positions=users,
        jammer_position=jam,
        d_ad=float(_dist(config.ap_center, config.dirs_center)),
        d_ai=float(_dist(config.ap_center, config.irs_center)),
        d_iu=_dist(users, config.irs_center),
        d_au=_dist(users, config.ap_center),
        d_du=_dist(users, config.dirs_center),
        d_ju=_dist(users, jam),
        d_nr=d_nr,
        d_n=d_n,
    )
    for name in ("d_ad", "d_ai", "d_iu", "d_au", "d_du", "d_nr", "d_n"):
        if np.any(np.asarray(getattr(geom, name)) <= 0):
            raise ValueError(f"degenerate geometry: {name} has a non-positive distance")
    return geom


# -------------------------------------------------------------- scenario file

_KEYS = {
    "system.n_antennas": "n_antennas",
    "system.n_irs": "n_irs",
    "system.n_dirs": "n_dirs",
    "system.n_users": "n_users",
    "system.power_budget_dbm": "power_budget_dbm",
    "system.bandwidth_hz": "bandwidth_hz",
    "system.carrier_wavelength_m": "carrier_wavelength_m",
    "system.seed": "seed",
    "system.trials": "trials",
    "geometry.ap_center": "ap_center",
    "geometry.irs_center": "irs_center",
    "geometry.dirs_center": "dirs_center",
    "geometry.user_region_center": "user_region_center",
    "geometry.user_region_radius_m": "user_region_radius_m",
    "geometry.element_spacing_m": "element_spacing_m",
    "geometry.irs_shape": "irs_shape",
    "geometry.dirs_shape": "dirs_shape",
    "geometry.frozen_users": "frozen_users",
    "dirs.alphabet": "dirs_alphabet",
    "dirs.bits": "dirs_alphabet_bits",
    "dirs.redraw_per_symbol": "dirs_redraw_per_symbol",
    "dirs.draws": "dirs_draws",
    "irs.bits": "irs_alphabet_bits",
    "irs.restarts": "rcg_restarts",
    "fading.rician_ad": "rician_ad",
    "fading.rician_ai": "rician_ai",
    "fading.rician_iu": "rician_iu",
    "jammer.center": "jammer_center",
    "jammer.power_dbm": "jammer_power_dbm",
    "precoder.beta_scale": "beta_scale",
    "harness.baseline_irs": "baseline_irs",
}


def _flatten(tree, prefix=""):
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, dotted + ".")
        else:
            yield dotted, value


def parse_scenario(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Apply ``key = value`` lines (dotted keys, ``#`` comments) to ``base``.

    Unknown keys raise ``ValueError`` so typos never pass silently.
    """
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"malformed scenario file: {exc}") from None
    changes = {}
    for key, value in _flatten(tree):
        if key not in _KEYS:
            raise ValueError(f"unknown scenario key {key!r}")
        changes[_KEYS[key]] = tuple(value) if isinstance(value, list) else value
    if "dirs_alphabet" in changes and "dirs_alphabet_bits" not in changes:
        n = len(changes["dirs_alphabet"])
        if n & (n - 1) == 0 and n > 1:
            changes["dirs_alphabet_bits"] = n.bit_length() - 1
    base = base if base is not None else ScenarioConfig()
    return base.replace(**changes)


def load_scenario(path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    return parse_scenario(Path(path).read_text(encoding="utf-8"), base)
