"""Small-scale fading, array responses and the per-interval channel draw.

Shapes follow the received-signal model: ``H_AI`` is N_I x N_A, ``H_IU``
is N_I x K, ``H_AU`` is N_A x K, ``H_AD`` is N_D x N_A and ``H_DU`` is
N_D x K.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .scenario import LINK_KIND, GeometryLayout, ScenarioConfig, pathloss_gain

__all__ = [
    "ChannelSet",
    "SteeringSpec",
    "near_field_los_ad",
    "steering_vector_ula",
    "steering_vector_upa",
    "steering_from_geometry",
    "draw_rayleigh",
    "assemble_rician",
    "draw_channel_set",
    "save_channel_set",
    "load_channel_set",
]


@dataclass(frozen=True)
class ChannelSet:
    """One coherence-interval realization of every link."""

    H_AI: np.ndarray
    H_IU: np.ndarray
    H_AU: np.ndarray
    H_AD: np.ndarray
    H_DU: np.ndarray
    L_AI: float
    L_AD: float
    L_IU: np.ndarray
    L_AU: np.ndarray
    L_DU: np.ndarray

    @property
    def n_antennas(self) -> int:
        return self.H_AU.shape[0]

    @property
    def n_users(self) -> int:
        return self.H_AU.shape[1]

    @property
    def n_irs(self) -> int:
        return self.H_AI.shape[0]

    @property
    def n_dirs(self) -> int:
        return self.H_AD.shape[0]

    def __post_init__(self):
        na, k = self.H_AU.shape
        ni, nd = self.H_AI.shape[0], self.H_AD.shape[0]
        expected = {"H_AI": (ni, na), "H_IU": (ni, k), "H_AD": (nd, na), "H_DU": (nd, k)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")


@dataclass(frozen=True)
class SteeringSpec:
    """Bearings used by the far-field line-of-sight terms (radians).

    ``irs_to_ap`` and ``irs_to_users`` are (azimuth, elevation) pairs
    seen from the IRS; ``ap_to_irs`` is the AP-side ULA angle.
    """

    irs_to_ap: tuple[float, float]
    ap_to_irs: float
    irs_to_users: np.ndarray  # (K, 2)


def near_field_los_ad(geometry: GeometryLayout, wavelength: float) -> np.ndarray:
    """Spherical-wavefront AP-DIRS phase matrix, N_D x N_A, unit modulus."""
    return np.exp(-1j * (2 * np.pi / wavelength) * (geometry.d_nr - geometry.d_n[None, :]))


def steering_vector_ula(n: int, angle: float) -> np.ndarray:
    """Unit-norm half-wavelength ULA response, entry k = exp(-j pi k sin(angle))."""
    if n < 1:
        raise ValueError("array size must be >= 1")
    return np.exp(-1j * np.pi * np.arange(n) * np.sin(angle)) / np.sqrt(n)


def steering_vector_upa(dims: tuple[int, int], angles: tuple[float, float]) -> np.ndarray:
    """Unit-norm half-wavelength UPA response.

    Kronecker product of a row ULA over ``sin(az) sin(el)`` and a column
    ULA over ``cos(el)``; element ``(m, l)`` sits at index ``m * cols + l``.
    """
    rows, cols = dims
    az, el = angles
    u = np.sin(az) * np.sin(el)
    v = np.cos(el)
    a_row = np.exp(-1j * np.pi * np.arange(rows) * u)
    a_col = np.exp(-1j * np.pi * np.arange(cols) * v)
    return np.kron(a_row, a_col) / np.sqrt(rows * cols)


def _upa_angles(direction):
    e = direction / np.linalg.norm(direction)
    el = float(np.arccos(np.clip(e[2], -1.0, 1.0)))
    s = np.sin(el)
    az = float(np.arcsin(np.clip(e[0] / s, -1.0, 1.0))) if s > 1e-12 else 0.0
    return az, el


def steering_from_geometry(config: ScenarioConfig, geometry: GeometryLayout) -> SteeringSpec:
    irs = np.asarray(config.irs_center)
    ap = np.asarray(config.ap_center)
    to_ap = ap - irs
    to_irs = irs - ap
    ap_angle = float(np.arcsin(np.clip(to_irs[0] / np.linalg.norm(to_irs), -1.0, 1.0)))
    users = np.array([_upa_angles(p - irs) for p in geometry.user_positions]).reshape(-1, 2)
    return SteeringSpec(irs_to_ap=_upa_angles(to_ap), ap_to_irs=ap_angle, irs_to_users=users)


def draw_rayleigh(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) matrix."""
    re = rng.standard_normal((rows, cols))
    im = rng.standard_normal((rows, cols))
    return (re + 1j * im) / np.sqrt(2.0)


def assemble_rician(los, nlos, eps: float, L: float | np.ndarray = 1.0) -> np.ndarray:
    """sqrt(L) * (sqrt(eps/(1+eps)) LOS + sqrt(1/(1+eps)) NLOS).

    ``L`` may be a scalar or a per-column vector (per-user pathloss).
    """
    los = np.asarray(los)
    nlos = np.asarray(nlos)
    if los.shape != nlos.shape:
        raise ValueError(f"LOS shape {los.shape} != NLOS shape {nlos.shape}")
    if eps < 0:
        raise ValueError("Rician factor must be >= 0")
    L = np.asarray(L, dtype=float)
    if np.any(L <= 0):
        raise ValueError("pathloss gain must be > 0")
    if np.isinf(eps):
        mixed = los.astype(complex)
    else:
        mixed = np.sqrt(eps / (1 + eps)) * los + np.sqrt(1 / (1 + eps)) * nlos
    return np.sqrt(L) * mixed


def draw_channel_set(config: ScenarioConfig, geometry: GeometryLayout,
                     rng: np.random.Generator) -> ChannelSet:
    """Draw all five links for one coherence interval.

    Each link consumes its own child stream spawned from ``rng`` in a
    fixed order, so e.g. the direct channel is identical across IRS sizes.
    """
    r_ad, r_ai, r_iu, r_au, r_du = rng.spawn(5)
    na, ni, nd, k = config.n_antennas, config.n_irs, config.n_dirs, config.n_users

    L_ad = float(pathloss_gain(LINK_KIND["AD"], geometry.d_ad))
    L_ai = float(pathloss_gain(LINK_KIND["AI"], geometry.d_ai))
    L_iu = np.atleast_1d(pathloss_gain(LINK_KIND["IU"], geometry.d_iu))
    L_au = np.atleast_1d(pathloss_gain(LINK_KIND["AU"], geometry.d_au))
    L_du = np.atleast_1d(pathloss_gain(LINK_KIND["DU"], geometry.d_du))

    H_ad = assemble_rician(near_field_los_ad(geometry, config.carrier_wavelength_m),
                           draw_rayleigh(nd, na, r_ad), config.rician_ad, L_ad)

    steer = steering_from_geometry(config, geometry)
    los_ai = np.sqrt(ni * na) * np.outer(
        steering_vector_upa(config.irs_shape, steer.irs_to_ap),
        steering_vector_ula(na, steer.ap_to_irs).conj())
    H_ai = assemble_rician(los_ai, draw_rayleigh(ni, na, r_ai), config.rician_ai, L_ai)

    los_iu = np.sqrt(ni) * np.stack(
        [steering_vector_upa(config.irs_shape, tuple(a)) for a in steer.irs_to_users], axis=1)
    H_iu = assemble_rician(los_iu, draw_rayleigh(ni, k, r_iu), config.rician_iu, L_iu)

    H_au = np.sqrt(L_au) * draw_rayleigh(na, k, r_au)
    H_du = np.sqrt(L_du) * draw_rayleigh(nd, k, r_du)
    return ChannelSet(H_AI=H_ai, H_IU=H_iu, H_AU=H_au, H_AD=H_ad, H_DU=H_du,
                      L_AI=L_ai, L_AD=L_ad, L_IU=L_iu, L_AU=L_au, L_DU=L_du)


# ------------------------------------------------------------- binary dump

_MAGIC = b"IRSCHAN1"


def save_channel_set(channels: ChannelSet, path) -> None:
    """Write every field as a named complex matrix.

    Layout (little-endian): 8-byte magic ``IRSCHAN1``, uint32 field count,
    then per field: uint16 name length, UTF-8 name, uint32 rows, uint32
    cols, rows*cols*2 float64 values (row-major, re/im interleaved).
    Scalars are stored as 1x1 and per-user vectors as 1xK.
    """
    chunks = [_MAGIC, struct.pack("<I", len(fields(channels)))]
    for f in fields(channels):
        arr = np.asarray(getattr(channels, f.name), dtype=np.complex128)
        arr = arr.reshape(1, -1) if arr.ndim < 2 else arr
        name = f.name.encode()
        chunks.append(struct.pack("<H", len(name)) + name)
        chunks.append(struct.pack("<II", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).astype("<c16").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_channel_set(path) -> ChannelSet:
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise ValueError("not a channel dump")
    (count,), pos = struct.unpack_from("<I", data, 8), 12
    values = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", data, pos)
        name = data[pos + 2:pos + 2 + n].decode()
        pos += 2 + n
        rows, cols = struct.unpack_from("<II", data, pos)
        pos += 8
        arr = np.frombuffer(data, dtype="<c16", count=rows * cols, offset=pos)
        pos += rows * cols * 16
        values[name] = arr.reshape(rows, cols).astype(np.complex128)
    for name in ("L_AI", "L_AD"):
        values[name] = float(values[name].real[0, 0])
    for name in ("L_IU", "L_AU", "L_DU"):
        values[name] = values[name].real.ravel()
    return ChannelSet(**values)
