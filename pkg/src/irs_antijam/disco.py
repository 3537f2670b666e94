"""The DISCO jammer: random reflection states, the jammed channel and its statistics."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import draw_rayleigh, near_field_los_ad
from .scenario import LINK_KIND, GeometryLayout, ScenarioConfig, pathloss_gain

__all__ = [
    "ReflectionVector",
    "AcaStatistics",
    "CltReport",
    "draw_dirs_state",
    "draw_dirs_phases",
    "jammed_channel",
    "aca_variance",
    "clt_diagnostics",
    "write_clt_csv",
]

_MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class ReflectionVector:
    """Phase configuration of a reflecting surface.

    ``alphabet`` is ``None`` for a continuous (relaxed) state; otherwise
    every phase must be one of its entries.
    """

    phases: np.ndarray
    alphabet: tuple[float, ...] | None = None

    def __post_init__(self):
        phases = np.mod(np.asarray(self.phases, dtype=float).ravel(), 2 * np.pi)
        object.__setattr__(self, "phases", phases)
        if self.alphabet is not None:
            alpha = tuple(float(a) for a in self.alphabet)
            if not alpha:
                raise ValueError("alphabet must be nonempty")
            object.__setattr__(self, "alphabet", alpha)
            gap = np.abs(np.angle(np.exp(1j * (phases[:, None] - np.asarray(alpha)[None, :]))))
            if phases.size and np.any(gap.min(axis=1) > _MEMBERSHIP_TOL):
                raise ValueError("phase outside the alphabet")

    @property
    def values(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    def __len__(self):
        return self.phases.size

    @classmethod
    def identity(cls, n: int, alphabet=None) -> "ReflectionVector":
        return cls(np.zeros(n), alphabet)

    @classmethod
    def from_values(cls, values, alphabet=None) -> "ReflectionVector":
        return cls(np.angle(np.asarray(values)), alphabet)


@dataclass(frozen=True)
class AcaStatistics:
    """Per-user variance of the jammed-channel entries."""

    beta: np.ndarray
    n_dirs: int
    L_AD: float
    L_DU: np.ndarray


def draw_dirs_phases(alphabet, n_elements: int, n_draws: int,
                     rng: np.random.Generator, weights=None) -> np.ndarray:
    """``n_draws`` x ``n_elements`` phases drawn i.i.d. from ``alphabet``.

    ``weights`` is the selection distribution over the alphabet (uniform
    when omitted).
    """
    alphabet = np.asarray(alphabet, dtype=float)
    if alphabet.size == 0:
        raise ValueError("DIRS alphabet is empty")
    idx = rng.choice(alphabet.size, size=(n_draws, n_elements), p=weights)
    return alphabet[idx]


def draw_dirs_state(config: ScenarioConfig, rng: np.random.Generator,
                    weights=None) -> ReflectionVector:
    phases = draw_dirs_phases(config.dirs_alphabet, config.n_dirs, 1, rng, weights)[0]
    return ReflectionVector(phases, config.dirs_alphabet)


def jammed_channel(H_AD: np.ndarray, H_DU: np.ndarray, state) -> np.ndarray:
    """K x N_A matrix whose row k is h_DU,k^H diag(e^{j phi}) H_AD."""
    values = state.values if isinstance(state, ReflectionVector) else np.asarray(state)
    if H_AD.shape[0] != H_DU.shape[0] or values.shape != (H_AD.shape[0],):
        raise ValueError("DIRS dimensions disagree")
    return (H_DU.conj().T * values[None, :]) @ H_AD


def aca_variance(config: ScenarioConfig, geometry: GeometryLayout) -> AcaStatistics:
    """beta_k = L_AD * L_DU,k * N_D, the limiting per-entry variance."""
    L_ad = float(pathloss_gain(LINK_KIND["AD"], geometry.d_ad))
    L_du = np.atleast_1d(pathloss_gain(LINK_KIND["DU"], geometry.d_du))
    return AcaStatistics(beta=L_ad * L_du * config.n_dirs, n_dirs=config.n_dirs,
                         L_AD=L_ad, L_DU=L_du)


@dataclass(frozen=True)
class CltReport:
    n_dirs: int
    n_draws: int
    mean: np.ndarray          # (K, N_A) complex
    var: np.ndarray           # (K, N_A)
    kurtosis: np.ndarray      # (K, N_A), E|z|^4 / (E|z|^2)^2 after centering
    beta: np.ndarray          # (K,)
    pooled_kurtosis: float    # over all entries, each normalized by beta_k

    @property
    def var_ratio(self) -> float:
        """Entry-pooled empirical variance over beta."""
        return float(np.mean(self.var / self.beta[:, None]))

    @property
    def max_mean_ratio(self) -> float:
        """Largest |mean|^2 / beta over all entries."""
        return float(np.max(np.abs(self.mean) ** 2 / self.beta[:, None]))

    @property
    def kurtosis_gap(self) -> float:
        """Distance of the pooled normalized fourth moment from 2 (complex Gaussian)."""
        return float(abs(self.pooled_kurtosis - 2.0))


def clt_diagnostics(config: ScenarioConfig, geometry: GeometryLayout, n_draws: int,
                    rng: np.random.Generator, *, redraw_ad_nlos: bool = True,
                    chunk: int = 200) -> CltReport:
    """Monte Carlo moments of [H_D(t)]_{k,n} against the Gaussian limit.

    The near-field LOS part of H_AD is fixed by the geometry; each draw
    redraws the DIRS phases together with the DIRS-user fading and (by
    default) the AP-DIRS scattered component.
    """
    if n_draws < 1000:
        raise ValueError("n_draws must be >= 1000")
    stats = aca_variance(config, geometry)
    na, nd, k = config.n_antennas, config.n_dirs, config.n_users
    eps = config.rician_ad
    los = np.sqrt(eps / (1 + eps)) * near_field_los_ad(geometry, config.carrier_wavelength_m)
    w_nlos = np.sqrt(1 / (1 + eps))
    fixed_nlos = None if redraw_ad_nlos else draw_rayleigh(nd, na, rng)
    sqrt_du = np.sqrt(stats.L_DU)

    samples = np.empty((n_draws, k, na), dtype=complex)
    for start in range(0, n_draws, chunk):
        t = min(chunk, n_draws - start)
        nlos = (fixed_nlos[None] if fixed_nlos is not None
                else draw_rayleigh(t * nd, na, rng).reshape(t, nd, na))
        H_ad = np.sqrt(stats.L_AD) * (los[None] + w_nlos * nlos)
        H_du = draw_rayleigh(t * nd, k, rng).reshape(t, nd, k) * sqrt_du
        v = np.exp(1j * draw_dirs_phases(config.dirs_alphabet, nd, t, rng))
        rows = np.conj(H_du).transpose(0, 2, 1) * v[:, None, :]
        samples[start:start + t] = rows @ H_ad

    mean = samples.mean(axis=0)
    centered = samples - mean
    p2 = np.abs(centered) ** 2
    var = p2.mean(axis=0)
    kurt = (p2 ** 2).mean(axis=0) / var ** 2
    z2 = p2 / stats.beta[None, :, None]
    pooled = float(np.mean(z2 ** 2) / np.mean(z2) ** 2)
    return CltReport(n_dirs=nd, n_draws=n_draws, mean=mean, var=var, kurtosis=kurt,
                     beta=stats.beta, pooled_kurtosis=pooled)


def write_clt_csv(reports, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_dirs", "k", "n", "emp_mean_re", "emp_mean_im",
                         "emp_var", "beta", "kurtosis"])
        for rep in reports:
            for k in range(rep.var.shape[0]):
                for n in range(rep.var.shape[1]):
                    writer.writerow([rep.n_dirs, k, n, repr(float(rep.mean[k, n].real)),
                                     repr(float(rep.mean[k, n].imag)), repr(float(rep.var[k, n])),
                                     repr(float(rep.beta[k])), repr(float(rep.kurtosis[k, n]))])
