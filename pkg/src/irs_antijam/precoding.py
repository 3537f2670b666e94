"""Active beamforming: effective channels, the SJNR-maximizing precoder and SJNR evaluation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .channels import ChannelSet
from .disco import ReflectionVector, draw_dirs_phases

__all__ = [
    "EffectiveChannels",
    "PrecoderMatrix",
    "SjnrReport",
    "EigenConvergenceError",
    "effective_channels",
    "sjnr_pencil",
    "build_A",
    "max_eigvec",
    "anti_jamming_precoder",
    "sjnr_from_powers",
    "sjnr_deterministic",
    "sjnr_closed_form",
    "sjnr_monte_carlo",
]


class EigenConvergenceError(RuntimeError):
    def __init__(self, residual: float):
        super().__init__(f"power iteration did not converge (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class EffectiveChannels:
    """Legitimate channels known to the AP, one column per user.

    ``h_L[:, k] = h_I[:, k] + h_d[:, k]`` where the received sample of
    user k is ``h_L[:, k]^H x``.
    """

    h_I: np.ndarray  # (N_A, K) IRS-cascaded part
    h_d: np.ndarray  # (N_A, K) direct part

    @property
    def h_L(self) -> np.ndarray:
        return self.h_I + self.h_d

    @property
    def n_users(self) -> int:
        return self.h_d.shape[1]

    def others(self, k: int) -> np.ndarray:
        """N_A x (K-1) stack of every user except k, in user order."""
        return np.delete(self.h_L, k, axis=1)


@dataclass(frozen=True)
class PrecoderMatrix:
    W: np.ndarray          # (N_A, K)
    power_budget: float    # watts

    def __post_init__(self):
        if np.linalg.norm(self.W) ** 2 > self.power_budget * (1 + 1e-9):
            raise ValueError("precoder exceeds the power budget")


@dataclass(frozen=True)
class SjnrReport:
    eta: np.ndarray
    method: str
    stderr: np.ndarray | None = None

    @property
    def rate(self) -> float:
        """Sum of log2(1 + eta_k), bits/s/Hz."""
        return float(np.sum(np.log2(1.0 + self.eta)))

    @property
    def rate_per_user(self) -> float:
        return self.rate / self.eta.size


def effective_channels(channels: ChannelSet,
                       irs_state: ReflectionVector | np.ndarray | None = None) -> EffectiveChannels:
    """Cascade the IRS (if any) with the direct links.

    ``irs_state=None`` or an empty IRS leaves only the direct channel.
    """
    h_d = channels.H_AU
    if irs_state is None or channels.n_irs == 0:
        return EffectiveChannels(h_I=np.zeros_like(h_d, dtype=complex), h_d=h_d)
    v = irs_state.values if isinstance(irs_state, ReflectionVector) else np.asarray(irs_state)
    if v.shape != (channels.n_irs,):
        raise ValueError(f"IRS state has {v.shape} entries, expected {channels.n_irs}")
    h_I = channels.H_AI.conj().T @ (v.conj()[:, None] * channels.H_IU)
    return EffectiveChannels(h_I=h_I, h_d=h_d)


def sjnr_pencil(k: int, eff: EffectiveChannels, beta_est, sigma2: float,
                P0: float) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator matrices of user k's loaded Rayleigh quotient.

    numerator   = h_k h_k^H + beta_k I
    denominator = H~_k H~_k^H + (sigma2 K / P0 + sum_{u != k} beta_u) I
    """
    beta_est = np.asarray(beta_est, dtype=float)
    K = eff.n_users
    h = eff.h_L[:, k]
    n = h.size
    others = eff.others(k)
    eye = np.eye(n)
    num = np.outer(h, h.conj()) + beta_est[k] * eye
    load = sigma2 * K / P0 + (beta_est.sum() - beta_est[k])
    den = others @ others.conj().T + load * eye
    return num, den


def build_A(k: int, eff: EffectiveChannels, beta_est, sigma2: float, P0: float) -> np.ndarray:
    """A_k = denominator^{-1} numerator, via a Cholesky solve."""
    num, den = sjnr_pencil(k, eff, beta_est, sigma2, P0)
    return linalg.cho_solve(linalg.cho_factor(den, lower=True), num)


def _phase_fix(w):
    i = int(np.argmax(np.abs(w)))
    if np.abs(w[i]) == 0:
        return w
    return w * (np.abs(w[i]) / w[i])


def max_eigvec(numerator: np.ndarray, denominator: np.ndarray | None = None, *,
               tol: float = 1e-13, max_iter: int = 2000,
               n_squarings: int = 24) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of ``denominator^{-1} numerator``.

    Both arguments are Hermitian, the numerator PSD and the denominator
    PD (identity when omitted). The pencil is whitened with the Cholesky
    factor of the denominator, and the dominant direction of the whitened
    matrix is found by power iteration: a few repeated squarings give the
    starting vector, plain power steps polish it until the whitened
    residual falls below ``tol`` times the matrix norm.

    Returns the eigenvalue and a unit-norm eigenvector whose largest
    entry is real and positive.

    Raises
    ------
    EigenConvergenceError
        If the residual is still above tolerance after ``max_iter`` steps.
    """
    N = np.asarray(numerator, dtype=complex)
    n = N.shape[0]
    if denominator is None:
        L = np.eye(n, dtype=complex)
    else:
        L = linalg.cholesky(np.asarray(denominator, dtype=complex), lower=True)
    C = linalg.solve_triangular(L, N, lower=True)
    C = linalg.solve_triangular(L, C.conj().T, lower=True).conj().T
    C = (C + C.conj().T) / 2
    scale = np.linalg.norm(C, 2)
    if scale == 0:
        return 0.0, np.eye(n, dtype=complex)[:, 0]

    M = C / scale
    for _ in range(n_squarings):
        M = M @ M
        M = (M + M.conj().T) / (2 * np.linalg.norm(M))
    z = M[:, int(np.argmax(np.linalg.norm(M, axis=0)))]
    z = z / np.linalg.norm(z)

    residual = np.inf
    for _ in range(max_iter):
        y = C @ z
        mu = float(np.real(np.vdot(z, y)))
        residual = np.linalg.norm(y - mu * z)
        if residual <= tol * scale:
            break
        z = y / np.linalg.norm(y)
    else:
        raise EigenConvergenceError(residual / scale)

    w = linalg.solve_triangular(L.conj().T, z, lower=False)
    w = _phase_fix(w / np.linalg.norm(w))
    return mu, w


def anti_jamming_precoder(eff: EffectiveChannels, beta_est, sigma2: float,
                          P0: float) -> PrecoderMatrix:
    """Per-user dominant generalized eigenvectors with equal power P0/K.

    ``beta_est = 0`` gives the classical leakage-based (SLNR) precoder.
    """
    K = eff.n_users
    beta_est = np.broadcast_to(np.asarray(beta_est, dtype=float), (K,))
    cols = []
    for k in range(K):
        _, w = max_eigvec(*sjnr_pencil(k, eff, beta_est, sigma2, P0))
        cols.append(w)
    W = np.sqrt(P0 / K) * np.stack(cols, axis=1)
    return PrecoderMatrix(W=W, power_budget=P0)


def _W(W):
    return W.W if isinstance(W, PrecoderMatrix) else np.asarray(W)


def sjnr_from_powers(P: np.ndarray, sigma2: float, interference=None) -> np.ndarray:
    """eta_k = P[k,k] / (sum_{u != k} P[u,k] + sigma2 + interference_k).

    ``P[u, k]`` is the mean received power of precoder k at user u.
    """
    P = np.asarray(P, dtype=float)
    extra = 0.0 if interference is None else np.asarray(interference, dtype=float)
    sig = np.diag(P)
    leak = P.sum(axis=0) - sig
    return sig / (leak + sigma2 + extra)


def sjnr_deterministic(eff: EffectiveChannels, W, sigma2: float,
                       interference=None) -> SjnrReport:
    """Leakage-form SJNR without a DIRS term, optionally with extra interference power."""
    P = np.abs(eff.h_L.conj().T @ _W(W)) ** 2
    return SjnrReport(eta=sjnr_from_powers(P, sigma2, interference), method="deterministic")


def sjnr_closed_form(eff: EffectiveChannels, W, beta, sigma2: float) -> SjnrReport:
    """Large-DIRS SJNR: every quadratic form of user k is loaded with beta_k.

    The target user's variance appears in the numerator and in every
    leakage term of its denominator.
    """
    W = _W(W)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (W.shape[1],))
    P = np.abs(eff.h_L.conj().T @ W) ** 2
    wnorm = np.sum(np.abs(W) ** 2, axis=0)
    K = W.shape[1]
    sig = np.diag(P) + beta * wnorm
    leak = P.sum(axis=0) - np.diag(P) + (K - 1) * beta * wnorm
    return SjnrReport(eta=sig / (leak + sigma2), method="closed-form")


def sjnr_monte_carlo(channels: ChannelSet, irs_state, W, sigma2: float, n_draws: int,
                     rng: np.random.Generator, alphabet, *, weights=None,
                     redraw: bool = True, interference=None) -> SjnrReport:
    """SJNR with its expectations estimated over random DIRS states.

    Channels are frozen for the interval; only the DIRS phases are
    redrawn (``n_draws`` times, or once and held when ``redraw`` is
    false). ``stderr`` is the delta-method standard error of each eta_k.
    """
    if n_draws < 100:
        raise ValueError("n_draws must be >= 100")
    W = _W(W)
    eff = effective_channels(channels, irs_state)
    legit = eff.h_L.conj().T @ W                                     # (K, K)
    K = W.shape[1]
    nd = channels.n_dirs
    if nd == 0:
        rep = sjnr_deterministic(eff, W, sigma2, interference)
        return SjnrReport(eta=rep.eta, method="monte-carlo", stderr=np.zeros(K))

    G = channels.H_AD @ W                                             # (N_D, K)
    coupling = (channels.H_DU.conj()[:, :, None] * G[:, None, :]).reshape(nd, K * K)
    phases = draw_dirs_phases(alphabet, nd, n_draws if redraw else 1, rng, weights)
    jam = (np.exp(1j * phases) @ coupling).reshape(-1, K, K)          # (T, u, k)
    power = np.abs(legit[None] + jam) ** 2
    if not redraw:
        power = np.repeat(power, n_draws, axis=0)

    P = power.mean(axis=0)
    extra = 0.0 if interference is None else np.asarray(interference, dtype=float)
    eta = sjnr_from_powers(P, sigma2, interference)

    sig_t = np.einsum("tkk->tk", power)
    den_t = power.sum(axis=1) - sig_t + sigma2 + extra
    resid = sig_t - eta[None] * den_t
    stderr = resid.std(axis=0, ddof=1) / np.sqrt(n_draws) / den_t.mean(axis=0)
    return SjnrReport(eta=eta, method="monte-carlo", stderr=stderr)
