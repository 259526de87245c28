"""Offline statistical-CSI optimization of the IRS analog beams.

The offline problem minimizes the Monte-Carlo average of the weighted MSE
objective over frozen random network draws, by block coordinate descent over
the per-sample digital variables (G, W, V) and the shared per-tile analog
beam vectors b_m. Viewed as a function of one tile's beam with everything
else fixed, the per-sample weighted MSE is an exact quadratic

    f(b_m) = b_m^H M_m b_m - 2 Re(u_m^H b_m) + const,

with M_m assembled from a Hadamard product of Hermitian PSD factors and u_m
from diagonal extraction of the desired-signal and cross-interference terms.
Averaging (M_m, u_m) over the frozen samples and solving the norm-ball
trust-region problem per tile yields the beam update.

Tile updates run sequentially by default (the cross-tile coupling inside u_m
is refreshed after each tile), which makes every block update an exact
minimizer and the frozen-sample objective monotonically non-increasing.
The simultaneous variant (all tiles from the previous iterate) is available
through the solver.tile_order configuration key.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import channel as channel_mod
from . import scenario as scenario_mod
from .numerics import NumericalError, check_finite, herm, pairwise_mean, power_constrained_solve
from .scenario import NAMESPACE_INIT, NAMESPACE_TRAIN, ScenarioConfig

__all__ = [
    "BeamConstraint",
    "IrsBeamSet",
    "QuadraticStats",
    "OptReport",
    "OfflineState",
    "lc_grid_point",
    "quantize_lc",
    "initial_beams",
    "build_linear_factors",
    "q_map",
    "gamma_expand",
    "accumulate_quadratic",
    "mc_expectation",
    "update_b",
    "offline_optimize",
    "offline_optimize_channels",
    "verify_theorem1",
    "receivers_and_weights",
    "frozen_weighted_mse",
    "frozen_sum_rate",
    "save_beams",
    "load_beams",
    "beam_doc",
    "beam_set_digest",
    "gc_violation",
]

BEAMS_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BeamConstraint:
    """Analog beam feasible set: norm ball (GC) or quantized unit modulus (LC)."""

    mode: str = "GC"
    n_bits: int | None = None
    rho_sq: float | None = None  # GC ball radius squared; None means P

    def resolved_rho_sq(self, p: int) -> float:
        return float(self.rho_sq) if self.rho_sq is not None else float(p)


@dataclass
class IrsBeamSet:
    """The K analog beam vectors with their constraint-mode metadata."""

    beams: np.ndarray  # (K, P)
    mode: str
    n_bits: int | None
    rho_sq: float
    config_hash: str = ""

    def phase_indices(self) -> np.ndarray | None:
        """Integer grid indices for LC beams (None in GC mode)."""
        if self.mode != "LC":
            return None
        n = 2**self.n_bits
        idx = np.mod(np.round(np.angle(self.beams) * n / (2.0 * np.pi)).astype(int), n)
        return idx


@dataclass(frozen=True)
class QuadraticStats:
    """Monte-Carlo averaged per-tile quadratic statistics."""

    m_bar: np.ndarray  # (K, P, P)
    u_bar: np.ndarray  # (K, P)
    n_samples: int


@dataclass
class OptReport:
    """Convergence record of one offline run."""

    iterations: int = 0
    delta_history: list[float] = field(default_factory=list)
    objective_history: list[float] = field(default_factory=list)
    sum_rate_history: list[float] = field(default_factory=list)
    seconds_per_iteration: list[float] = field(default_factory=list)
    converged: bool = False
    eps: float = 0.0
    max_gc_violation: float = 0.0

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "delta_history": self.delta_history,
            "objective_history": self.objective_history,
            "sum_rate_history": self.sum_rate_history,
            "seconds_per_iteration": self.seconds_per_iteration,
            "converged": self.converged,
            "eps": self.eps,
            "max_gc_violation": self.max_gc_violation,
        }


@dataclass
class OfflineState:
    """Final per-sample digital variables of the offline loop."""

    g: np.ndarray  # (N_s, N_u, L, L)
    w: np.ndarray  # (N_s, N_u, L, L)
    v: np.ndarray  # (N_s, N_u, M, L)


# ---------------------------------------------------------------------------
# Constraint handling


def lc_grid_point(indices, n_bits: int) -> np.ndarray:
    """Canonical materialization of LC grid phases exp(2j pi l / 2^n_bits).

    Every LC beam entry in the package flows through this function, so grid
    membership is testable by bit equality.
    """
    return np.exp(2j * np.pi * np.asarray(indices) / float(2**n_bits))


def quantize_lc(b: np.ndarray, n_bits: int) -> tuple[np.ndarray, np.ndarray]:
    """Project entries to unit modulus with phases on the nearest grid point."""
    n = 2**n_bits
    idx = np.mod(np.round(np.angle(b) * n / (2.0 * np.pi)).astype(int), n)
    return lc_grid_point(idx, n_bits), idx


def gc_violation(beams: np.ndarray, rho_sq: float) -> float:
    """Largest per-tile norm excess max_k (||b_k||^2 - rho_sq)."""
    return float(np.max(np.sum(np.abs(beams) ** 2, axis=-1) - rho_sq))


def initial_beams(
    k: int, p: int, constraint: BeamConstraint, rng: np.random.Generator
) -> np.ndarray:
    """Unit-modulus beams with i.i.d. uniform phases, projected to the active
    constraint. This is also the NON-OPT baseline (uncontrolled scatterers)."""
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(k, p))
    b = np.exp(1j * phases)
    if constraint.mode == "LC":
        b, _ = quantize_lc(b, constraint.n_bits)
    else:
        rho_sq = constraint.resolved_rho_sq(p)
        norms_sq = np.sum(np.abs(b) ** 2, axis=1, keepdims=True)
        scale = np.minimum(1.0, np.sqrt(rho_sq / norms_sq))
        b = b * scale
    return b


def update_b(
    m_bar: np.ndarray,
    u_bar: np.ndarray,
    constraint: BeamConstraint,
    b_current: np.ndarray | None = None,
) -> np.ndarray:
    """Exact minimizer of b^H M b - 2 Re(u^H b) over the GC norm ball,
    optionally followed by the LC grid projection.

    Interior solutions take mu = 0; otherwise the smallest boundary
    multiplier is found on the monotone power curve. With both statistics
    zero the objective is constant in b and the current beam is kept.
    """
    p = m_bar.shape[0]
    rho_sq = constraint.resolved_rho_sq(p)
    if np.linalg.norm(u_bar) == 0.0:
        if np.linalg.norm(m_bar) == 0.0 and b_current is not None:
            return np.array(b_current, dtype=complex)
        b = np.zeros(p, dtype=complex)
    else:
        b, _ = power_constrained_solve(m_bar, u_bar, rho_sq)
    if constraint.mode == "LC":
        b, _ = quantize_lc(b, constraint.n_bits)
    return b


# ---------------------------------------------------------------------------
# Quadratic-form algebra (single-sample reference forms)


def build_linear_factors(
    g_i: np.ndarray,
    v: np.ndarray,
    hbar_i: np.ndarray,
    s: np.ndarray,
    t_i: np.ndarray,
    beams: np.ndarray,
    m: int,
    j: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Shorthand factors of the tile-m, stream-j term of G_i^H H_i V_j.

    A = G_i^H T_im (L x P), C = S_m V_j (P x L),
    D = C (G_i^H Hbar_i V_j)^H, and F = C (sum_{k != m} A_ik diag(b_k) C_kj)^H
    collect the direct-channel and other-tile cross couplings.
    """
    a = g_i.conj().T @ t_i[m]
    c = s[m] @ v[j]
    d = c @ (g_i.conj().T @ hbar_i @ v[j]).conj().T
    cross = np.zeros((g_i.shape[1], v[j].shape[1]), dtype=complex)
    for k in range(s.shape[0]):
        if k == m:
            continue
        cross += (g_i.conj().T @ t_i[k]) @ (beams[k][:, None] * (s[k] @ v[j]))
    f = c @ cross.conj().T
    return a, c, d, f


def q_map(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Compact row-block form Q (L x P*L) with block m equal to Q1 * Q2[:, m]^T,
    so that Q1 diag(b) Q2 = q_map(Q1, Q2) @ gamma_expand(b)."""
    l_rows, p = q1.shape
    p2, l_cols = q2.shape
    if p2 != p:
        raise ValueError("q_map: inner dimensions do not match")
    # blocks[l, m, p] = Q1[l, p] * Q2[p, m]
    blocks = q1[:, None, :] * q2.T[None, :, :]
    return blocks.reshape(l_rows, l_cols * p)


def gamma_expand(b: np.ndarray, l: int) -> np.ndarray:
    """Sparse companion of q_map: Gamma (P*L x L) whose column m carries b in
    rows m*P .. (m+1)*P - 1, so Q1 diag(b) Q2 = q_map(Q1, Q2) @ gamma_expand(b, L)."""
    b = np.asarray(b, dtype=complex)
    return np.kron(np.eye(l, dtype=complex), b[:, None])


def accumulate_quadratic(
    g: np.ndarray,
    w: np.ndarray,
    v: np.ndarray,
    hbar: np.ndarray,
    s: np.ndarray,
    t: np.ndarray,
    beams: np.ndarray,
    m: int,
    alpha: np.ndarray,
    validate: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Single-sample quadratic statistics (M_m, u_m) of tile m.

    The per-sample weighted MSE sum_i alpha_i tr(W_i E_i), as a function of
    b_m with everything else fixed, equals b^H M b - 2 Re(u^H b) + const with

        M = sum_i alpha_i (A_im^H W_i A_im) had (sum_j C_mj C_mj^H)^T
        u = sum_i alpha_i diagvec(A_im^H W_i (C_mi^H - sum_j (D_imj + F_imj)^H))

    (had = Hadamard product; diagvec = main diagonal of the matrix product).
    M is Hermitian PSD as a Hadamard product of PSD factors.
    """
    n_u, _, _ = hbar.shape
    p = s.shape[1]
    phi = np.zeros((p, p), dtype=complex)
    psi = np.zeros((p, p), dtype=complex)
    u = np.zeros(p, dtype=complex)
    for i in range(n_u):
        a_im = g[i].conj().T @ t[i, m]
        phi += alpha[i] * (a_im.conj().T @ w[i] @ a_im)
        inner = (s[m] @ v[i]).conj().T  # C_mi^H
        for j in range(n_u):
            _, c, d, f = build_linear_factors(g[i], v, hbar[i], s, t[i], beams, m, j)
            if i == 0:
                psi += c @ c.conj().T
            inner = inner - (d + f).conj().T
        u += alpha[i] * np.einsum("pl,lq,qp->p", a_im.conj().T, w[i], inner)
    m_mat = herm(phi * psi.T)
    if validate:
        eigs = np.linalg.eigvalsh(m_mat)
        scale = max(float(eigs[-1]), 0.0)
        if eigs[0] < -1e-9 * max(scale, 1e-300):
            raise NumericalError(
                f"accumulate_quadratic: M not PSD (lambda_min = {eigs[0]:.3e})"
            )
    return m_mat, u


def mc_expectation(m_samples: np.ndarray, u_samples: np.ndarray) -> QuadraticStats:
    """Average per-sample statistics into QuadraticStats.

    Uses the recursive-halving mean, so the reduction is order-independent
    and the mean over an even split equals the average of the half means
    bit-exactly. Validates the Hermitian/PSD contract per tile.
    """
    m_samples = np.asarray(m_samples)
    u_samples = np.asarray(u_samples)
    if m_samples.ndim == 3:  # single tile: (N_s, P, P)
        m_samples = m_samples[:, None]
        u_samples = u_samples[:, None]
    m_bar = pairwise_mean(m_samples, axis=0)
    u_bar = pairwise_mean(u_samples, axis=0)
    for k in range(m_bar.shape[0]):
        dev = np.linalg.norm(m_bar[k] - m_bar[k].conj().T)
        if dev > 1e-10 * max(np.linalg.norm(m_bar[k]), 1e-300):
            raise NumericalError(f"mc_expectation: tile {k} average is not Hermitian")
        eigs = np.linalg.eigvalsh(herm(m_bar[k]))
        if eigs[0] < -1e-9 * max(float(eigs[-1]), 1e-300):
            raise NumericalError(
                f"mc_expectation: tile {k} average not PSD (lambda_min = {eigs[0]:.3e})"
            )
    return QuadraticStats(m_bar=m_bar, u_bar=u_bar, n_samples=m_samples.shape[0])


# ---------------------------------------------------------------------------
# Batched sample-stack helpers


def composite_batch(
    hbar: np.ndarray, s: np.ndarray, t: np.ndarray, beams: np.ndarray
) -> np.ndarray:
    """H (N_s, N_u, L, M) = Hbar + sum_k T_ik diag(b_k) S_k over the sample stack."""
    return hbar + np.einsum("niklp,kp,kpm->nilm", t, beams, s)


def _receivers_batch(h: np.ndarray, v: np.ndarray, sigma2: float) -> np.ndarray:
    n_s, n_u, l_ant, _ = h.shape
    hv = np.einsum("nilm,njmc->nijlc", h, v)
    j_mat = sigma2 * np.eye(l_ant, dtype=complex)[None, None] + np.einsum(
        "nijlc,nijkc->nilk", hv, hv.conj()
    )
    idx = np.arange(n_u)
    return np.linalg.solve(j_mat, hv[:, idx, idx])


def _mse_batch(h: np.ndarray, v: np.ndarray, g: np.ndarray, sigma2: float) -> np.ndarray:
    n_s, n_u, l_ant, _ = h.shape
    l_str = v.shape[-1]
    hv = np.einsum("nilm,njmc->nijlc", h, v)
    gh = np.swapaxes(g.conj(), -1, -2)
    cross = np.einsum("nilk,nijkc->nijlc", gh, hv)
    idx = np.arange(n_u)
    total = np.einsum("nijlc,nijkc->nilk", cross, cross.conj())
    own = cross[:, idx, idx]
    eye = np.eye(l_str, dtype=complex)
    e = total + eye[None, None] - own - np.swapaxes(own.conj(), -1, -2)
    e = e + sigma2 * np.einsum("nilk,nikc->nilc", gh, g)
    return 0.5 * (e + np.swapaxes(e.conj(), -1, -2))


def _weights_batch(e: np.ndarray) -> np.ndarray:
    eye = np.eye(e.shape[-1], dtype=complex)
    try:
        w = np.linalg.solve(e, np.broadcast_to(eye, e.shape).copy())
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"offline weights: singular MSE matrix ({exc})") from exc
    return 0.5 * (w + np.swapaxes(w.conj(), -1, -2))


def _precoders_batch(
    h: np.ndarray, g: np.ndarray, w: np.ndarray, alpha: np.ndarray, p_budget: np.ndarray
) -> np.ndarray:
    n_s, n_u, _, m_ant = h.shape
    gwg = np.einsum("nilk,nikc,nidc->nild", g, w, g.conj())
    k_mat = np.einsum("j,njlm,njlk,njkr->nmr", alpha, h.conj(), gwg, h)
    v = np.zeros((n_s, n_u, m_ant, w.shape[-1]), dtype=complex)
    for n in range(n_s):
        k_n = herm(k_mat[n])
        for i in range(n_u):
            rhs = alpha[i] * (h[n, i].conj().T @ (g[n, i] @ w[n, i]))
            v[n, i], _ = power_constrained_solve(k_n, rhs, p_budget[i])
    return v


def _logdet_batch(mats: np.ndarray) -> np.ndarray:
    """log det of a stack of Hermitian positive-definite matrices (nats)."""
    try:
        chol = np.linalg.cholesky(0.5 * (mats + np.swapaxes(mats.conj(), -1, -2)))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"batched log det: matrix not positive definite ({exc})") from exc
    diag = np.real(np.diagonal(chol, axis1=-2, axis2=-1))
    return 2.0 * np.sum(np.log(diag), axis=-1)


def _objective_batch(
    h: np.ndarray,
    v: np.ndarray,
    g: np.ndarray,
    w: np.ndarray,
    alpha: np.ndarray,
    sigma2: float,
) -> float:
    """Frozen-sample objective: mean_n sum_i alpha_i (tr(W E) - log det W)."""
    e = _mse_batch(h, v, g, sigma2)
    tr_we = np.real(np.einsum("nilk,nikl->ni", w, e))
    ld = _logdet_batch(w)
    per_sample = np.einsum("i,ni->n", alpha, tr_we - ld)
    return float(pairwise_mean(per_sample))


def frozen_weighted_mse(
    hbar: np.ndarray,
    s: np.ndarray,
    t: np.ndarray,
    beams: np.ndarray,
    g: np.ndarray,
    w: np.ndarray,
    v: np.ndarray,
    sigma2: float,
    alpha: np.ndarray,
) -> float:
    """mean_n sum_i alpha_i tr(W_i E_i) as a function of the beams, with the
    digital variables frozen. Reference evaluator for the gradient oracles."""
    h = composite_batch(hbar, s, t, beams)
    e = _mse_batch(h, v, g, sigma2)
    tr_we = np.real(np.einsum("nilk,nikl->ni", w, e))
    return float(pairwise_mean(np.einsum("i,ni->n", alpha, tr_we)))


def frozen_sum_rate(
    hbar: np.ndarray,
    s: np.ndarray,
    t: np.ndarray,
    beams: np.ndarray,
    v: np.ndarray,
    sigma2: float,
    alpha: np.ndarray,
    h: np.ndarray | None = None,
) -> float:
    """mean_n sum_i alpha_i R_i (nats) with the precoders frozen."""
    if h is None:
        h = composite_batch(hbar, s, t, beams)
    n_s, n_u, l_ant, _ = h.shape
    hv = np.einsum("nilm,njmc->nijlc", h, v)
    idx = np.arange(n_u)
    total = np.einsum("nijlc,nijkc->nilk", hv, hv.conj())
    own = hv[:, idx, idx]
    jbar = sigma2 * np.eye(l_ant, dtype=complex)[None, None] + total - np.einsum(
        "nilc,nikc->nilk", own, own.conj()
    )
    inner = np.einsum("nilc,nilk->nick", own.conj(), np.linalg.solve(jbar, own))
    eye = np.eye(v.shape[-1], dtype=complex)
    rates = _logdet_batch(eye[None, None] + inner)
    return float(pairwise_mean(np.einsum("i,ni->n", alpha, rates)))


def receivers_and_weights(
    hbar: np.ndarray,
    s: np.ndarray,
    t: np.ndarray,
    beams: np.ndarray,
    v: np.ndarray,
    sigma2: float,
) -> tuple[np.ndarray, np.ndarray]:
    """MMSE receivers and W = E^-1 for the sample stack at the given beams."""
    h = composite_batch(hbar, s, t, beams)
    g = _receivers_batch(h, v, sigma2)
    w = _weights_batch(_mse_batch(h, v, g, sigma2))
    return g, w


def _tile_stats_batch(
    a_m: np.ndarray,
    c_m: np.ndarray,
    ghv: np.ndarray,
    z_m: np.ndarray,
    w: np.ndarray,
    alpha: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample (M_m, u_m) stacks from cached tile factors.

    a_m: (N_s, N_u, L, P) = G_i^H T_im;  c_m: (N_s, N_u, P, L) = S_m V_j;
    ghv: (N_s, N_u, N_u, L, L) = G_i^H H_i V_j at the current beams;
    z_m: (N_s, N_u, N_u, L, L) = A_im diag(b_m) C_mj (tile m's own term).
    """
    phi = np.einsum("i,niqp,niql,nilt->npt", alpha, a_m.conj(), w, a_m)
    psi = np.einsum("njpl,njtl->npt", c_m, c_m.conj())
    m_stack = phi * np.swapaxes(psi, -1, -2)
    r = ghv - z_m
    sc = np.einsum("nijqc,njpc->niqp", r, c_m.conj())
    inner = np.swapaxes(c_m.conj(), -1, -2) - sc  # C_mi^H - sum_j R_ij C_mj^H
    u_stack = np.einsum("i,niqp,niql,nilp->np", alpha, a_m.conj(), w, inner)
    return m_stack, u_stack


# ---------------------------------------------------------------------------
# Main offline loop


def offline_optimize_channels(
    hbar: np.ndarray,
    s: np.ndarray,
    t: np.ndarray,
    *,
    sigma2: float,
    p_budget,
    alpha=None,
    constraint: BeamConstraint | None = None,
    beams0: np.ndarray,
    eps: float,
    max_iters: int = 200,
    tile_order: str = "sequential",
    v0: np.ndarray | None = None,
) -> tuple[np.ndarray, OptReport, OfflineState]:
    """Run the offline beam optimization on a frozen stack of channel sets.

    hbar (N_s, N_u, L, M), s (K, P, M) shared across samples,
    t (N_s, N_u, K, L, P). One BCD pass per outer iteration: a single
    (G, W, V) step per sample, then one constrained update of every tile's
    beam; stops when the concatenated beam change Delta falls below eps.
    """
    hbar = np.asarray(hbar, dtype=complex)
    s = np.asarray(s, dtype=complex)
    t = np.asarray(t, dtype=complex)
    check_finite(hbar, "hbar")
    check_finite(s, "s")
    check_finite(t, "t")
    n_s, n_u, l_ant, m_ant = hbar.shape
    k_tiles, p_elem, _ = s.shape
    if tile_order not in ("sequential", "simultaneous"):
        raise ValueError(f"tile_order must be 'sequential' or 'simultaneous', got {tile_order!r}")
    constraint = constraint or BeamConstraint()
    rho_sq = constraint.resolved_rho_sq(p_elem)
    alpha = np.ones(n_u) if alpha is None else np.broadcast_to(np.asarray(alpha, float), (n_u,)).copy()
    p_budget = np.broadcast_to(np.asarray(p_budget, dtype=float), (n_u,)).copy()

    beams = np.array(beams0, dtype=complex)
    if beams.shape != (k_tiles, p_elem):
        raise ValueError(f"beams0 shape {beams.shape} does not match (K, P) = {(k_tiles, p_elem)}")

    if v0 is None:
        h0 = composite_batch(hbar, s, t, beams)
        _, _, vh = np.linalg.svd(h0)
        v = np.swapaxes(vh.conj(), -1, -2)[:, :, :, :l_ant] * np.sqrt(
            p_budget[None, :, None, None] / l_ant
        )
    else:
        v = np.array(v0, dtype=complex)

    report = OptReport(eps=float(eps))
    g = w = None
    for _ in range(max_iters):
        t_start = time.perf_counter()
        beams_prev = beams.copy()

        # One BCD step of the digital variables at the current beams.
        h = composite_batch(hbar, s, t, beams)
        g = _receivers_batch(h, v, sigma2)
        w = _weights_batch(_mse_batch(h, v, g, sigma2))
        v = _precoders_batch(h, g, w, alpha, p_budget)

        # Cached cross coupling at the current beams.
        gh_h = np.einsum("nilq,nilm->niqm", g.conj(), h)
        ghv = np.einsum("niqm,njmc->nijqc", gh_h, v)

        if tile_order == "sequential":
            for m in range(k_tiles):
                a_m = np.einsum("nilq,nilp->niqp", g.conj(), t[:, :, m])
                c_m = np.einsum("pm,njml->njpl", s[m], v)
                z_m = np.einsum("niqp,p,njpc->nijqc", a_m, beams[m], c_m)
                m_stack, u_stack = _tile_stats_batch(a_m, c_m, ghv, z_m, w, alpha)
                m_bar = herm(pairwise_mean(m_stack, axis=0))
                u_bar = pairwise_mean(u_stack, axis=0)
                b_new = update_b(m_bar, u_bar, constraint, b_current=beams[m])
                z_new = np.einsum("niqp,p,njpc->nijqc", a_m, b_new, c_m)
                ghv += z_new - z_m
                beams[m] = b_new
        else:
            updates = np.empty_like(beams)
            for m in range(k_tiles):
                a_m = np.einsum("nilq,nilp->niqp", g.conj(), t[:, :, m])
                c_m = np.einsum("pm,njml->njpl", s[m], v)
                z_m = np.einsum("niqp,p,njpc->nijqc", a_m, beams[m], c_m)
                m_stack, u_stack = _tile_stats_batch(a_m, c_m, ghv, z_m, w, alpha)
                m_bar = herm(pairwise_mean(m_stack, axis=0))
                u_bar = pairwise_mean(u_stack, axis=0)
                updates[m] = update_b(m_bar, u_bar, constraint, b_current=beams[m])
            beams = updates

        if constraint.mode == "GC":
            report.max_gc_violation = max(report.max_gc_violation, gc_violation(beams, rho_sq))
            if gc_violation(beams, rho_sq) > 1e-9:
                raise NumericalError("offline beam update violated the GC norm constraint")

        delta = float(np.linalg.norm(beams - beams_prev))
        h_end = composite_batch(hbar, s, t, beams)
        obj = _objective_batch(h_end, v, g, w, alpha, sigma2)
        if not np.isfinite(obj):
            raise NumericalError(
                f"offline objective non-finite at iteration {report.iterations + 1}"
            )
        rate = frozen_sum_rate(hbar, s, t, beams, v, sigma2, alpha, h=h_end)

        report.iterations += 1
        report.delta_history.append(delta)
        report.objective_history.append(obj)
        report.sum_rate_history.append(rate / np.log(2.0))
        report.seconds_per_iteration.append(time.perf_counter() - t_start)
        if delta <= eps:
            report.converged = True
            break

    state = OfflineState(g=g, w=w, v=v)
    return beams, report, state


def offline_optimize(cfg: ScenarioConfig) -> tuple[IrsBeamSet, OptReport]:
    """Full offline run from a scenario config: draw the frozen training
    samples, synthesize their channels, optimize the beams."""
    geometry = scenario_mod.build_antenna_positions(cfg)
    cfg_hash = scenario_mod.config_hash(cfg)
    s = channel_mod.bs_irs_channels(geometry, cfg)
    hbar_list = []
    t_list = []
    for n in range(cfg.solver.n_samples):
        sample = scenario_mod.draw_sample(cfg, n, namespace=NAMESPACE_TRAIN)
        cs = channel_mod.build_channel_set(sample, geometry, cfg, s=s, cfg_hash=cfg_hash)
        hbar_list.append(cs.hbar)
        t_list.append(cs.t)
    hbar = np.array(hbar_list)
    t = np.array(t_list)

    constraint = BeamConstraint(
        mode=cfg.constraint.mode, n_bits=cfg.constraint.n_bits, rho_sq=cfg.rho_sq()
    )
    rng = np.random.default_rng(
        np.random.SeedSequence(cfg.seed, spawn_key=(NAMESPACE_INIT, 0, 0))
    )
    beams0 = initial_beams(cfg.k_total, cfg.p_per_tile, constraint, rng)
    beams, report, _ = offline_optimize_channels(
        hbar,
        s,
        t,
        sigma2=cfg.noise_power_w(),
        p_budget=cfg.power_budgets_w(),
        alpha=cfg.alpha(),
        constraint=constraint,
        beams0=beams0,
        eps=cfg.eps_offline(),
        max_iters=cfg.solver.max_offline_iters,
        tile_order=cfg.solver.tile_order,
    )
    beam_set = IrsBeamSet(
        beams=beams,
        mode=constraint.mode,
        n_bits=constraint.n_bits,
        rho_sq=constraint.resolved_rho_sq(cfg.p_per_tile),
        config_hash=cfg_hash,
    )
    return beam_set, report


# ---------------------------------------------------------------------------
# Stationarity cross-check


def verify_theorem1(
    hbar: np.ndarray,
    s: np.ndarray,
    t: np.ndarray,
    beams: np.ndarray,
    v: np.ndarray,
    sigma2: float,
    alpha=None,
    fd_step: float = 1e-6,
    stale_w: np.ndarray | None = None,
) -> dict:
    """Compare the closed-form beam gradient of the averaged weighted-MSE
    objective against finite differences of the negated averaged weighted
    sum-rate.

    With MMSE receivers and W = E^-1 at the evaluation point the two
    gradients coincide; passing stale_w (weights from a different beam set)
    breaks the premise and the deviation becomes material.

    Returns a report dict with the per-tile and maximum relative deviations.
    """
    hbar = np.asarray(hbar, dtype=complex)
    s = np.asarray(s, dtype=complex)
    t = np.asarray(t, dtype=complex)
    beams = np.asarray(beams, dtype=complex)
    n_s, n_u, l_ant, m_ant = hbar.shape
    k_tiles, p_elem, _ = s.shape
    alpha = np.ones(n_u) if alpha is None else np.broadcast_to(np.asarray(alpha, float), (n_u,)).copy()

    h = composite_batch(hbar, s, t, beams)
    g = _receivers_batch(h, v, sigma2)
    w = _weights_batch(_mse_batch(h, v, g, sigma2)) if stale_w is None else stale_w

    gh_h = np.einsum("nilq,nilm->niqm", g.conj(), h)
    ghv = np.einsum("niqm,njmc->nijqc", gh_h, v)

    grad_closed = np.zeros((k_tiles, p_elem), dtype=complex)
    for m in range(k_tiles):
        a_m = np.einsum("nilq,nilp->niqp", g.conj(), t[:, :, m])
        c_m = np.einsum("pm,njml->njpl", s[m], v)
        z_m = np.einsum("niqp,p,njpc->nijqc", a_m, beams[m], c_m)
        m_stack, u_stack = _tile_stats_batch(a_m, c_m, ghv, z_m, w, alpha)
        m_bar = herm(pairwise_mean(m_stack, axis=0))
        u_bar = pairwise_mean(u_stack, axis=0)
        grad_closed[m] = 2.0 * (m_bar @ beams[m] - u_bar)

    def theta2(b: np.ndarray) -> float:
        return -frozen_sum_rate(hbar, s, t, b, v, sigma2, alpha)

    grad_fd = np.zeros((k_tiles, p_elem), dtype=complex)
    for m in range(k_tiles):
        for p in range(p_elem):
            for direction in (1.0, 1.0j):
                bp = beams.copy()
                bp[m, p] += fd_step * direction
                bm = beams.copy()
                bm[m, p] -= fd_step * direction
                slope = (theta2(bp) - theta2(bm)) / (2.0 * fd_step)
                grad_fd[m, p] += slope * direction

    per_tile = np.array(
        [
            np.linalg.norm(grad_closed[m] - grad_fd[m])
            / max(np.linalg.norm(grad_fd[m]), 1e-300)
            for m in range(k_tiles)
        ]
    )
    return {
        "max_rel_deviation": float(per_tile.max()),
        "per_tile_rel_deviation": per_tile.tolist(),
        "fd_step": fd_step,
        "stale_weights": stale_w is not None,
    }


# ---------------------------------------------------------------------------
# Beam-set serialization


def beam_doc(beam_set: IrsBeamSet) -> dict:
    """Canonical JSON-able document for a beam set (also the file payload)."""
    idx = beam_set.phase_indices()
    return {
        "format_version": BEAMS_FORMAT_VERSION,
        "kind": "irs-beam-set",
        "mode": beam_set.mode,
        "n_bits": beam_set.n_bits,
        "rho_sq": beam_set.rho_sq,
        "config_hash": beam_set.config_hash,
        "tiles": [
            [[float(np.real(x)), float(np.imag(x))] for x in tile] for tile in beam_set.beams
        ],
        "phase_indices": None if idx is None else idx.tolist(),
    }


def beam_set_digest(beam_set: IrsBeamSet) -> str:
    """SHA-256 over the canonical beam-set document."""
    payload = json.dumps(beam_doc(beam_set), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def save_beams(path, beam_set: IrsBeamSet) -> None:
    """Versioned JSON dump with per-tile (re, im) pairs and constraint metadata."""
    doc = beam_doc(beam_set)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_beams(path) -> IrsBeamSet:
    """Load a beam-set file; LC beams re-materialize from their grid indices
    so entries are bit-identical to the canonical grid points."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != BEAMS_FORMAT_VERSION:
        raise IOError(f"unsupported beam-set format version {version!r}")
    if doc.get("kind") != "irs-beam-set":
        raise IOError("not a beam-set file")
    beams = np.array(
        [[complex(re, im) for re, im in tile] for tile in doc["tiles"]], dtype=complex
    )
    if doc["mode"] == "LC" and doc.get("phase_indices") is not None:
        beams = lc_grid_point(np.array(doc["phase_indices"], dtype=int), doc["n_bits"])
    return IrsBeamSet(
        beams=beams,
        mode=doc["mode"],
        n_bits=doc["n_bits"],
        rho_sq=doc["rho_sq"],
        config_hash=doc.get("config_hash", ""),
    )
