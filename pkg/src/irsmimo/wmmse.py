"""Online digital beamforming: weighted-MMSE block coordinate descent.

For fixed per-user channels H_i (analog beams already embedded), alternates
closed-form updates of the receive filters G, MSE weights W, and precoders V
until the weighted-MSE objective

    sum_i alpha_i { tr(W_i E_i) - log det(W_i) }

stalls. Each block update is the exact minimizer of that objective over its
block, so the objective trace is non-increasing; a measured increase beyond
1e-9 raises.

Rates are computed in nats internally and reported in bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    NumericalError,
    check_finite,
    herm,
    logdet_psd,
    power_constrained_solve,
)

__all__ = [
    "LinkVariables",
    "user_rate",
    "mse_matrix",
    "update_receivers",
    "update_weights",
    "update_precoders",
    "weighted_mse_objective",
    "online_wmmse",
    "initial_precoders",
]

MONOTONE_TOL = 1e-9


@dataclass
class LinkVariables:
    """Converged per-user digital variables and rates."""

    v: np.ndarray  # (N_u, M, L) precoders
    g: np.ndarray  # (N_u, L, L) receive filters
    w: np.ndarray  # (N_u, L, L) Hermitian PSD weights
    rates: np.ndarray  # (N_u,) per-user rates
    rate_unit: str = "bits"
    mu: np.ndarray | None = None  # (N_u,) power multipliers from the last V update
    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _as_user_stack(h) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 3:
        raise ValueError(f"expected channels stacked as (N_u, L, M), got shape {h.shape}")
    return h


def user_rate(h_i: np.ndarray, v: np.ndarray, sigma2: float, i: int) -> float:
    """Achievable rate of user i in nats:
    log det(I_L + V_i^H H_i^H Jbar_i^-1 H_i V_i), with Jbar_i the
    interference-plus-noise covariance sum_{j != i} H_i V_j V_j^H H_i^H + sigma2 I.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    h_i = np.asarray(h_i, dtype=complex)
    v = np.asarray(v, dtype=complex)
    l_ant = h_i.shape[0]
    jbar = sigma2 * np.eye(l_ant, dtype=complex)
    for j in range(v.shape[0]):
        if j == i:
            continue
        hv = h_i @ v[j]
        jbar += hv @ hv.conj().T
    hv_i = h_i @ v[i]
    inner = hv_i.conj().T @ np.linalg.solve(jbar, hv_i)
    return logdet_psd(herm(np.eye(v.shape[2], dtype=complex) + inner))


def mse_matrix(
    h_i: np.ndarray, v: np.ndarray, g_i: np.ndarray, sigma2: float, i: int
) -> np.ndarray:
    """Symbol MSE matrix E_i of user i for receive filter G_i (L x L, Hermitian PSD)."""
    h_i = np.asarray(h_i, dtype=complex)
    v = np.asarray(v, dtype=complex)
    g_i = np.asarray(g_i, dtype=complex)
    l_streams = v.shape[2]
    gh = g_i.conj().T
    resid = np.eye(l_streams, dtype=complex) - gh @ (h_i @ v[i])
    e = resid @ resid.conj().T
    for j in range(v.shape[0]):
        if j == i:
            continue
        cross = gh @ (h_i @ v[j])
        e += cross @ cross.conj().T
    e += sigma2 * (gh @ g_i)
    return herm(e)


def update_receivers(h: np.ndarray, v: np.ndarray, sigma2: float) -> np.ndarray:
    """MMSE receive filters G_i = J_i^-1 H_i V_i with
    J_i = sum_j H_i V_j V_j^H H_i^H + sigma2 I (the sum includes j = i)."""
    h = _as_user_stack(h)
    v = np.asarray(v, dtype=complex)
    n_u, l_ant, _ = h.shape
    hv = np.einsum("ilm,jmc->ijlc", h, v)  # H_i V_j
    j_mat = sigma2 * np.eye(l_ant, dtype=complex)[None] + np.einsum(
        "ijlc,ijkc->ilk", hv, hv.conj()
    )
    return np.linalg.solve(j_mat, hv[np.arange(n_u), np.arange(n_u)])


def update_weights(e: np.ndarray) -> np.ndarray:
    """MSE weights W_i = E_i^-1 (batched over users)."""
    e = np.asarray(e, dtype=complex)
    eye = np.eye(e.shape[-1], dtype=complex)
    try:
        w = np.linalg.solve(e, np.broadcast_to(eye, e.shape).copy())
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"update_weights: singular MSE matrix ({exc})") from exc
    check_finite(w, "weights")
    return herm(w)


def update_precoders(
    h: np.ndarray,
    g: np.ndarray,
    w: np.ndarray,
    alpha: np.ndarray,
    p_budget: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Precoders V_i = alpha_i (K + mu_i I)^-1 H_i^H G_i W_i, with
    K = sum_j alpha_j H_j^H G_j W_j G_j^H H_j and mu_i >= 0 the smallest
    multiplier meeting tr(V_i V_i^H) <= P_i (mu = 0 when already feasible)."""
    h = _as_user_stack(h)
    g = np.asarray(g, dtype=complex)
    w = np.asarray(w, dtype=complex)
    alpha = np.asarray(alpha, dtype=float)
    p_budget = np.asarray(p_budget, dtype=float)
    n_u, _, m_ant = h.shape
    k_mat = np.zeros((m_ant, m_ant), dtype=complex)
    for j in range(n_u):
        gw = g[j] @ w[j] @ g[j].conj().T
        k_mat += alpha[j] * (h[j].conj().T @ gw @ h[j])
    k_mat = herm(k_mat)
    v = np.zeros((n_u, m_ant, w.shape[-1]), dtype=complex)
    mu = np.zeros(n_u)
    for i in range(n_u):
        rhs = alpha[i] * (h[i].conj().T @ (g[i] @ w[i]))
        v[i], mu[i] = power_constrained_solve(k_mat, rhs, p_budget[i])
    return v, mu


def weighted_mse_objective(
    h: np.ndarray,
    v: np.ndarray,
    g: np.ndarray,
    w: np.ndarray,
    alpha: np.ndarray,
    sigma2: float,
) -> float:
    """Objective sum_i alpha_i { tr(W_i E_i) - log det(W_i) }."""
    h = _as_user_stack(h)
    total = 0.0
    for i in range(h.shape[0]):
        e_i = mse_matrix(h[i], v, g[i], sigma2, i)
        total += alpha[i] * (
            float(np.real(np.trace(w[i] @ e_i))) - logdet_psd(herm(w[i]))
        )
    return total


def initial_precoders(h: np.ndarray, p_budget: np.ndarray) -> np.ndarray:
    """Full-power SVD initialization: V_i spans the L leading right singular
    vectors of H_i with equal per-stream power P_i / L."""
    h = _as_user_stack(h)
    n_u, l_ant, m_ant = h.shape
    v = np.zeros((n_u, m_ant, l_ant), dtype=complex)
    for i in range(n_u):
        _, _, vh = np.linalg.svd(h[i])
        v[i] = vh.conj().T[:, :l_ant] * np.sqrt(p_budget[i] / l_ant)
    return v


def online_wmmse(
    h: np.ndarray,
    sigma2: float,
    p_budget,
    alpha=None,
    tol: float = 1e-6,
    max_iters: int = 500,
    v0: np.ndarray | None = None,
) -> LinkVariables:
    """Run the WMMSE block coordinate descent to convergence for fixed channels.

    Stops when the relative objective decrease falls below tol or max_iters is
    reached. A single final receiver/weight refresh at the final precoders
    precedes the rate computation, so the reported rates coincide with
    sum_i alpha_i log det(W_i) (rate-MMSE duality).

    Raises NumericalError if the objective increases by more than 1e-9
    between iterations.
    """
    h = _as_user_stack(h)
    check_finite(h, "channels")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    n_u = h.shape[0]
    p_budget = np.broadcast_to(np.asarray(p_budget, dtype=float), (n_u,)).copy()
    alpha = (
        np.ones(n_u) if alpha is None else np.broadcast_to(np.asarray(alpha, dtype=float), (n_u,)).copy()
    )
    v = initial_precoders(h, p_budget) if v0 is None else np.array(v0, dtype=complex)

    trace: list[float] = []
    prev = np.inf
    mu = np.zeros(n_u)
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        g = update_receivers(h, v, sigma2)
        e = np.array([mse_matrix(h[i], v, g[i], sigma2, i) for i in range(n_u)])
        w = update_weights(e)
        v, mu = update_precoders(h, g, w, alpha, p_budget)
        obj = weighted_mse_objective(h, v, g, w, alpha, sigma2)
        if not np.isfinite(obj):
            raise NumericalError("online_wmmse: non-finite objective")
        if obj > prev + MONOTONE_TOL:
            raise NumericalError(
                f"online_wmmse: objective increased from {prev:.12e} to {obj:.12e}"
            )
        trace.append(obj)
        if np.isfinite(prev) and prev - obj <= tol * abs(prev):
            converged = True
            break
        prev = obj

    # Final refresh so rates and weights satisfy the duality identity.
    g = update_receivers(h, v, sigma2)
    e = np.array([mse_matrix(h[i], v, g[i], sigma2, i) for i in range(n_u)])
    w = update_weights(e)
    rates_nats = np.array([user_rate(h[i], v, sigma2, i) for i in range(n_u)])
    return LinkVariables(
        v=v,
        g=g,
        w=w,
        rates=rates_nats / np.log(2.0),
        rate_unit="bits",
        mu=mu,
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
    )
