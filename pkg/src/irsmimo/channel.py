"""Channel synthesis for one scenario sample.

Direct BS-UE links follow a clustered NLOS model (optionally with an LOS
component gated by the blockage indicator), IRS links are near-field LOS with
a per-element cosine-power cell pattern, and the composite downlink channel
embeds the analog beams as H_i(B) = Hbar_i + sum_k T_ik diag(b_k) S_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import NumericalError, check_finite
from .scenario import ArrayGeometry, ScenarioConfig, ScenarioSample, config_hash

__all__ = [
    "ChannelSet",
    "pathloss_nlos_db",
    "cell_pattern",
    "direct_channel",
    "bs_irs_channel",
    "irs_ue_channel",
    "composite_channel",
    "build_channel_set",
    "bs_irs_channels",
    "clamp_count",
    "reset_clamp_count",
    "save_channel_set",
    "load_channel_set",
]

PATHLOSS_EXPONENTS = {"IO": 3.83, "SM": 3.21}
CHANNEL_SET_VERSION = 1

# Diagnostic counter for sub-reference-distance clamps (d < 1 m).
_clamp_count = 0


def clamp_count() -> int:
    """Number of distances clamped to the 1 m reference so far (process-wide)."""
    return _clamp_count


def reset_clamp_count() -> None:
    global _clamp_count
    _clamp_count = 0


def pathloss_nlos_db(d, profile: str, pl0_db: float):
    """NLOS large-scale gain in dB: -PL0 - 10 n_e log10(d).

    The exponent n_e is 3.83 for the indoor-office profile and 3.21 for the
    shopping-mall profile. Distances below the 1 m reference are clamped to
    1 m and counted in the module diagnostics counter.
    """
    global _clamp_count
    if profile not in PATHLOSS_EXPONENTS:
        raise ValueError(f"unknown path-loss profile {profile!r}")
    d = np.asarray(d, dtype=float)
    clipped = np.maximum(d, 1.0)
    n_clamped = int(np.count_nonzero(d < 1.0))
    if n_clamped:
        _clamp_count += n_clamped
    out = -pl0_db - 10.0 * PATHLOSS_EXPONENTS[profile] * np.log10(clipped)
    return float(out) if out.ndim == 0 else out


def cell_pattern(theta, q: float):
    """Normalized unit-cell power pattern: cos^q(theta) on [0, pi/2], else 0."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < -1e-12) or np.any(theta > np.pi + 1e-12):
        raise ValueError("cell_pattern: theta must lie in [0, pi]")
    out = np.where(theta < np.pi / 2.0, np.cos(np.minimum(theta, np.pi / 2.0)) ** q, 0.0)
    return float(out) if out.ndim == 0 else out


def _pairwise_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances between rows of a (n,3) and rows of b (m,3) -> (n, m)."""
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)


def direct_channel(
    sample: ScenarioSample, geometry: ArrayGeometry, cfg: ScenarioConfig
) -> np.ndarray:
    """Direct BS-UE channel matrices Hbar, shape (N_u, L, M).

    Entry (n, m) of link i is
        x_d * beta_los(m, n) * exp(-j 2 pi |t_m - r_n| / lambda)
        + beta_nlos / (N_p N_c) * sum_ql alpha_ql
            * exp(-j 2 pi (|t_m - p_ql| + |r_n - p_ql|) / lambda)
    with beta_los = sqrt(Gt Gr) lambda / (4 pi |t_m - r_n|) per element pair
    and beta_nlos the profile path loss at the array-center distance.
    """
    lam = cfg.wavelength
    gt = 10.0 ** (cfg.channel.tx_gain_db / 10.0)
    gr = 10.0 ** (cfg.channel.rx_gain_db / 10.0)
    bs_pos = geometry.bs
    bs_center = np.array(cfg.bs.position, dtype=float)
    n_u = cfg.ue.count
    l_ant = cfg.ue.n_antennas
    m_ant = bs_pos.shape[0]
    n_c = cfg.channel.n_clusters
    n_p = cfg.channel.n_paths

    h = np.zeros((n_u, l_ant, m_ant), dtype=complex)
    for i in range(n_u):
        r_elems = sample.ue_elements[i]
        d_los = _pairwise_dist(r_elems, bs_pos)
        if np.any(d_los == 0.0):
            raise NumericalError("direct_channel: coincident BS and UE elements")
        if sample.x_d[i] != 0.0:
            beta_los = math.sqrt(gt * gr) * lam / (4.0 * np.pi * d_los)
            h[i] += sample.x_d[i] * beta_los * np.exp(-2j * np.pi * d_los / lam)
        if n_c > 0:
            d_center = np.linalg.norm(bs_center - sample.ue_centers[i])
            beta_nlos = 10.0 ** (
                pathloss_nlos_db(d_center, cfg.channel.profile, cfg.pl0_db()) / 20.0
            )
            pts = sample.path_points[i].reshape(-1, 3)
            alph = sample.fading[i].reshape(-1)
            d_t = _pairwise_dist(pts, bs_pos)  # (QP, M)
            d_r = _pairwise_dist(pts, r_elems)  # (QP, L)
            if np.any(d_t == 0.0) or np.any(d_r == 0.0):
                raise NumericalError("direct_channel: path point coincides with an element")
            e_t = np.exp(-2j * np.pi * d_t / lam)
            e_r = np.exp(-2j * np.pi * d_r / lam)
            h[i] += (beta_nlos / (n_p * n_c)) * np.einsum("p,pn,pm->nm", alph, e_r, e_t)
    check_finite(h, "direct channel")
    return h


def _los_link(
    elems: np.ndarray, normal: np.ndarray, other: np.ndarray, gain: float, cfg: ScenarioConfig
) -> np.ndarray:
    """Near-field LOS block between IRS elements (rows) and an array (cols).

    Per element pair: sqrt(gain * Gc * F(theta)) * lambda / (4 pi d) * e^{-j2pi d/lambda},
    with theta the angle at the IRS element between the outgoing direction and
    the wall normal (pattern null past grazing).
    """
    lam = cfg.wavelength
    gc = cfg.cell_gain()
    d = _pairwise_dist(elems, other)
    if np.any(d == 0.0):
        raise NumericalError("IRS link: coincident elements")
    cos_t = ((other[None, :, :] - elems[:, None, :]) @ normal) / d
    theta = np.arccos(np.clip(cos_t, -1.0, 1.0))
    f = cell_pattern(theta, cfg.channel.cell_q)
    return np.sqrt(gain * gc * f) * lam / (4.0 * np.pi * d) * np.exp(-2j * np.pi * d / lam)


def bs_irs_channel(geometry: ArrayGeometry, cfg: ScenarioConfig, k: int) -> np.ndarray:
    """BS to IRS-tile-k channel S_k, shape (P, M). Deterministic given geometry."""
    gt = 10.0 ** (cfg.channel.tx_gain_db / 10.0)
    return _los_link(geometry.tiles[k], geometry.tile_normals[k], geometry.bs, gt, cfg)


def bs_irs_channels(geometry: ArrayGeometry, cfg: ScenarioConfig) -> np.ndarray:
    """All S_k stacked, shape (K, P, M); sample-independent, compute once."""
    return np.array([bs_irs_channel(geometry, cfg, k) for k in range(len(geometry.tiles))])


def irs_ue_channel(
    sample: ScenarioSample, geometry: ArrayGeometry, cfg: ScenarioConfig, i: int, k: int
) -> np.ndarray:
    """IRS-tile-k to UE-i channel T_ik, shape (L, P)."""
    gr = 10.0 ** (cfg.channel.rx_gain_db / 10.0)
    block = _los_link(
        geometry.tiles[k], geometry.tile_normals[k], sample.ue_elements[i], gr, cfg
    )
    return block.T  # (P, L) -> (L, P)


@dataclass(frozen=True)
class ChannelSet:
    """Per-sample channel matrices: direct links, BS-IRS tiles, IRS-UE tiles."""

    hbar: np.ndarray  # (N_u, L, M)
    s: np.ndarray  # (K, P, M)
    t: np.ndarray  # (N_u, K, L, P)
    sample_index: int
    config_hash: str


def build_channel_set(
    sample: ScenarioSample,
    geometry: ArrayGeometry,
    cfg: ScenarioConfig,
    s: np.ndarray | None = None,
    cfg_hash: str | None = None,
) -> ChannelSet:
    """Assemble the full ChannelSet for one sample.

    S is sample-independent; pass a precomputed stack to skip rebuilding it
    inside evaluation loops.
    """
    if s is None:
        s = bs_irs_channels(geometry, cfg)
    k_total = len(geometry.tiles)
    t = np.array(
        [
            [irs_ue_channel(sample, geometry, cfg, i, k) for k in range(k_total)]
            for i in range(cfg.ue.count)
        ]
    )
    hbar = direct_channel(sample, geometry, cfg)
    return ChannelSet(
        hbar=hbar,
        s=s,
        t=t,
        sample_index=sample.index,
        config_hash=cfg_hash if cfg_hash is not None else config_hash(cfg),
    )


def composite_channel(channel_set: ChannelSet, beams: np.ndarray) -> np.ndarray:
    """Composite channels H_i(B) = Hbar_i + sum_k T_ik diag(b_k) S_k, (N_u, L, M)."""
    beams = np.asarray(beams, dtype=complex)
    k = channel_set.s.shape[0]
    if beams.shape != (k, channel_set.s.shape[1]):
        raise ValueError(
            f"beam set shape {beams.shape} does not match channel tiling "
            f"(K={k}, P={channel_set.s.shape[1]})"
        )
    return channel_set.hbar + np.einsum(
        "iklp,kp,kpm->ilm", channel_set.t, beams, channel_set.s
    )


def save_channel_set(path, cs: ChannelSet) -> None:
    """Versioned binary dump (NumPy .npz container, little-endian complex128)."""
    np.savez(
        path,
        version=np.array([CHANNEL_SET_VERSION]),
        config_hash=np.array([cs.config_hash]),
        sample_index=np.array([cs.sample_index]),
        hbar=cs.hbar.astype("<c16"),
        s=cs.s.astype("<c16"),
        t=cs.t.astype("<c16"),
    )


def load_channel_set(path, expected_hash: str | None = None) -> ChannelSet:
    """Load a dumped ChannelSet; optionally enforce the config hash key."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"][0])
        if version != CHANNEL_SET_VERSION:
            raise IOError(f"unsupported channel set version {version}")
        stored_hash = str(data["config_hash"][0])
        if expected_hash is not None and stored_hash != expected_hash:
            raise ValueError(
                f"channel set config hash {stored_hash[:12]} does not match "
                f"expected {expected_hash[:12]}"
            )
        return ChannelSet(
            hbar=data["hbar"].astype(complex),
            s=data["s"].astype(complex),
            t=data["t"].astype(complex),
            sample_index=int(data["sample_index"][0]),
            config_hash=stored_hash,
        )
