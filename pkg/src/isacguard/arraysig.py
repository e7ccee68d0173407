"""Uniform linear array signal model.

Steering vectors, the DFT beam codebook, narrowband multipath channel
realizations, noisy single-snapshot pilot reception and grid-based AoA
estimation.  Everything is a pure function over an explicit ``numpy`` random
generator, so trials can be fanned out across workers as long as each worker
owns its own substream.

Conventions fixed here and relied on everywhere else:

* element n of the steering vector is exp(j*2*pi*spacing*n*sin(angle)),
  spacing in wavelengths;
* pilot SNR is dominant-path power over per-element noise power;
* the AoA grid covers [sector_min, sector_max] inclusive and ties resolve
  toward the smaller angle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class ArrayConfig:
    """Antenna geometry and the angular sector served by the codebook."""

    num_elements: int = 16
    element_spacing: float = 0.5  # wavelengths
    sector_min: float = -50.0  # degrees
    sector_max: float = 50.0

    def __post_init__(self):
        if self.num_elements < 1:
            raise ValueError("num_elements must be >= 1")
        if self.element_spacing <= 0:
            raise ValueError("element_spacing must be > 0")
        if not self.sector_min < self.sector_max:
            raise ValueError("sector_min must be < sector_max")


@dataclass(frozen=True)
class Codebook:
    """Ordered unit-norm analog beams with their pointing angles."""

    beams: np.ndarray  # (num_beams, num_elements) complex
    beam_angles: np.ndarray  # degrees, strictly increasing

    def __post_init__(self):
        norms = np.linalg.norm(self.beams, axis=1)
        if not np.all(np.abs(norms - 1.0) <= 1e-9):
            raise ValueError("codebook beams must have unit norm")
        if np.any(np.diff(self.beam_angles) <= 0) and len(self.beam_angles) > 1:
            raise ValueError("beam angles must be strictly increasing")

    @property
    def num_beams(self) -> int:
        return self.beams.shape[0]


@dataclass(frozen=True)
class PathSpec:
    """One propagation path: angle, relative gain and phase behaviour.

    ``phase_rad=None`` marks the phase as drawn uniformly per trial.  The
    dominant path carries 0 dB by convention; all others are negative.
    """

    angle_deg: float
    gain_db: float = 0.0
    phase_rad: float | None = None
    angle_jitter_std_deg: float = 0.0

    def __post_init__(self):
        if abs(self.angle_deg) > 90.0:
            raise ValueError("path angle must lie in [-90, 90] degrees")
        if self.gain_db > 0.0:
            raise ValueError("path gains are relative to the dominant path (<= 0 dB)")
        if self.angle_jitter_std_deg < 0.0:
            raise ValueError("angle jitter std must be >= 0")


@dataclass(frozen=True)
class ChannelRealization:
    vector: np.ndarray  # (num_elements,) complex
    realized_angles: tuple[float, ...]
    dominant_power: float = 1.0  # per-element power of the strongest path

    def __post_init__(self):
        if not np.all(np.isfinite(self.vector.view(np.float64))):
            raise ValueError("channel realization contains non-finite entries")


@dataclass(frozen=True)
class PilotObservation:
    vector: np.ndarray  # (num_elements,) complex received snapshot
    snr_db: float


def steering_vector(angle_deg: float, cfg: ArrayConfig) -> np.ndarray:
    """Array response a(angle); element n is exp(j*2*pi*d*n*sin(angle))."""
    if abs(angle_deg) > 90.0:
        raise ValueError("steering angle must lie in [-90, 90] degrees")
    n = np.arange(cfg.num_elements)
    return np.exp(1j * 2.0 * np.pi * cfg.element_spacing * n * np.sin(np.radians(angle_deg)))


def steering_matrix(angles_deg: np.ndarray, cfg: ArrayConfig) -> np.ndarray:
    """Stack of steering vectors, one per row of ``angles_deg``."""
    angles_deg = np.asarray(angles_deg, dtype=float)
    if angles_deg.size and np.max(np.abs(angles_deg)) > 90.0:
        raise ValueError("steering angle must lie in [-90, 90] degrees")
    u = np.sin(np.radians(angles_deg))
    n = np.arange(cfg.num_elements)
    return np.exp(1j * 2.0 * np.pi * cfg.element_spacing * np.outer(u, n))


def build_dft_codebook(cfg: ArrayConfig, num_beams: int) -> Codebook:
    """Uniform-in-angle beam grid over the sector, endpoints included.

    A single-beam codebook points at the sector midpoint.  Each beam is the
    sector steering vector scaled to unit norm.
    """
    if num_beams < 1:
        raise ValueError("num_beams must be >= 1")
    if num_beams == 1:
        angles = np.array([(cfg.sector_min + cfg.sector_max) / 2.0])
    else:
        angles = np.linspace(cfg.sector_min, cfg.sector_max, num_beams)
    beams = steering_matrix(angles, cfg) / np.sqrt(cfg.num_elements)
    return Codebook(beams=beams, beam_angles=angles)


def sample_channel(paths: list[PathSpec], cfg: ArrayConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw one multipath realization h = sum_l alpha_l a(theta_l).

    Per path: the angle is jittered by a zero-mean Gaussian with the path's
    std, the gain converts from dB to linear amplitude, and the phase is
    either fixed or drawn uniformly on [0, 2*pi).  Deterministic given the
    generator state; draw order is (jitter, phase) per path in list order.
    """
    if not paths:
        raise ValueError("sample_channel requires at least one path")
    h = np.zeros(cfg.num_elements, dtype=np.complex128)
    realized = []
    dominant = 0.0
    for p in paths:
        angle = p.angle_deg
        if p.angle_jitter_std_deg > 0.0:
            angle = angle + p.angle_jitter_std_deg * rng.standard_normal()
        angle = float(np.clip(angle, -90.0, 90.0))
        phase = p.phase_rad if p.phase_rad is not None else rng.uniform(0.0, 2.0 * np.pi)
        amp = 10.0 ** (p.gain_db / 20.0)
        h += amp * np.exp(1j * phase) * steering_vector(angle, cfg)
        realized.append(angle)
        dominant = max(dominant, amp * amp)
    return ChannelRealization(vector=h, realized_angles=tuple(realized), dominant_power=dominant)


def receive_pilot(h: ChannelRealization, snr_db: float, rng: np.random.Generator) -> PilotObservation:
    """Single-snapshot pilot y = h + n, circularly-symmetric complex noise.

    The per-element noise variance is dominant-path power / 10^(snr/10).
    """
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    nelem = h.vector.shape[0]
    sigma2 = h.dominant_power * 10.0 ** (-snr_db / 10.0)
    scale = np.sqrt(sigma2 / 2.0)
    noise = scale * (rng.standard_normal(nelem) + 1j * rng.standard_normal(nelem))
    return PilotObservation(vector=h.vector + noise, snr_db=snr_db)


def angle_grid(cfg: ArrayConfig, grid_step_deg: float) -> np.ndarray:
    """Inclusive uniform angle grid over the sector."""
    if grid_step_deg <= 0.0:
        raise ValueError("grid_step_deg must be > 0")
    count = int(round((cfg.sector_max - cfg.sector_min) / grid_step_deg)) + 1
    if count < 1:
        raise ValueError("empty angle grid")
    return np.linspace(cfg.sector_min, cfg.sector_max, count)


def estimate_aoa_batch(
    snapshots: np.ndarray,
    cfg: ArrayConfig,
    grid_step_deg: float = 0.1,
    refine: bool = False,
    backend: str | None = None,
) -> np.ndarray:
    """AoA estimates for a (trials, num_elements) batch of snapshots.

    Exhaustive matched-filter search over the sector grid; ties break toward
    the smaller angle.  With ``refine`` the peak is interpolated with a
    parabola through the three grid powers around the maximum, giving a
    continuous-valued estimate (exact for an on-grid noiseless peak).
    """
    grid = angle_grid(cfg, grid_step_deg)
    steer_conj = steering_matrix(grid, cfg).conj()
    idx, pl, pc, pr = kernels.mf_scan(snapshots, steer_conj, backend=backend)
    est = grid[idx]
    if refine:
        interior = (idx > 0) & (idx < len(grid) - 1)
        den = pl - 2.0 * pc + pr
        ok = interior & (den < 0.0)
        offset = np.zeros_like(est)
        offset[ok] = 0.5 * (pl[ok] - pr[ok]) / den[ok]
        est = est + offset * grid_step_deg
    return est


def estimate_aoa(
    y: PilotObservation,
    cfg: ArrayConfig,
    grid_step_deg: float = 0.1,
    refine: bool = False,
) -> float:
    """Grid-search AoA estimate from one pilot observation."""
    return float(estimate_aoa_batch(y.vector[None, :], cfg, grid_step_deg, refine=refine)[0])
