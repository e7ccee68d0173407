"""Cross-layer secret-key generation pipeline.

Angle features quantized to Gray-coded bit strings, 3-bit parity
reconciliation over GF(2), Toeplitz-hash privacy amplification with the
helper leakage charged against the hashing margin, and context binding of
the physical key into protocol-layer key material.  ``agreement_sweep``
estimates Alice-Bob and Eve-Bob key agreement probability versus SNR.

Bit strings are MSB-first throughout; ``str(bits)`` gives the ASCII 0/1
debug form.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .arraysig import ArrayConfig, angle_grid, estimate_aoa_batch, steering_matrix
from . import kernels

CONTEXT_LABEL = b"isacguard/context-bind/v1"

_PARITY_BITS = 3

if hasattr(np, "bitwise_count"):
    def _popcount(x: np.ndarray) -> np.ndarray:
        return np.bitwise_count(x)
else:  # numpy < 2.0
    _POP16 = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.uint8)

    def _popcount(x: np.ndarray) -> np.ndarray:
        x = x.astype(np.uint32)
        return _POP16[x & 0xFFFF] + _POP16[x >> 16]


@dataclass(frozen=True)
class Bits:
    """Immutable bit string stored as (value, length), MSB first."""

    value: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be >= 0")
        if not 0 <= self.value < (1 << self.length):
            raise ValueError("value does not fit in the declared length")

    @classmethod
    def from_string(cls, s: str) -> "Bits":
        if s and set(s) - {"0", "1"}:
            raise ValueError("bit strings contain only 0/1")
        return cls(int(s, 2) if s else 0, len(s))

    @classmethod
    def from_int(cls, value: int, length: int) -> "Bits":
        return cls(value, length)

    def bit(self, i: int) -> int:
        """Bit at position i, counted from the MSB."""
        if not 0 <= i < self.length:
            raise IndexError("bit index out of range")
        return (self.value >> (self.length - 1 - i)) & 1

    def __len__(self) -> int:
        return self.length

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def __xor__(self, other: "Bits") -> "Bits":
        if self.length != other.length:
            raise ValueError("bit-string lengths differ")
        return Bits(self.value ^ other.value, self.length)

    def hamming_distance(self, other: "Bits") -> int:
        return int((self ^ other).value.bit_count())


@dataclass(frozen=True)
class QuantizerConfig:
    raw_bits: int = 16
    sector_min: float = -50.0
    sector_max: float = 50.0
    gray_coded: bool = True

    def __post_init__(self):
        if not 1 <= self.raw_bits <= 16:
            raise ValueError("raw_bits must lie in [1, 16]")
        if not self.sector_min < self.sector_max:
            raise ValueError("sector_min must be < sector_max")


@dataclass(frozen=True)
class ReconciliationHelper:
    parity: Bits
    parity_matrix_id: str

    def __post_init__(self):
        if self.parity.length != _PARITY_BITS:
            raise ValueError("helper parity must be exactly 3 bits")


@dataclass(frozen=True)
class ToeplitzSeed:
    """Seed bits of length n + k - 1 defining a k x n binary Toeplitz matrix."""

    seed_bits: Bits
    output_len: int

    def __post_init__(self):
        n = self.input_len
        if self.output_len < 1 or n < 1:
            raise ValueError("seed length must equal input_len + output_len - 1")
        if self.output_len > n - _PARITY_BITS:
            raise ValueError("leakage margin exceeded")

    @property
    def input_len(self) -> int:
        return self.seed_bits.length - self.output_len + 1


@dataclass(frozen=True)
class KeyBundle:
    raw: Bits
    corrected: Bits
    final_key: Bits
    leaked_bits: int = _PARITY_BITS


@dataclass(frozen=True)
class AgreementPoint:
    snr_db: float
    key_len: int
    p_alice_bob: float
    p_eve_bob: float
    trials: int

    def __post_init__(self):
        for p in (self.p_alice_bob, self.p_eve_bob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("agreement probabilities lie in [0, 1]")


def gray_encode(value: int) -> int:
    return value ^ (value >> 1)


def gray_decode(code: int) -> int:
    value = code
    shift = 1
    while (code >> shift) > 0:
        value ^= code >> shift
        shift += 1
    return value


def quantize_angle(angle_deg: float, cfg: QuantizerConfig) -> Bits:
    """Uniform quantizer over the sector; out-of-sector angles clamp.

    The bin index is floor((angle - min)/(max - min) * 2^n) clamped to
    [0, 2^n - 1], emitted Gray-coded unless configured otherwise.
    """
    levels = 1 << cfg.raw_bits
    frac = (angle_deg - cfg.sector_min) / (cfg.sector_max - cfg.sector_min)
    idx = int(np.floor(frac * levels))
    idx = min(max(idx, 0), levels - 1)
    return Bits(gray_encode(idx) if cfg.gray_coded else idx, cfg.raw_bits)


def parity_column(i: int) -> int:
    """Value of check-matrix column i: the 3-bit pattern (i mod 7) + 1."""
    return (i % 7) + 1


def parity_check_matrix(n: int) -> np.ndarray:
    """The fixed 3 x n check matrix as a dense GF(2) array (row 0 = MSB)."""
    cols = [parity_column(i) for i in range(n)]
    return np.array([[(c >> (2 - r)) & 1 for c in cols] for r in range(3)], dtype=np.uint8)


def _parity_value(value: int, n: int) -> int:
    p = 0
    for i in range(n):
        if (value >> (n - 1 - i)) & 1:
            p ^= parity_column(i)
    return p


def parity_encode(raw: Bits) -> ReconciliationHelper:
    """3 parity bits H * raw over GF(2); the only publicly leaked data."""
    if raw.length < 4:
        raise ValueError("parity encoding needs at least 4 raw bits")
    parity = _parity_value(raw.value, raw.length)
    return ReconciliationHelper(Bits(parity, _PARITY_BITS), f"cyclic7-n{raw.length}")


def _first_column_index(n: int) -> dict[int, int]:
    first: dict[int, int] = {}
    for i in range(n):
        first.setdefault(parity_column(i), i)
    return first


def reconcile(local: Bits, helper: ReconciliationHelper) -> Bits:
    """Flip at most one local bit so the syndrome matches the helper parity.

    The syndrome d = parity XOR H*local selects the lowest-indexed bit whose
    check-matrix column equals d.  A zero syndrome returns the input; a
    syndrome matching no column (possible only for n = 6, d = 111) also
    returns the input unchanged.  For n > 7 column values repeat, so some
    single-bit mismatches resolve to the wrong position (deterministically,
    via the lowest-index tie-break).
    """
    n = local.length
    expected = f"cyclic7-n{n}"
    if helper.parity_matrix_id != expected:
        raise ValueError(f"helper was built for {helper.parity_matrix_id}, not {expected}")
    d = helper.parity.value ^ _parity_value(local.value, n)
    if d == 0:
        return local
    idx = _first_column_index(n).get(d)
    if idx is None:
        return local
    return Bits(local.value ^ (1 << (n - 1 - idx)), n)


def toeplitz_matrix(seed: ToeplitzSeed) -> np.ndarray:
    """Dense k x n GF(2) matrix with T[j, i] = seed_bits[j - i + n - 1]."""
    n, k = seed.input_len, seed.output_len
    return np.array(
        [[seed.seed_bits.bit(j - i + n - 1) for i in range(n)] for j in range(k)],
        dtype=np.uint8,
    )


def toeplitz_hash(bits: Bits, seed: ToeplitzSeed) -> Bits:
    """Privacy amplification: output_j = XOR_i T[j,i] * bits_i over GF(2)."""
    n, k = seed.input_len, seed.output_len
    if bits.length != n:
        raise ValueError("input length does not match the Toeplitz seed")
    out = 0
    for j in range(k):
        row = 0
        for i in range(n):
            row |= seed.seed_bits.bit(j - i + n - 1) << (n - 1 - i)
        out = (out << 1) | ((row & bits.value).bit_count() & 1)
    return Bits(out, k)


def context_bind(phy_key: Bits, protocol_key: bytes) -> bytes:
    """One-way digest of (protocol_key || phy_key || context label).

    Identical inputs give identical output; any single-bit change of the
    physical key changes the digest.
    """
    h = hashlib.sha256()
    h.update(protocol_key)
    h.update(str(phy_key).encode("ascii"))
    h.update(CONTEXT_LABEL)
    return h.digest()


@dataclass(frozen=True)
class KeygenGeometry:
    """Per-trial channel geometry for the three key-generation parties.

    Alice-Bob share a dominant cluster whose angle is redrawn each trial
    plus one weak path that Eve lacks.  With ``eve_angle_deg=None`` Eve's
    dominant path rides the same realized cluster angle (shared cluster,
    different location: no weak path); otherwise her dominant sits at the
    given angle with the same jitter process, independently drawn.
    """

    cluster_center_deg: float = 10.0
    cluster_jitter_std_deg: float = 1.0
    weak_path_angle_deg: float = -20.0
    weak_path_gain_db: float = -10.0
    eve_angle_deg: float | None = None
    grid_step_deg: float = 0.05


DEFAULT_GEOMETRY = KeygenGeometry()


def _draw_trial_batch(geometry: KeygenGeometry, cfg: ArrayConfig, trials: int, rng):
    """Geometry and unit-variance noise draws for a batch of trials.

    Draw order is fixed and documented: cluster jitter, weak-path phase,
    (optional) Eve jitter, then re/im noise blocks for Bob, Alice, Eve.
    """
    nelem = cfg.num_elements
    theta = geometry.cluster_center_deg + geometry.cluster_jitter_std_deg * rng.standard_normal(trials)
    theta = np.clip(theta, -90.0, 90.0)
    phase = rng.uniform(0.0, 2.0 * np.pi, trials)
    if geometry.eve_angle_deg is None:
        theta_eve = theta
    else:
        theta_eve = geometry.eve_angle_deg + geometry.cluster_jitter_std_deg * rng.standard_normal(trials)
        theta_eve = np.clip(theta_eve, -90.0, 90.0)
    wamp = 10.0 ** (geometry.weak_path_gain_db / 20.0)
    weak = steering_matrix(np.full(trials, geometry.weak_path_angle_deg), cfg)
    h_ab = steering_matrix(theta, cfg) + wamp * np.exp(1j * phase)[:, None] * weak
    h_eve = steering_matrix(theta_eve, cfg)
    noise = {}
    for party in ("bob", "alice", "eve"):
        re = rng.standard_normal((trials, nelem))
        im = rng.standard_normal((trials, nelem))
        noise[party] = re + 1j * im
    return h_ab, h_eve, noise


def _grid_gray_bins(grid: np.ndarray, qcfg: QuantizerConfig) -> np.ndarray:
    levels = 1 << qcfg.raw_bits
    frac = (grid - qcfg.sector_min) / (qcfg.sector_max - qcfg.sector_min)
    idx = np.clip(np.floor(frac * levels).astype(np.int64), 0, levels - 1)
    idx = idx.astype(np.uint32)
    return (idx ^ (idx >> 1)) if qcfg.gray_coded else idx


def _parity_lut(n: int) -> np.ndarray:
    vals = np.arange(1 << n, dtype=np.uint32)
    p = np.zeros(1 << n, dtype=np.uint8)
    for i in range(n):
        bit = (vals >> (n - 1 - i)) & 1
        p ^= (bit * parity_column(i)).astype(np.uint8)
    return p


def _flip_lut(n: int) -> np.ndarray:
    """Syndrome value -> bit mask flipped by the decoder (0 when no match)."""
    flip = np.zeros(8, dtype=np.uint32)
    for d, i in _first_column_index(n).items():
        flip[d] = 1 << (n - 1 - i)
    return flip


def _toeplitz_hash_batch(values: np.ndarray, seeds: np.ndarray, n: int, k: int) -> np.ndarray:
    """Vectorized Toeplitz hash; seeds is a (trials, n+k-1) 0/1 array."""
    out = np.zeros(values.shape[0], dtype=np.uint32)
    for j in range(k):
        mask = np.zeros(values.shape[0], dtype=np.uint32)
        for i in range(n):
            mask |= seeds[:, j - i + n - 1].astype(np.uint32) << np.uint32(n - 1 - i)
        out = (out << 1) | (_popcount(mask & values) & 1).astype(np.uint32)
    return out


def key_agreement_trial(
    geometry: KeygenGeometry,
    snr_db: float,
    raw_bits: int,
    key_len: int,
    rng: np.random.Generator,
    cfg: ArrayConfig = ArrayConfig(),
) -> tuple[KeyBundle, KeyBundle, KeyBundle]:
    """One full Alice/Bob/Eve key-generation round; returns their bundles.

    Bob estimates the AoA of Alice's uplink pilot with the array; Alice
    quantizes her reciprocal observation of the same channel realization
    under independent noise at the same SNR; Eve works from her own channel.
    Alice publishes 3 parity bits, Bob and Eve reconcile toward them, and
    all three apply the same per-trial public Toeplitz seed.
    """
    if key_len > raw_bits - _PARITY_BITS:
        raise ValueError("leakage margin exceeded")
    qcfg = QuantizerConfig(raw_bits=raw_bits, sector_min=cfg.sector_min, sector_max=cfg.sector_max)
    h_ab, h_eve, noise = _draw_trial_batch(geometry, cfg, 1, rng)
    sigma = np.sqrt(10.0 ** (-snr_db / 10.0) / 2.0)

    def feature(h, z):
        y = h + sigma * z
        return float(estimate_aoa_batch(y, cfg, geometry.grid_step_deg, refine=False)[0])

    raw_bob = quantize_angle(feature(h_ab, noise["bob"]), qcfg)
    raw_alice = quantize_angle(feature(h_ab, noise["alice"]), qcfg)
    raw_eve = quantize_angle(feature(h_eve, noise["eve"]), qcfg)

    helper = parity_encode(raw_alice)
    corr_alice = reconcile(raw_alice, helper)
    corr_bob = reconcile(raw_bob, helper)
    corr_eve = reconcile(raw_eve, helper)

    seed_bits = rng.integers(0, 2, size=(1, raw_bits + key_len - 1), dtype=np.uint8)
    seed = ToeplitzSeed(Bits.from_string("".join(map(str, seed_bits[0]))), key_len)

    def bundle(raw, corr):
        return KeyBundle(raw=raw, corrected=corr, final_key=toeplitz_hash(corr, seed))

    return bundle(raw_alice, corr_alice), bundle(raw_bob, corr_bob), bundle(raw_eve, corr_eve)


def agreement_sweep(
    snrs_db,
    key_lens,
    trials: int,
    rng: np.random.Generator,
    geometry: KeygenGeometry = DEFAULT_GEOMETRY,
    raw_bits: int = 16,
    cfg: ArrayConfig = ArrayConfig(),
    chunk_size: int = 4096,
) -> list[AgreementPoint]:
    """Monte-Carlo agreement probability per (SNR, key length).

    Trials are paired across SNR points and key lengths: the same geometry
    and unit-noise draws back every cell (noise is scaled per SNR), which
    makes monotonicity and threshold comparisons seed-stable.  Work is split
    into fixed-size chunks, each with its own deterministic substream, so
    results do not depend on worker scheduling.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    snrs_db = [float(s) for s in snrs_db]
    key_lens = [int(k) for k in key_lens]
    for k in key_lens:
        if k > raw_bits - _PARITY_BITS:
            raise ValueError("leakage margin exceeded")

    qcfg = QuantizerConfig(raw_bits=raw_bits, sector_min=cfg.sector_min, sector_max=cfg.sector_max)
    grid = angle_grid(cfg, geometry.grid_step_deg)
    steer_conj = steering_matrix(grid, cfg).conj()
    gbins = _grid_gray_bins(grid, qcfg)
    plut = _parity_lut(raw_bits)
    flut = _flip_lut(raw_bits)

    base = int(rng.integers(0, 2**63, dtype=np.int64))
    starts = list(range(0, trials, chunk_size))

    def run_chunk(ci: int, start: int):
        m = min(chunk_size, trials - start)
        crng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((base, 0, ci))))
        h_ab, h_eve, noise = _draw_trial_batch(geometry, cfg, m, crng)
        feats = {}
        for si, snr in enumerate(snrs_db):
            sigma = np.sqrt(10.0 ** (-snr / 10.0) / 2.0)
            row = {}
            for party, h in (("bob", h_ab), ("alice", h_ab), ("eve", h_eve)):
                idx, _, _, _ = kernels.mf_scan(h + sigma * noise[party], steer_conj)
                row[party] = gbins[idx]
            feats[si] = row
        seeds = {
            k: np.random.Generator(
                np.random.PCG64(np.random.SeedSequence((base, 1, k, ci)))
            ).integers(0, 2, size=(m, raw_bits + k - 1), dtype=np.uint8)
            for k in key_lens
        }
        ab = np.zeros((len(snrs_db), len(key_lens)), dtype=np.int64)
        eb = np.zeros_like(ab)
        for si in range(len(snrs_db)):
            ra, rb, re = feats[si]["alice"], feats[si]["bob"], feats[si]["eve"]
            pa = plut[ra]
            rb_c = rb ^ flut[pa ^ plut[rb]]
            re_c = re ^ flut[pa ^ plut[re]]
            for ki, k in enumerate(key_lens):
                ka = _toeplitz_hash_batch(ra, seeds[k], raw_bits, k)
                kb = _toeplitz_hash_batch(rb_c, seeds[k], raw_bits, k)
                ke = _toeplitz_hash_batch(re_c, seeds[k], raw_bits, k)
                ab[si, ki] = int(np.sum(ka == kb))
                eb[si, ki] = int(np.sum(ke == kb))
        return ab, eb

    agree_ab = np.zeros((len(snrs_db), len(key_lens)), dtype=np.int64)
    agree_eb = np.zeros_like(agree_ab)
    workers = kernels.worker_count()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for ab, eb in pool.map(run_chunk, range(len(starts)), starts):
                agree_ab += ab
                agree_eb += eb
    else:
        for ci, start in enumerate(starts):
            ab, eb = run_chunk(ci, start)
            agree_ab += ab
            agree_eb += eb

    points = []
    for si, snr in enumerate(snrs_db):
        for ki, k in enumerate(key_lens):
            points.append(
                AgreementPoint(
                    snr_db=snr,
                    key_len=k,
                    p_alice_bob=agree_ab[si, ki] / trials,
                    p_eve_bob=agree_eb[si, ki] / trials,
                    trials=trials,
                )
            )
    return points


def agreement_threshold(points: list[AgreementPoint], key_len: int, level: float = 0.5) -> float:
    """Smallest SNR reaching the given Alice-Bob agreement, interpolated.

    Linear interpolation between the last point below and the first point
    at-or-above the level; raises if the curve never reaches it.
    """
    curve = sorted((p for p in points if p.key_len == key_len), key=lambda p: p.snr_db)
    if not curve:
        raise ValueError(f"no points for key_len={key_len}")
    prev = None
    for p in curve:
        if p.p_alice_bob >= level:
            if prev is None or p.p_alice_bob == prev.p_alice_bob:
                return p.snr_db
            frac = (level - prev.p_alice_bob) / (p.p_alice_bob - prev.p_alice_bob)
            return prev.snr_db + frac * (p.snr_db - prev.snr_db)
        prev = p
    raise ValueError(f"agreement never reaches {level} for key_len={key_len}")
