"""Benchmark excitation signals.

Three non-adaptive input designers used as comparison baselines: a
slew-limited random walk, a rate-limited PRBS from a maximal-length
shift register, and an orthogonal multisine (disjoint harmonics per
channel, phases picked to minimize the relative peak factor).

All generators are deterministic given the spec's seed.  Signals are
returned time-major, shape (horizon, m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import AllocationError, SignalError, SlewError

# Maximal-length LFSR feedback taps (Fibonacci form, 1-indexed stages).
_MLS_TAPS = {
    2: (2, 1),
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 11, 10, 4),
    13: (13, 12, 11, 8),
    14: (14, 13, 12, 2),
    15: (15, 14),
    16: (16, 15, 13, 4),
}


def _channel_vec(x, m, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = np.full(m, float(arr))
    if arr.shape != (m,):
        raise ValueError(f"{name} must broadcast to ({m},), got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class SignalSpec:
    """Common envelope for signal generation: length, box, slew, seed.

    center defaults to the box midpoint and is the value signals are
    built around (random walk start, PRBS filter start, multisine mean).
    """

    horizon: int
    dt: float
    m: int
    u_lo: np.ndarray
    u_hi: np.ndarray
    du_max: np.ndarray
    seed: int | tuple = 0
    center: np.ndarray | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        lo = _channel_vec(self.u_lo, self.m, "u_lo")
        hi = _channel_vec(self.u_hi, self.m, "u_hi")
        du = _channel_vec(self.du_max, self.m, "du_max")
        if np.any(lo > hi):
            raise ValueError("u_lo must not exceed u_hi")
        if np.any(du < 0):
            raise ValueError("du_max must be nonnegative")
        center = 0.5 * (lo + hi) if self.center is None else _channel_vec(self.center, self.m, "center")
        if not np.all(np.isfinite(center)):
            raise ValueError("signal center must be finite; supply center explicitly for unbounded boxes")
        if np.any(center < lo) or np.any(center > hi):
            raise ValueError("center must lie inside the box")
        for name, val in (("u_lo", lo), ("u_hi", hi), ("du_max", du), ("center", center)):
            object.__setattr__(self, name, val)


@dataclass(frozen=True)
class SignalScore:
    """Per-channel relative peak factor and maximum per-step change.

    rpf is (max - min) / (2 sqrt(2) rms(u - mean)); channels whose
    zero-mean part has no energy get rpf = nan and degenerate = True.
    """

    rpf: np.ndarray
    degenerate: np.ndarray
    max_diff: np.ndarray


@dataclass(frozen=True)
class MultisineResult:
    inputs: np.ndarray
    rpf: np.ndarray
    harmonics: tuple
    phases: tuple
    fundamental_hz: float


def random_inputs(spec: SignalSpec) -> np.ndarray:
    """Slew-limited random walk: +-du_max steps, clamped to the box.

    Starts at the center; each channel independently moves by its full
    slew bound with a uniformly random sign at every step.
    """
    rng = np.random.default_rng(spec.seed)
    u = np.empty((spec.horizon, spec.m))
    u[0] = spec.center
    for t in range(1, spec.horizon):
        signs = rng.integers(0, 2, spec.m) * 2 - 1
        u[t] = np.clip(u[t - 1] + signs * spec.du_max, spec.u_lo, spec.u_hi)
    return u


def mls_sequence(nbits: int, init: int = 1) -> np.ndarray:
    """One full period of a maximal-length shift-register sequence, in {-1, +1}.

    Length 2^nbits - 1; the +1 count exceeds the -1 count by exactly one.
    """
    if nbits not in _MLS_TAPS:
        raise ValueError(f"no tap table for nbits={nbits}; supported: {sorted(_MLS_TAPS)}")
    mask = (1 << nbits) - 1
    state = init & mask
    if state == 0:
        raise ValueError("initial register state must be nonzero")
    out = np.empty((1 << nbits) - 1, dtype=np.int8)
    taps = _MLS_TAPS[nbits]
    for i in range(out.size):
        out[i] = 1 if (state >> (nbits - 1)) & 1 else -1
        fb = 0
        for t in taps:
            fb ^= (state >> (t - 1)) & 1
        state = ((state << 1) | fb) & mask
    return out


def prbs(spec: SignalSpec, hold_steps: int = 1, nbits: int = 7) -> np.ndarray:
    """Rate-limited PRBS: binary levels at the box bounds, slew-filtered.

    Each channel runs its own maximal-length sequence (random register
    phase from the seed), holds every symbol for ``hold_steps`` samples,
    and is then passed through a first-order slew limiter starting at
    the center so du_max is respected everywhere.
    """
    if hold_steps < 1:
        raise ValueError("hold_steps must be at least 1")
    rng = np.random.default_rng(spec.seed)
    h = spec.horizon
    u = np.empty((h, spec.m))
    for c in range(spec.m):
        bits = mls_sequence(nbits, int(rng.integers(1, 1 << nbits)))
        held = np.repeat(bits, hold_steps)
        reps = math.ceil(h / held.size)
        held = np.tile(held, reps)[:h]
        target = np.where(held > 0, spec.u_hi[c], spec.u_lo[c])
        y = spec.center[c]
        du = spec.du_max[c]
        for t in range(h):
            y = y + np.clip(target[t] - y, -du, du)
            u[t, c] = y
    return u


def _rpf(u: np.ndarray) -> float:
    z = u - u.mean()
    rms = np.sqrt(np.mean(z**2))
    if rms == 0.0:
        return float("nan")
    return float((u.max() - u.min()) / (2.0 * np.sqrt(2.0) * rms))


def score_signal(u: np.ndarray) -> SignalScore:
    """Relative peak factor and max per-step change, per channel."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[0] < 1:
        raise ValueError("signal must contain at least one sample")
    m = u.shape[1]
    rpf = np.array([_rpf(u[:, c]) for c in range(m)])
    degenerate = np.isnan(rpf)
    if u.shape[0] > 1:
        max_diff = np.max(np.abs(np.diff(u, axis=0)), axis=0)
    else:
        max_diff = np.zeros(m)
    return SignalScore(rpf=rpf, degenerate=degenerate, max_diff=max_diff)


def schroeder_phases(num_components: int) -> np.ndarray:
    """Low-peak-factor initial phases, -pi j (j-1) / J for j = 1..J."""
    j = np.arange(1, num_components + 1)
    return -np.pi * j * (j - 1) / num_components


def _allot_harmonics(spec: SignalSpec, num_components: int, freq_band_hz) -> list[np.ndarray]:
    """Disjoint integer harmonics per channel, interleaved across the band."""
    N = spec.horizon
    f0 = 1.0 / (N * spec.dt)
    nyquist = 0.5 / spec.dt
    if freq_band_hz is None:
        freq_band_hz = (f0, min(spec.m * num_components, (N - 1) // 2) * f0)
    f_lo, f_hi = float(freq_band_hz[0]), float(freq_band_hz[1])
    if not (0.0 < f_lo <= f_hi < nyquist):
        raise ValueError(f"frequency band must satisfy 0 < f_lo <= f_hi < {nyquist} Hz, got ({f_lo}, {f_hi})")
    # q < N/2 keeps distinct harmonics exactly orthogonal over the record
    q_lo = max(1, math.ceil(f_lo / f0 - 1e-9))
    q_hi = min((N - 1) // 2, math.floor(f_hi / f0 + 1e-9))
    available = np.arange(q_lo, q_hi + 1)
    needed = spec.m * num_components
    if available.size < needed:
        raise AllocationError(
            f"band ({f_lo} Hz, {f_hi} Hz) holds {available.size} usable harmonics of "
            f"{f0} Hz but {needed} are needed ({spec.m} channels x {num_components})"
        )
    return [available[c :: spec.m][:num_components] for c in range(spec.m)]


def multisine(
    spec: SignalSpec,
    num_components: int = 8,
    freq_band_hz: tuple[float, float] | None = None,
    rpf_iters: int = 100,
) -> MultisineResult:
    """Orthogonal multisine: disjoint harmonics per channel, phase-searched.

    Each channel sums cosines at its own integer harmonics of the record
    fundamental 1/(horizon*dt), so different channels have exactly zero
    sample inner product (about their centers) over the full record.
    Phases start at Schroeder's rule and are refined by random search
    over ``rpf_iters`` candidates, keeping the lowest relative peak
    factor.  The sum is scaled to touch the tighter box bound, then
    checked against du_max; a violation raises SlewError naming the
    highest frequency in the offending channel.
    """
    if num_components < 1:
        raise ValueError("num_components must be at least 1")
    if rpf_iters < 0:
        raise ValueError("rpf_iters must be nonnegative")
    harmonics = _allot_harmonics(spec, num_components, freq_band_hz)
    N = spec.horizon
    f0 = 1.0 / (N * spec.dt)
    grid = np.arange(N)
    rng = np.random.default_rng(spec.seed)

    amp = np.minimum(spec.u_hi - spec.center, spec.center - spec.u_lo)
    if np.any(~np.isfinite(amp)) or np.any(amp <= 0):
        raise SignalError("multisine needs a finite box with the center strictly inside")

    u = np.empty((N, spec.m))
    rpf_achieved = np.empty(spec.m)
    phases_out = []
    for c in range(spec.m):
        qs = harmonics[c]

        def synth(phis):
            ang = 2.0 * np.pi * np.outer(grid, qs) / N + phis
            return np.cos(ang).sum(axis=1)

        best_ph = schroeder_phases(num_components)
        best = synth(best_ph)
        best_rpf = _rpf(best)
        for _ in range(rpf_iters):
            cand_ph = rng.uniform(0.0, 2.0 * np.pi, num_components)
            cand = synth(cand_ph)
            r = _rpf(cand)
            if r < best_rpf:
                best_rpf, best, best_ph = r, cand, cand_ph
        peak = np.max(np.abs(best))
        u[:, c] = spec.center[c] + (amp[c] / peak) * best
        rpf_achieved[c] = best_rpf
        phases_out.append(best_ph)

        steps = np.abs(np.diff(u[:, c]))
        if steps.size and steps.max() > spec.du_max[c]:
            raise SlewError(
                f"channel {c} violates du_max={spec.du_max[c]:.6g}: per-step change "
                f"{steps.max():.6g}; offending frequency {qs.max() * f0:.6g} Hz"
            )

    return MultisineResult(
        inputs=u,
        rpf=rpf_achieved,
        harmonics=tuple(np.asarray(q) for q in harmonics),
        phases=tuple(phases_out),
        fundamental_hz=f0,
    )


def derive_du_max(
    spec: SignalSpec,
    num_components: int = 8,
    freq_band_hz: tuple[float, float] | None = None,
    rpf_iters: int = 100,
) -> np.ndarray:
    """Per-channel slew bound measured from the multisine itself.

    Generates the multisine with the slew check disabled and returns its
    max per-step change, so that the same multisine (same seed) passes
    the bound with equality and all other methods face an identical
    constraint.
    """
    free = replace(spec, du_max=np.full(spec.m, np.inf))
    result = multisine(free, num_components=num_components, freq_band_hz=freq_band_hz, rpf_iters=rpf_iters)
    return score_signal(result.inputs).max_diff
