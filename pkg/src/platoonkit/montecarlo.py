"""Seeded stochastic experiment engine for platoon simulations.

Realizations are simulated in vectorized batches, but every random stream is
owned by one (realization, purpose) pair through a counter-based Philox
construction, and all per-step math is elementwise, so results are
bit-identical however the work is batched or ordered.  Streams:

    SeedSequence((base_seed, 0, realization, pair))  -> channel of one V2V pair
    SeedSequence((base_seed, 1, realization))        -> deceleration limits

Channel draws mirror channel.simulate_reception exactly (one uniform for the
stationary initial regime, then two per slot).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.special import ndtr, ndtri

from .channel import GilbertParams, gamma_analytic
from .control import ControllerConfig
from .dynamics import (
    LeaderProfile,
    LeaderSegment,
    VehicleParams,
    _position_delta_at,
    stop_crossing_time,
    zoh_coefficients,
)
from .errors import ConfigError, InvalidInputError

__all__ = [
    "ChannelSpec",
    "DecelDistribution",
    "ScenarioConfig",
    "RealizationResult",
    "SafetyStats",
    "MeanValidationReport",
    "sample_decel_limits",
    "detect_collisions",
    "run_realization",
    "run_realizations",
    "aggregate_stats",
    "run_safety_study",
    "validate_mean_trajectory",
    "cacc_system_matrix",
]

STREAM_CHANNEL = 0
STREAM_DECEL = 1
BATCH_SIZE = 2048          # fixed: aggregation order must not depend on callers
CHANNEL_CHUNK = 1024       # bounds the uniform scratch buffer
ENVELOPE_ATOL = 1e-9       # absorbs float accumulation noise on deterministic components


@dataclass(frozen=True)
class ChannelSpec:
    """V2V reception model of a scenario.

    kind 'ideal' receives everything; 'iid' draws Bernoulli(gamma) per slot;
    'gilbert' runs the burst chain; 'deterministic' replaces the reception
    indicator by its expectation gamma in the control law (the deterministic
    equivalent used for mean-trajectory validation).
    """

    kind: Literal["ideal", "iid", "gilbert", "deterministic"]
    gamma: float | None = None
    gilbert: GilbertParams | None = None

    def __post_init__(self) -> None:
        if self.kind in ("iid", "deterministic"):
            if self.gamma is None or not (0.0 <= self.gamma <= 1.0):
                raise ConfigError(f"channel.gamma: must be in [0, 1] for kind={self.kind!r}")
        elif self.kind == "gilbert":
            if self.gilbert is None:
                raise ConfigError("channel.gilbert: parameters required for kind='gilbert'")
        elif self.kind != "ideal":
            raise ConfigError(f"channel.kind: unknown kind {self.kind!r}")

    @property
    def stochastic(self) -> bool:
        return self.kind in ("iid", "gilbert")

    def effective_gamma(self) -> float:
        """Reception probability used by the deterministic equivalent."""
        if self.kind == "ideal":
            return 1.0
        if self.kind == "gilbert":
            return gamma_analytic(self.gilbert)
        return float(self.gamma)


@dataclass(frozen=True)
class DecelDistribution:
    """Per-realization sampling of maximum deceleration magnitudes.

    Stand-in for the passenger-car braking distribution the safety study
    calls for; the default truncated normal (mean 7.5, sd 1.0 on [4.5, 9.5]
    m/s^2) is fully configurable.
    """

    kind: Literal["point", "uniform", "truncnorm"] = "truncnorm"
    mean: float = 7.5
    std: float = 1.0
    low: float = 4.5
    high: float = 9.5
    value: float = 9.0

    def __post_init__(self) -> None:
        if self.kind not in ("point", "uniform", "truncnorm"):
            raise ConfigError(f"decel_dist.kind: unknown kind {self.kind!r}")
        if self.kind == "point" and not (self.value > 0):
            raise ConfigError("decel_dist.value: must be positive")
        if self.kind in ("uniform", "truncnorm"):
            if not (0 < self.low <= self.high):
                raise ConfigError("decel_dist: need 0 < low <= high")
        if self.kind == "truncnorm" and not (self.std > 0):
            raise ConfigError("decel_dist.std: must be positive")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "point":
            return np.full(n, self.value)
        if self.kind == "uniform":
            return self.low + (self.high - self.low) * rng.random(n)
        a = ndtr((self.low - self.mean) / self.std)
        b = ndtr((self.high - self.mean) / self.std)
        return self.mean + self.std * ndtri(a + rng.random(n) * (b - a))

    def support(self) -> tuple[float, float]:
        if self.kind == "point":
            return self.value, self.value
        return self.low, self.high


def sample_decel_limits(dist: DecelDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. deceleration-limit draws (m/s^2, positive magnitudes)."""
    if n <= 0:
        raise InvalidInputError(f"n must be positive, got {n}")
    return dist.sample(n, rng)


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully specified platoon experiment."""

    n_followers: int
    params: VehicleParams
    controller: ControllerConfig
    channel: ChannelSpec
    leader: LeaderProfile = LeaderProfile()
    leader_brakes_at_limit: bool = False
    initial_speed: float = 25.0
    dt: float = 0.01
    duration: float = 40.0
    standstill_gap: float = 5.0
    decel_dist: DecelDistribution | None = None
    realizations: int = 1
    base_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_followers < 1:
            raise ConfigError("platoon.n_followers: must be >= 1")
        if not (self.duration > 0):
            raise ConfigError("sim.duration_s: must be positive")
        if not (self.dt > 0):
            raise ConfigError("sim.dt_s: must be positive")
        if self.n_steps < 1:
            raise ConfigError("sim.duration_s: shorter than one step")
        if self.initial_speed < 0:
            raise ConfigError("platoon.initial_speed_mps: must be nonnegative")
        if self.standstill_gap < 0:
            raise ConfigError("platoon.standstill_gap_m: must be nonnegative")
        if self.realizations < 1:
            raise ConfigError("montecarlo.realizations: must be >= 1")
        if self.base_seed < 0:
            raise ConfigError("montecarlo.base_seed: must be nonnegative")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def n_vehicles(self) -> int:
        return self.n_followers + 1

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class RealizationResult:
    """Outcome of one seeded realization."""

    index: int
    times: np.ndarray
    spacing_errors: np.ndarray           # (n_steps+1, n_followers)
    collision_events: tuple[tuple[float, int, int], ...]  # (time, lead, follower)
    collided: bool
    decel_limits: np.ndarray             # (n_vehicles,)
    states: np.ndarray | None = None     # (n_steps+1, n_vehicles, 3) when requested


@dataclass(frozen=True)
class SafetyStats:
    """Aggregate collision statistics over a set of realizations."""

    n_realizations: int
    n_collided: int
    p_collision: float
    mean_events_per_unstable: float | None
    variance_series: np.ndarray          # (n_steps+1, n_followers), ddof=1
    times: np.ndarray


@dataclass(frozen=True)
class MeanValidationReport:
    """Stochastic-mean vs deterministic-equivalent comparison.

    Deviations are component-wise |mean - deterministic| over states
    (x, v, a).  Each vehicle's maximum deviation is compared against the
    3-sigma Monte Carlo envelope at the point where that maximum occurs
    (plus a tiny absolute floor for float accumulation noise); the pointwise
    worst normalized deviation is reported as a diagnostic.
    """

    n_realizations: int
    max_deviation: float
    per_vehicle_max_deviation: np.ndarray
    per_vehicle_envelope_at_max: np.ndarray
    within_envelope: bool
    max_normalized: float


def detect_collisions(positions, lengths) -> list[tuple[int, int]]:
    """Overlapping adjacent pairs, given leader-first positions and body lengths.

    A pair collides when the bumper-to-bumper gap x_{i-1} - x_i - length_{i-1}
    is <= 0.  Returns (lead_index, follower_index) tuples.
    """
    x = np.asarray(positions, dtype=float)
    ln = np.asarray(lengths, dtype=float)
    if x.ndim != 1 or ln.shape != x.shape:
        raise InvalidInputError("positions and lengths must be 1-D and equal length")
    gaps = x[:-1] - x[1:] - ln[:-1]
    return [(i, i + 1) for i in np.nonzero(gaps <= 0.0)[0]]


def _channel_rng(base_seed: int, realization: int, pair: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((base_seed, STREAM_CHANNEL, realization, pair))))


def _decel_rng(base_seed: int, realization: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((base_seed, STREAM_DECEL, realization))))


def _gilbert_receptions(
    gp: GilbertParams, base_seed: int, indices: np.ndarray, n_pairs: int, n_slots: int
) -> np.ndarray:
    """Reception matrix (R, n_pairs, n_slots) from per-channel Philox streams."""
    n_chan = len(indices) * n_pairs
    out = np.empty((n_chan, n_slots), dtype=bool)
    stat_good = 1.0 if gp.p_gb + gp.p_bg == 0.0 else gp.p_bg / (gp.p_gb + gp.p_bg)
    for lo in range(0, n_chan, CHANNEL_CHUNK):
        hi = min(lo + CHANNEL_CHUNK, n_chan)
        m = hi - lo
        u = np.empty((m, 1 + 2 * n_slots))
        for j in range(lo, hi):
            r, p = divmod(j, n_pairs)
            u[j - lo] = _channel_rng(base_seed, int(indices[r]), p).random(1 + 2 * n_slots)
        init = u[:, 0] < stat_good
        slots = u[:, 1:].reshape(m, n_slots, 2)
        cur = init
        for k in range(n_slots):
            cur = np.where(cur, slots[:, k, 0] >= gp.p_gb, slots[:, k, 0] < gp.p_bg)
            out[lo:hi, k] = cur | (slots[:, k, 1] < gp.q)
    return out.reshape(len(indices), n_pairs, n_slots)


def _iid_receptions(
    gamma: float, base_seed: int, indices: np.ndarray, n_pairs: int, n_slots: int
) -> np.ndarray:
    out = np.empty((len(indices), n_pairs, n_slots), dtype=bool)
    for r, idx in enumerate(indices):
        for p in range(n_pairs):
            out[r, p] = _channel_rng(base_seed, int(idx), p).random(n_slots) < gamma
    return out


def _decel_limits(sc: ScenarioConfig, indices: np.ndarray) -> np.ndarray:
    if sc.decel_dist is None:
        return np.full((len(indices), sc.n_vehicles), sc.params.decel_limit)
    out = np.empty((len(indices), sc.n_vehicles))
    for r, idx in enumerate(indices):
        out[r] = sc.decel_dist.sample(sc.n_vehicles, _decel_rng(sc.base_seed, int(idx)))
    return out


def _active_segment(profile: LeaderProfile, t: float) -> LeaderSegment | None:
    active = None
    for seg in profile.segments:
        if seg.start_time <= t:
            active = seg
        else:
            break
    return active


def _simulate_batch(
    sc: ScenarioConfig,
    indices: np.ndarray,
    mode: str | None = None,
    collect_errors: bool = False,
    include_states: bool = False,
    on_step: Callable[[int, np.ndarray, np.ndarray, np.ndarray, np.ndarray], None] | None = None,
):
    """Propagate a batch of realizations; the single engine behind every study.

    Returns (err_series, peaks, events_per_realization, limits, states).
    err_series and states are None unless requested.  on_step(k, x, v, a, e)
    is invoked at every recorded grid point with the current batch arrays.
    """
    indices = np.asarray(indices, dtype=int)
    R, M, F, T = len(indices), sc.n_vehicles, sc.n_followers, sc.n_steps
    cfg = sc.controller if mode is None else dataclasses.replace(sc.controller, mode=mode)
    dt, tau, d, hw = sc.dt, sc.params.tau, sc.standstill_gap, cfg.h_w
    c_aa, c_au, c_va, c_vu, c_xa, c_xu = zoh_coefficients(tau, dt)

    recv = None
    if cfg.mode == "cacc" and sc.channel.kind == "gilbert":
        recv = _gilbert_receptions(sc.channel.gilbert, sc.base_seed, indices, F, T)
    elif cfg.mode == "cacc" and sc.channel.kind == "iid":
        recv = _iid_receptions(sc.channel.gamma, sc.base_seed, indices, F, T)
    wfactor = sc.channel.effective_gamma() if cfg.mode == "cacc" else 0.0
    ka_w = cfg.k_a * wfactor

    limits = _decel_limits(sc, indices)
    accel_limit = sc.params.accel_limit

    x = np.empty((R, M))
    v = np.full((R, M), float(sc.initial_speed))
    a = np.zeros((R, M))
    x[:, 0] = 0.0
    for i in range(1, M):
        x[:, i] = x[:, i - 1] - d - hw * sc.initial_speed

    frozen = np.zeros((R, M), dtype=bool)
    x_frozen = np.zeros((R, M))
    collided_pair = np.zeros((R, F), dtype=bool)
    events: list[list[tuple[float, int, int]]] = [[] for _ in range(R)]

    err_series = np.empty((R, T + 1, F)) if collect_errors else None
    states = np.empty((R, T + 1, M, 3)) if include_states else None
    peaks = np.zeros((R, F))

    def record(k: int) -> np.ndarray:
        e = x[:, 1:] - x[:, :-1] + d + hw * v[:, 1:]
        np.maximum(peaks, np.abs(e), out=peaks)
        if err_series is not None:
            err_series[:, k] = e
        if states is not None:
            states[:, k, :, 0] = x
            states[:, k, :, 1] = v
            states[:, k, :, 2] = a
        if on_step is not None:
            on_step(k, x, v, a, e)
        return e

    e_cur = record(0)
    u = np.empty((R, M))
    for k in range(T):
        t = k * dt

        if sc.leader_brakes_at_limit:
            u[:, 0] = np.where(v[:, 0] > 0.0, -limits[:, 0], 0.0)
        else:
            seg = _active_segment(sc.leader, t)
            if seg is None or seg.u == 0.0:
                u[:, 0] = 0.0 if seg is None else seg.u
            elif seg.target_velocity is None:
                u[:, 0] = seg.u
            elif seg.u < 0.0:
                u[:, 0] = np.where(v[:, 0] <= seg.target_velocity, 0.0, seg.u)
            else:
                u[:, 0] = np.where(v[:, 0] >= seg.target_velocity, 0.0, seg.u)

        if recv is not None:
            ff = np.where(recv[:, :, k], cfg.k_a * a[:, :-1], 0.0)
        elif ka_w != 0.0:
            ff = ka_w * a[:, :-1]
        else:
            ff = 0.0
        u[:, 1:] = ff - cfg.k_v * (v[:, 1:] - v[:, :-1]) - cfg.k_p * e_cur
        np.clip(u, -limits, accel_limit, out=u)

        a_n = a * c_aa + u * c_au
        v_n = v + a * c_va + u * c_vu
        x_n = x + v * dt + a * c_xa + u * c_xu

        neg = v_n < 0.0
        if neg.any():
            held = neg & (v == 0.0) & (a == 0.0)
            x_n = np.where(held, x, x_n)
            hard = neg & ~held & ~frozen
            for r, i in zip(*np.nonzero(hard)):
                s = stop_crossing_time(v[r, i], a[r, i], u[r, i], tau, dt)
                x_n[r, i] = x[r, i] + _position_delta_at(v[r, i], a[r, i], u[r, i], tau, s)
            v_n = np.where(neg, 0.0, v_n)
            a_n = np.where(neg, 0.0, a_n)

        x = np.where(frozen, x_frozen, x_n)
        v = np.where(frozen, 0.0, v_n)
        a = np.where(frozen, 0.0, a_n)

        gap = x[:, :-1] - x[:, 1:] - sc.params.length
        hit = (gap <= 0.0) & ~collided_pair
        if hit.any():
            t_hit = (k + 1) * dt
            collided_pair |= hit
            for r, p in zip(*np.nonzero(hit)):
                events[r].append((t_hit, int(p), int(p) + 1))
            fz = np.zeros((R, M), dtype=bool)
            fz[:, :-1] |= hit
            fz[:, 1:] |= hit
            new = fz & ~frozen
            x_frozen = np.where(new, x, x_frozen)
            frozen |= fz
            v = np.where(frozen, 0.0, v)
            a = np.where(frozen, 0.0, a)

        e_cur = record(k + 1)

    return err_series, peaks, events, limits, states


def run_realization(
    sc: ScenarioConfig, realization_index: int, include_states: bool = False
) -> RealizationResult:
    """Simulate one seeded realization in full."""
    if realization_index < 0:
        raise ConfigError("realization_index must be nonnegative")
    err, _, events, limits, states = _simulate_batch(
        sc, np.array([realization_index]), collect_errors=True, include_states=include_states
    )
    evs = tuple(events[0])
    return RealizationResult(
        index=realization_index,
        times=sc.times(),
        spacing_errors=err[0],
        collision_events=evs,
        collided=bool(evs),
        decel_limits=limits[0],
        states=states[0] if include_states else None,
    )


def run_realizations(sc: ScenarioConfig, indices) -> list[RealizationResult]:
    """Simulate several realizations (batched; identical to one-at-a-time runs)."""
    indices = np.asarray(indices, dtype=int)
    out: list[RealizationResult] = []
    for lo in range(0, len(indices), BATCH_SIZE):
        chunk = indices[lo : lo + BATCH_SIZE]
        err, _, events, limits, _ = _simulate_batch(sc, chunk, collect_errors=True)
        for j, idx in enumerate(chunk):
            evs = tuple(events[j])
            out.append(
                RealizationResult(
                    index=int(idx),
                    times=sc.times(),
                    spacing_errors=err[j],
                    collision_events=evs,
                    collided=bool(evs),
                    decel_limits=limits[j],
                )
            )
    return out


def aggregate_stats(results: list[RealizationResult]) -> SafetyStats:
    """Collision statistics and per-step cross-realization error variance.

    mean_events_per_unstable averages over collided realizations only and is
    None when nothing collided.  The unbiased variance needs at least two
    realizations; it is reported as zeros otherwise.
    """
    if not results:
        raise InvalidInputError("aggregate_stats requires a non-empty result list")
    n = len(results)
    n_collided = sum(r.collided for r in results)
    event_counts = [len(r.collision_events) for r in results if r.collided]
    mean_events = float(np.mean(event_counts)) if event_counts else None
    stack = np.stack([r.spacing_errors for r in results])
    if n >= 2:
        variance = stack.var(axis=0, ddof=1)
    else:
        variance = np.zeros_like(stack[0])
    return SafetyStats(
        n_realizations=n,
        n_collided=n_collided,
        p_collision=n_collided / n,
        mean_events_per_unstable=mean_events,
        variance_series=variance,
        times=results[0].times,
    )


def run_safety_study(
    sc: ScenarioConfig,
    mode: str | None = None,
    realizations: int | None = None,
    base_seed: int | None = None,
) -> SafetyStats:
    """Streamed many-realization study; equivalent to aggregate_stats(run_realizations).

    mode ('acc'/'cacc') overrides the configured controller mode so both
    platoon types can be compared on identical deceleration draws (the decel
    stream depends only on base seed and realization index).
    """
    if realizations is not None or base_seed is not None:
        sc = dataclasses.replace(
            sc,
            realizations=realizations if realizations is not None else sc.realizations,
            base_seed=base_seed if base_seed is not None else sc.base_seed,
        )
    n, T, F = sc.realizations, sc.n_steps, sc.n_followers
    sum_e = np.zeros((T + 1, F))
    sumsq_e = np.zeros((T + 1, F))
    n_collided = 0
    event_total = 0

    def on_step(k, x, v, a, e):
        sum_e[k] += e.sum(axis=0)
        sumsq_e[k] += (e * e).sum(axis=0)

    for lo in range(0, n, BATCH_SIZE):
        idx = np.arange(lo, min(lo + BATCH_SIZE, n))
        _, _, events, _, _ = _simulate_batch(sc, idx, mode=mode, on_step=on_step)
        for evs in events:
            if evs:
                n_collided += 1
                event_total += len(evs)

    if n >= 2:
        variance = (sumsq_e - sum_e * sum_e / n) / (n - 1)
        np.maximum(variance, 0.0, out=variance)
    else:
        variance = np.zeros_like(sum_e)
    return SafetyStats(
        n_realizations=n,
        n_collided=n_collided,
        p_collision=n_collided / n,
        mean_events_per_unstable=(event_total / n_collided) if n_collided else None,
        variance_series=variance,
        times=sc.times(),
    )


def validate_mean_trajectory(
    sc: ScenarioConfig, n_realizations: int, base_seed: int | None = None
) -> MeanValidationReport:
    """Compare the averaged stochastic state with the deterministic equivalent.

    Runs n stochastic realizations, averages the full state trajectories
    pointwise, then simulates the same scenario with the reception indicator
    replaced by its expectation.  Requires fixed deceleration limits (the
    equivalence claim concerns channel randomness only).
    """
    if n_realizations < 1:
        raise ConfigError("n_realizations must be >= 1")
    if sc.decel_dist is not None:
        raise ConfigError("validate_mean_trajectory requires fixed decel limits (decel_dist = None)")
    if base_seed is not None:
        sc = dataclasses.replace(sc, base_seed=base_seed)
    T, M = sc.n_steps, sc.n_vehicles

    det_sc = dataclasses.replace(
        sc, channel=ChannelSpec(kind="deterministic", gamma=sc.channel.effective_gamma())
    )
    det = np.empty((T + 1, M, 3))

    def on_det(k, x, v, a, e):
        det[k, :, 0] = x[0]
        det[k, :, 1] = v[0]
        det[k, :, 2] = a[0]

    _simulate_batch(det_sc, np.array([0]), on_step=on_det)

    # Accumulate deviations centered on the deterministic trajectory: states
    # carry hundreds of metres while their spread is millimetres, so the raw
    # sum-of-squares variance would cancel catastrophically.  Centered, the
    # leader and every pre-noise sample stay exactly zero.
    sum_c = np.zeros((T + 1, M, 3))
    sumsq_c = np.zeros((T + 1, M, 3))

    def on_step(k, x, v, a, e):
        diff = np.stack([x, v, a], axis=-1) - det[k]
        sum_c[k] += diff.sum(axis=0)
        sumsq_c[k] += (diff * diff).sum(axis=0)

    for lo in range(0, n_realizations, BATCH_SIZE):
        idx = np.arange(lo, min(lo + BATCH_SIZE, n_realizations))
        _simulate_batch(sc, idx, on_step=on_step)

    if n_realizations >= 2:
        var = (sumsq_c - sum_c * sum_c / n_realizations) / (n_realizations - 1)
        np.maximum(var, 0.0, out=var)
    else:
        var = np.zeros_like(sum_c)
    envelope = 3.0 * np.sqrt(var / n_realizations)

    dev = np.abs(sum_c / n_realizations)
    per_vehicle_max = np.empty(M)
    per_vehicle_env = np.empty(M)
    within = True
    for i in range(M):
        flat = np.argmax(dev[:, i, :])
        per_vehicle_max[i] = dev[:, i, :].flat[flat]
        per_vehicle_env[i] = envelope[:, i, :].flat[flat]
        if per_vehicle_max[i] > per_vehicle_env[i] + ENVELOPE_ATOL:
            within = False
    denom = np.maximum(envelope, ENVELOPE_ATOL)
    max_normalized = float((dev / denom).max())
    return MeanValidationReport(
        n_realizations=n_realizations,
        max_deviation=float(dev.max()),
        per_vehicle_max_deviation=per_vehicle_max,
        per_vehicle_envelope_at_max=per_vehicle_env,
        within_envelope=within,
        max_normalized=max_normalized,
    )


def cacc_system_matrix(
    cfg: ControllerConfig, tau: float, receptions, d_ignored: float = 0.0
) -> np.ndarray:
    """Stacked platoon system matrix with explicit reception indicators.

    State ordering (x_0, v_0, a_0, x_1, v_1, a_1, ...); receptions[i] is the
    indicator (or its expectation) on the link into follower i+1.  The
    standstill gap enters the affine input term only, never this matrix.
    """
    w = np.asarray(receptions, dtype=float)
    n_follow = len(w)
    m = 3 * (n_follow + 1)
    A = np.zeros((m, m))
    A[0, 1] = 1.0
    A[1, 2] = 1.0
    A[2, 2] = -1.0 / tau
    for i in range(1, n_follow + 1):
        r = 3 * i
        A[r, r + 1] = 1.0
        A[r + 1, r + 2] = 1.0
        A[r + 2, r - 3] = cfg.k_p / tau                       # x_{i-1}
        A[r + 2, r - 2] = cfg.k_v / tau                       # v_{i-1}
        A[r + 2, r - 1] = w[i - 1] * cfg.k_a / tau            # a_{i-1} (communicated)
        A[r + 2, r] = -cfg.k_p / tau                          # x_i
        A[r + 2, r + 1] = -(cfg.k_v + cfg.k_p * cfg.h_w) / tau  # v_i
        A[r + 2, r + 2] = -1.0 / tau                          # a_i
    return A
