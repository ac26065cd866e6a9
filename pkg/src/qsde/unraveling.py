"""Monte Carlo unravelings of the linear stochastic propagator equations.

Diffusive channels drive an Euler-Maruyama scheme for the unnormalized
propagator V; jump channels drive a piecewise deterministic evolution with
exact matrix-exponential flow between unit-rate Poisson arrivals and the
jump operator applied at each arrival.  Trajectory noise comes from
counter-based Philox substreams keyed by (master_seed, trajectory, channel)
through numpy's SeedSequence spawn keys, and the ensemble reducer combines
fixed-size trajectory chunks in index order, so results are bit-identical
for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalAbort
from .linalg import dagger, expm, frob, min_eig_hermitian

__all__ = [
    "DiffusiveChannel",
    "JumpChannel",
    "TrajectoryModel",
    "PathStream",
    "Trajectory",
    "EnsembleResult",
    "from_general_model",
    "simulate_diffusive",
    "simulate_jump",
    "propagate_diffusive",
    "propagate_jump",
    "flow_value",
    "ensemble",
    "substream",
]

_FLAG_RTOL = 1e-10

# Trajectories are reduced in fixed chunks of this size; changing it changes
# summation order and therefore the last bits of ensemble statistics.
ENSEMBLE_CHUNK = 512


@dataclass(frozen=True)
class DiffusiveChannel:
    """A Wiener-driven channel with coupling operator L."""

    L: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "L", np.asarray(self.L, dtype=complex))

    @property
    def kind(self) -> str:
        return "diffusive"


@dataclass(frozen=True)
class JumpChannel:
    """A Poisson-driven channel with jump operator J (and L = J - I)."""

    J: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "J", np.asarray(self.J, dtype=complex))

    @property
    def L(self) -> np.ndarray:
        return self.J - np.eye(self.J.shape[0], dtype=complex)

    @property
    def kind(self) -> str:
        return "jump"


@dataclass(frozen=True)
class TrajectoryModel:
    """Drift operator K plus a list of noise channels.

    The filtering / sub-filtering flags compare K + K+ against the summed
    L+ L of the channels (using L = J - I for jump channels); the unitary
    flags additionally require anti-Hermitian L (diffusive) or isometric J
    (jump).
    """

    n: int
    K: np.ndarray
    channels: tuple

    def __post_init__(self):
        n = int(self.n)
        K = np.asarray(self.K, dtype=complex)
        if K.shape != (n, n):
            raise ValueError(f"K must be {n}x{n}, got {K.shape}")
        channels = tuple(self.channels)
        for c, ch in enumerate(channels):
            if ch.L.shape != (n, n):
                raise ValueError(f"channel {c} operator must be {n}x{n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "channels", channels)

    @property
    def kind(self) -> str:
        kinds = {ch.kind for ch in self.channels}
        if len(kinds) > 1:
            return "mixed"
        return kinds.pop() if kinds else "diffusive"

    def _filtering_gap(self) -> np.ndarray:
        acc = self.K + dagger(self.K)
        for ch in self.channels:
            acc = acc - dagger(ch.L) @ ch.L
        return acc

    @property
    def is_filtering(self) -> bool:
        gap = self._filtering_gap()
        scale = max(frob(self.K), 1.0)
        return frob(gap) <= _FLAG_RTOL * scale

    @property
    def is_subfiltering(self) -> bool:
        gap = self._filtering_gap()
        scale = max(frob(self.K), 1.0)
        return min_eig_hermitian(gap) >= -_FLAG_RTOL * scale

    @property
    def is_unitary_diffusive(self) -> bool:
        if self.kind != "diffusive" or not self.is_filtering:
            return False
        return all(frob(ch.L + dagger(ch.L)) <= _FLAG_RTOL *
                   max(frob(ch.L), 1.0) for ch in self.channels)

    @property
    def is_unitary_jump(self) -> bool:
        if self.kind != "jump" or not self.is_filtering:
            return False
        eye = np.eye(self.n)
        return all(frob(dagger(ch.J) @ ch.J - eye) <= _FLAG_RTOL *
                   max(frob(ch.J), 1.0) for ch in self.channels)


def from_general_model(J, L_plus, K_minus, K, kind: str) -> TrajectoryModel:
    """Reduce the unified single-channel noise model to a classical case.

    kind="diffusive" requires J = I and L_plus = -K_minus and yields a
    Wiener channel with L = L_plus; kind="jump" requires L_plus = i(J - I)
    and K_minus = L_plus and yields a Poisson channel with jump operator J.
    Violations are rejected with the failed identity named.
    """
    J = np.asarray(J, dtype=complex)
    L_plus = np.asarray(L_plus, dtype=complex)
    K_minus = np.asarray(K_minus, dtype=complex)
    K = np.asarray(K, dtype=complex)
    n = K.shape[0]
    eye = np.eye(n, dtype=complex)
    scale = max(frob(J), frob(L_plus), frob(K_minus), 1.0)
    tol = _FLAG_RTOL * scale
    if kind == "diffusive":
        if frob(J - eye) > tol:
            raise ValueError("diffusive reduction requires J = I")
        if frob(L_plus + K_minus) > tol:
            raise ValueError("diffusive reduction requires L_plus = -K_minus")
        return TrajectoryModel(n, K, (DiffusiveChannel(L_plus),))
    if kind == "jump":
        if frob(L_plus - 1j * (J - eye)) > tol:
            raise ValueError("jump reduction requires L_plus = i*(J - I)")
        if frob(K_minus - L_plus) > tol:
            raise ValueError("jump reduction requires K_minus = L_plus")
        return TrajectoryModel(n, K, (JumpChannel(J),))
    raise ValueError(f"kind must be 'diffusive' or 'jump', got {kind!r}")


# ---------------------------------------------------------------------------
# random substreams


def substream(master_seed: int, traj_index: int, channel_index: int
              ) -> np.random.Generator:
    """Philox generator for one (trajectory, channel) substream.

    Keying is SeedSequence(master_seed, spawn_key=(traj_index, channel)), so
    every substream is reproducible independently of execution order.
    """
    ss = np.random.SeedSequence(int(master_seed),
                                spawn_key=(int(traj_index),
                                           int(channel_index)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class PathStream:
    """Bundle of per-channel substreams for one trajectory."""

    master_seed: int
    traj_index: int

    def channel(self, channel_index: int) -> np.random.Generator:
        return substream(self.master_seed, self.traj_index, channel_index)


def _validate_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-D array with at least two points")
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def _diffusive_increments(stream: PathStream, grid: np.ndarray,
                          n_channels: int) -> np.ndarray:
    """Wiener increments, one column per channel, variance dt per step."""
    dts = np.diff(grid)
    sqrt_dts = np.sqrt(dts)
    out = np.empty((dts.size, n_channels))
    for c in range(n_channels):
        out[:, c] = stream.channel(c).standard_normal(dts.size) * sqrt_dts
    return out


def _jump_times(stream: PathStream, grid: np.ndarray, n_channels: int
                ) -> list[np.ndarray]:
    """Unit-rate Poisson arrivals on [0, T) per channel: a Poisson count
    followed by sorted uniform positions."""
    span = float(grid[-1] - grid[0])
    times = []
    for c in range(n_channels):
        g = stream.channel(c)
        count = int(g.poisson(span))
        times.append(np.sort(g.uniform(0.0, span, count)))
    return times


# ---------------------------------------------------------------------------
# single-trajectory simulation


@dataclass(frozen=True)
class Trajectory:
    """One sampled propagator path on a time grid.

    ``propagators[j]`` is V at grid point j (V[0] = I); ``noise_record``
    holds the Wiener increments or the exact jump times per channel.
    """

    grid: np.ndarray
    propagators: np.ndarray
    noise_record: tuple
    seed_info: tuple
    kind: str

    @property
    def n(self) -> int:
        return self.propagators.shape[-1]


def _check_finite_path(values: np.ndarray, what: str) -> None:
    finite = np.isfinite(values).reshape(values.shape[0], -1).all(axis=1)
    if not finite.all():
        step = int(np.argmin(finite))
        raise NumericalAbort(f"{what} produced nonfinite values at grid "
                             f"step {step}")


def propagate_diffusive(model: TrajectoryModel, grid, increments
                        ) -> np.ndarray:
    """Euler-Maruyama propagation of V given explicit Wiener increments.

    increments has shape (len(grid) - 1, n_channels); V stepping is
    V <- V - K V dt + sum_c L_c V dQ_c.
    """
    grid = _validate_grid(grid)
    increments = np.asarray(increments, dtype=float)
    n = model.n
    steps = grid.size - 1
    if increments.shape != (steps, len(model.channels)):
        raise ValueError("increments shape does not match grid and channels")
    dts = np.diff(grid)
    K = model.K
    Ls = [ch.L for ch in model.channels]
    V = np.empty((steps + 1, n, n), dtype=complex)
    V[0] = np.eye(n)
    cur = V[0]
    for j in range(steps):
        nxt = cur - dts[j] * (K @ cur)
        for c, L in enumerate(Ls):
            nxt = nxt + increments[j, c] * (L @ cur)
        V[j + 1] = nxt
        cur = nxt
    return V


def simulate_diffusive(model: TrajectoryModel, grid, stream: PathStream
                       ) -> Trajectory:
    """Sample one diffusive trajectory from the stream's substreams."""
    if model.kind != "diffusive":
        raise ValueError("simulate_diffusive requires all channels diffusive")
    grid = _validate_grid(grid)
    dq = _diffusive_increments(stream, grid, len(model.channels))
    V = propagate_diffusive(model, grid, dq)
    _check_finite_path(V, "diffusive propagation")
    return Trajectory(
        grid=grid,
        propagators=V,
        noise_record=tuple(dq[:, c].copy() for c in range(dq.shape[1])),
        seed_info=(stream.master_seed, stream.traj_index),
        kind="diffusive",
    )


def _merge_events(jump_times: list[np.ndarray]):
    """Merge per-channel arrival times into one (times, channels) pair
    ordered by time, ties broken by channel index."""
    if not jump_times:
        return np.empty(0), np.empty(0, dtype=int)
    t_all = np.concatenate(jump_times)
    c_all = np.concatenate([np.full(t.size, c, dtype=int)
                            for c, t in enumerate(jump_times)])
    order = np.lexsort((c_all, t_all))
    return t_all[order], c_all[order]


class _FlowCache:
    """Matrix exponential flows exp(-A * dt), memoized on the exact dt."""

    def __init__(self, A: np.ndarray):
        self.A = A
        self.eye = np.eye(A.shape[0], dtype=complex)
        self.cache: dict[float, np.ndarray] = {}

    def __call__(self, delta: float) -> np.ndarray:
        if delta == 0.0:
            return self.eye
        F = self.cache.get(delta)
        if F is None:
            F = expm(-self.A * delta)
            self.cache[delta] = F
        return F


def propagate_jump(model: TrajectoryModel, grid, jump_times) -> np.ndarray:
    """Piecewise deterministic propagation of V given exact jump times.

    Between arrivals V follows exp(-(K + sum_c L_c) * dt); at an arrival of
    channel c, V <- J_c V.  Jump times are not snapped to the grid.
    """
    grid = _validate_grid(grid)
    n = model.n
    steps = grid.size - 1
    A = model.K + sum(ch.L for ch in model.channels)
    Js = [ch.J for ch in model.channels]
    flow = _FlowCache(A)
    ev_t, ev_c = _merge_events(list(jump_times))
    V = np.empty((steps + 1, n, n), dtype=complex)
    V[0] = np.eye(n)
    cur = V[0]
    e = 0
    for j in range(steps):
        t1 = grid[j + 1]
        tcur = grid[j]
        while e < ev_t.size and ev_t[e] < t1:
            cur = flow(float(ev_t[e] - tcur)) @ cur
            cur = Js[ev_c[e]] @ cur
            tcur = ev_t[e]
            e += 1
        cur = flow(float(t1 - tcur)) @ cur
        V[j + 1] = cur
    return V


def simulate_jump(model: TrajectoryModel, grid, stream: PathStream
                  ) -> Trajectory:
    """Sample one jump trajectory: unit-rate arrivals, exact flows."""
    if model.kind != "jump":
        raise ValueError("simulate_jump requires all channels jump")
    grid = _validate_grid(grid)
    times = _jump_times(stream, grid, len(model.channels))
    V = propagate_jump(model, grid, times)
    _check_finite_path(V, "jump propagation")
    return Trajectory(
        grid=grid,
        propagators=V,
        noise_record=tuple(times),
        seed_info=(stream.master_seed, stream.traj_index),
        kind="jump",
    )


def flow_value(traj: Trajectory, B, psi0) -> np.ndarray:
    """Time series <psi0| V+ B V |psi0> along the trajectory grid."""
    n = traj.n
    B = np.asarray(B, dtype=complex)
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if B.shape != (n, n):
        raise ValueError(f"B must be {n}x{n}, got {B.shape}")
    if psi0.shape != (n,):
        raise ValueError(f"psi0 must have length {n}")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-8:
        raise ValueError("psi0 must be a unit vector")
    psis = traj.propagators @ psi0
    return np.einsum("jp,pq,jq->j", psis.conj(), B, psis)


# ---------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class EnsembleResult:
    """Seeded Monte Carlo statistics over trajectories.

    ``means[o]`` and ``stderrs[o]`` follow the order of ``names``;
    ``norm_mean``/``norm_stderr`` track <|psi|^2>.  Standard errors are the
    sample standard deviation over n_traj divided by sqrt(n_traj), zero by
    convention for a single trajectory.
    """

    grid: np.ndarray
    names: tuple
    means: np.ndarray
    stderrs: np.ndarray
    norm_mean: np.ndarray
    norm_stderr: np.ndarray
    n_traj: int
    master_seed: int

    def mean_of(self, name: str) -> np.ndarray:
        return self.means[self.names.index(name)]

    def stderr_of(self, name: str) -> np.ndarray:
        return self.stderrs[self.names.index(name)]


def _resolve_workers(workers=None) -> int:
    if workers is None:
        raw = os.environ.get("QSDE_THREADS", "0").strip()
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigError(f"QSDE_THREADS must be an integer, got {raw!r}")
    workers = int(workers)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def _psis_diffusive(model, grid, psi0, dq) -> np.ndarray:
    """Batched Euler-Maruyama on state vectors; dq has shape (B, M, C)."""
    dts = np.diff(grid)
    B, M, _ = dq.shape
    n = model.n
    K = model.K
    Ls = [ch.L for ch in model.channels]
    psis = np.empty((B, M + 1, n), dtype=complex)
    psis[:, 0] = psi0
    cur = psis[:, 0].copy()
    for j in range(M):
        nxt = cur - dts[j] * np.einsum("pq,bq->bp", K, cur)
        for c, L in enumerate(Ls):
            nxt = nxt + dq[:, j, c, None] * np.einsum("pq,bq->bp", L, cur)
        psis[:, j + 1] = nxt
        cur = nxt
    return psis


def _psis_jump(model, grid, psi0, times_per_traj) -> np.ndarray:
    """Batched piecewise-deterministic propagation on state vectors."""
    n = model.n
    M = grid.size - 1
    B = len(times_per_traj)
    A = model.K + sum(ch.L for ch in model.channels)
    Js = [ch.J for ch in model.channels]
    flow = _FlowCache(A)
    dts = np.diff(grid)

    by_interval: dict[int, list] = {}
    for b, times in enumerate(times_per_traj):
        ev_t, ev_c = _merge_events(list(times))
        if ev_t.size == 0:
            continue
        iv = np.searchsorted(grid, ev_t, side="right") - 1
        for t, c, j in zip(ev_t, ev_c, iv):
            by_interval.setdefault(int(j), []).append((b, float(t), int(c)))

    psis = np.empty((B, M + 1, n), dtype=complex)
    psis[:, 0] = psi0
    cur = psis[:, 0].copy()
    for j in range(M):
        F = flow(float(dts[j]))
        nxt = np.einsum("pq,bq->bp", F, cur)
        hits = by_interval.get(j)
        if hits:
            redo: dict[int, list] = {}
            for b, t, c in hits:
                redo.setdefault(b, []).append((t, c))
            for b, evs in redo.items():
                v = cur[b]
                tcur = grid[j]
                for t, c in evs:
                    v = flow(float(t - tcur)) @ v
                    v = Js[c] @ v
                    tcur = t
                nxt[b] = flow(float(grid[j + 1] - tcur)) @ v
        psis[:, j + 1] = nxt
        cur = nxt
    return psis


def _chunk_sums(model, obs_mats, psi0, grid, master_seed, lo, hi):
    """Partial sums (value, squared magnitude) over trajectories [lo, hi)."""
    nch = len(model.channels)
    B = hi - lo
    if model.kind == "diffusive":
        M = grid.size - 1
        dq = np.empty((B, M, nch))
        for i, traj in enumerate(range(lo, hi)):
            dq[i] = _diffusive_increments(PathStream(master_seed, traj),
                                          grid, nch)
        psis = _psis_diffusive(model, grid, psi0, dq)
    elif model.kind == "jump":
        times = [_jump_times(PathStream(master_seed, traj), grid, nch)
                 for traj in range(lo, hi)]
        psis = _psis_jump(model, grid, psi0, times)
    else:
        raise ValueError("ensemble requires a single-kind channel list")

    finite = np.isfinite(psis).reshape(B, -1).all(axis=1)
    if not finite.all():
        bad = [lo + int(i) for i in np.nonzero(~finite)[0]]
        raise NumericalAbort(
            f"nonfinite propagator values in trajectories {bad}")

    vals = np.einsum("bjp,opq,bjq->obj", psis.conj(), obs_mats, psis)
    norms = np.einsum("bjp,bjp->bj", psis.conj(), psis).real
    return (
        vals.sum(axis=1),
        (np.abs(vals) ** 2).sum(axis=1),
        norms.sum(axis=0),
        (norms ** 2).sum(axis=0),
    )


def ensemble(model: TrajectoryModel, observables, psi0, n_traj: int, grid,
             master_seed: int, workers=None) -> EnsembleResult:
    """Run ``n_traj`` trajectories and reduce means and standard errors.

    ``observables`` maps names to n x n matrices; insertion order is kept.
    Trajectory k draws from substreams keyed by (master_seed, k, channel).
    Work is split into fixed chunks that may run on a thread pool sized by
    ``workers`` (default: the QSDE_THREADS environment variable, 0 = auto);
    the reduction always happens in chunk order, so the result is
    bit-identical for every worker count.  Aborted trajectories raise, and
    no partial result is returned.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    grid = _validate_grid(grid)
    n = model.n
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi0.shape != (n,):
        raise ValueError(f"psi0 must have length {n}")
    names = tuple(observables)
    if names:
        obs_mats = np.stack([np.asarray(observables[name], dtype=complex)
                             for name in names])
        if obs_mats.shape[1:] != (n, n):
            raise ValueError(f"observables must be {n}x{n} matrices")
    else:
        obs_mats = np.zeros((0, n, n), dtype=complex)

    bounds = [(lo, min(lo + ENSEMBLE_CHUNK, n_traj))
              for lo in range(0, n_traj, ENSEMBLE_CHUNK)]
    workers = _resolve_workers(workers)

    def run(bound):
        lo, hi = bound
        return _chunk_sums(model, obs_mats, psi0, grid, master_seed, lo, hi)

    if workers == 1 or len(bounds) == 1:
        partials = [run(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run, bounds))

    M1 = grid.size
    s1 = np.zeros((len(names), M1), dtype=complex)
    s2 = np.zeros((len(names), M1))
    s1n = np.zeros(M1)
    s2n = np.zeros(M1)
    for p1, p2, p1n, p2n in partials:
        s1 += p1
        s2 += p2
        s1n += p1n
        s2n += p2n

    means = s1 / n_traj
    norm_mean = s1n / n_traj
    if n_traj > 1:
        var = np.maximum(s2 - np.abs(s1) ** 2 / n_traj, 0.0) / (n_traj - 1)
        nvar = np.maximum(s2n - s1n ** 2 / n_traj, 0.0) / (n_traj - 1)
        stderrs = np.sqrt(var / n_traj)
        norm_stderr = np.sqrt(nvar / n_traj)
    else:
        stderrs = np.zeros((len(names), M1))
        norm_stderr = np.zeros(M1)

    return EnsembleResult(
        grid=grid,
        names=names,
        means=means,
        stderrs=stderrs,
        norm_mean=norm_mean,
        norm_stderr=norm_stderr,
        n_traj=int(n_traj),
        master_seed=int(master_seed),
    )
