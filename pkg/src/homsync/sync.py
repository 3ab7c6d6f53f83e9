"""Dual-herald synchronization: Poisson herald streams, duty gating, pairing.

Two heralded sources fire independently; a pair event needs both heralds
inside a coincidence window tau_max, with the earlier photon waiting in its
memory.  Two event counters are provided: the full protocol state machine
(first herald opens an attempt, timeout costs a dead-time reload) and an
idealized counter (every ordered cross-stream pair inside the window) whose
expectation matches the small-window rate formula exactly.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .rng import substream
from .temporal import MemoryModel, purity_vs_storage

__all__ = [
    "EVENT_CSV_HEADER",
    "HeraldEvent",
    "HeraldLog",
    "SyncConfig",
    "WindowPurityCurve",
    "analytic_dual_rate",
    "enhancement_factor",
    "events_from_csv",
    "purity_vs_window",
    "simulate_dual_heralds",
]

EVENT_CSV_HEADER = "release_time_s,storage1_ns,storage2_ns"

# live-time arrivals are generated in batches of roughly this size
_CHUNK_ARRIVALS = 2_000_000


@dataclass(frozen=True)
class SyncConfig:
    """Parameters of the dual-herald experiment.

    Rates are wall-clock averaged herald rates (counts per second); the
    duty cycle gates both sources with a deterministic period (period_us)
    of which the fraction `duty` is live.  tau_max is the pairing window,
    dead_time the reload cost of a timed-out attempt (both microseconds).
    `idealized` selects the all-ordered-pairs counter instead of the
    protocol state machine.
    """

    rate1_cps: float
    rate2_cps: float
    duty: float
    tau_max_us: float
    total_time_s: float
    dead_time_us: float = 5.0
    period_us: float = 200.0
    seed: int = 0
    idealized: bool = False

    def __post_init__(self) -> None:
        if self.rate1_cps < 0.0 or self.rate2_cps < 0.0:
            raise ConfigError("herald rates must be >= 0")
        if not (0.0 < self.duty <= 1.0):
            raise ConfigError(f"duty must lie in (0, 1], got {self.duty}")
        if self.tau_max_us <= 0.0:
            raise ConfigError(f"tau_max_us must be positive, got {self.tau_max_us}")
        if self.dead_time_us < 0.0:
            raise ConfigError(f"dead_time_us must be >= 0, got {self.dead_time_us}")
        if self.total_time_s <= 0.0:
            raise ConfigError(f"total_time_s must be positive, got {self.total_time_s}")
        if self.period_us <= 0.0:
            raise ConfigError(f"period_us must be positive, got {self.period_us}")
        if self.duty < 1.0 and self.tau_max_us > self.duty * self.period_us:
            raise ConfigError("pairing window exceeds one live segment")

    @property
    def live_fraction(self) -> float:
        return self.duty


@dataclass(frozen=True)
class HeraldEvent:
    """One synchronized pair: the earlier herald's photon accrues storage."""

    release_time_s: float
    storage1_ns: float
    storage2_ns: float

    def __post_init__(self) -> None:
        if min(self.storage1_ns, self.storage2_ns) != 0.0:
            raise ValueError("exactly one photon is released immediately")


@dataclass
class HeraldLog:
    """Result of a synchronization run."""

    config: SyncConfig
    release_time_s: np.ndarray
    storage1_ns: np.ndarray
    storage2_ns: np.ndarray
    n_events: int
    analytic_rate_cps: float
    empirical_rate_cps: float
    n_attempts: int
    hist_edges_ns: np.ndarray
    hist_counts: np.ndarray = field(repr=False)

    @property
    def rate_deficit(self) -> float:
        """Fractional shortfall of the empirical rate vs the formula."""
        if self.analytic_rate_cps == 0.0:
            return 0.0
        return 1.0 - self.empirical_rate_cps / self.analytic_rate_cps

    def event(self, i: int) -> HeraldEvent:
        return HeraldEvent(
            float(self.release_time_s[i]),
            float(self.storage1_ns[i]),
            float(self.storage2_ns[i]),
        )

    def storage_gaps_ns(self) -> np.ndarray:
        """Wait time of the stored photon, one value per event."""
        return self.storage1_ns + self.storage2_ns

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(EVENT_CSV_HEADER + "\n")
            for t, s1, s2 in zip(self.release_time_s, self.storage1_ns, self.storage2_ns):
                fh.write(f"{float(t)!r},{float(s1)!r},{float(s2)!r}\n")

    def summary_dict(self) -> dict:
        return {
            "rate1_cps": self.config.rate1_cps,
            "rate2_cps": self.config.rate2_cps,
            "duty": self.config.duty,
            "tau_max_us": self.config.tau_max_us,
            "dead_time_us": self.config.dead_time_us,
            "period_us": self.config.period_us,
            "total_time_s": self.config.total_time_s,
            "seed": self.config.seed,
            "idealized": self.config.idealized,
            "n_events": self.n_events,
            "n_attempts": self.n_attempts,
            "analytic_rate_cps": self.analytic_rate_cps,
            "empirical_rate_cps": self.empirical_rate_cps,
            "rate_deficit": self.rate_deficit,
            "storage_hist_edges_ns": [float(e) for e in self.hist_edges_ns],
            "storage_hist_counts": [int(c) for c in self.hist_counts],
        }

    def summary_to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def events_from_csv(path):
    """Read back an event log written by HeraldLog.to_csv."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != EVENT_CSV_HEADER:
            raise ValueError(f"unexpected event-log header {header!r}")
        rows = [line.split(",") for line in fh.read().split()]
    release = np.array([float(r[0]) for r in rows])
    s1 = np.array([float(r[1]) for r in rows])
    s2 = np.array([float(r[2]) for r in rows])
    return release, s1, s2


def analytic_dual_rate(config: SyncConfig) -> float:
    """Small-window dual-herald rate 2 * tau * R1 * R2 / duty (per second).

    Warns when the window is not small compared to the live inter-herald
    spacing, where the formula starts to overcount.
    """
    tau_s = config.tau_max_us * 1e-6
    live_rate = (config.rate1_cps + config.rate2_cps) / config.duty
    if tau_s * live_rate > 0.05:
        warnings.warn(
            "pairing window is not small against the live herald spacing; "
            "the linear rate formula overestimates",
            stacklevel=2,
        )
    return 2.0 * tau_s * config.rate1_cps * config.rate2_cps / config.duty


def enhancement_factor(tau_max_ns: float, coherence_time_ns: float) -> float:
    """Ratio of the synchronization window to the free-running coherence window."""
    if tau_max_ns <= 0.0 or coherence_time_ns <= 0.0:
        raise ValueError("both windows must be positive")
    return tau_max_ns / coherence_time_ns


def _live_to_wall(t_live: np.ndarray, config: SyncConfig) -> np.ndarray:
    """Map gated live-clock times to wall-clock times."""
    seg = config.duty * config.period_us * 1e-6
    period = config.period_us * 1e-6
    return np.floor(t_live / seg) * period + np.mod(t_live, seg)


class _ArrivalStream:
    """Chunked Poisson arrivals on the live clock."""

    def __init__(self, rate_live: float, rng):
        self.rate = rate_live
        self.rng = rng
        self.last = 0.0
        self.pending = np.empty(0)

    def until(self, t_stop: float) -> np.ndarray:
        """All remaining arrivals at times <= t_stop, in order."""
        if self.rate == 0.0:
            return np.empty(0)
        blocks = [self.pending] if self.pending.size else []
        scale = 1.0 / self.rate
        while self.last <= t_stop:
            n = max(int((t_stop - self.last) * self.rate * 1.06) + 64, 64)
            block = self.last + np.cumsum(self.rng.exponential(scale, size=n))
            self.last = float(block[-1])
            blocks.append(block)
        if not blocks:
            self.pending = np.empty(0)
            return np.empty(0)
        arr = np.concatenate(blocks) if len(blocks) > 1 else blocks[0]
        keep = arr <= t_stop
        self.pending = arr[~keep]
        return arr[keep]


def _stream_rngs(config: SyncConfig, stream_seeds):
    if stream_seeds is None:
        return (
            substream(config.seed, "heralds:1"),
            substream(config.seed, "heralds:2"),
        )
    s1, s2 = stream_seeds
    return substream(s1, "arrivals"), substream(s2, "arrivals")


class _EventAccumulator:
    def __init__(self, config: SyncConfig, keep_events: bool, histogram_bins: int):
        self.config = config
        self.keep = keep_events
        self.release = []
        self.s1 = []
        self.s2 = []
        self.n_events = 0
        self.n_attempts = 0
        self.edges = np.linspace(0.0, config.tau_max_us * 1e3, histogram_bins + 1)
        self.hist = np.zeros(histogram_bins, dtype=np.int64)

    def add(self, release_live, storage1_ns, storage2_ns) -> None:
        self.n_events += release_live.size
        gaps = storage1_ns + storage2_ns
        self.hist += np.histogram(gaps, bins=self.edges)[0]
        if self.keep:
            self.release.append(release_live)
            self.s1.append(storage1_ns)
            self.s2.append(storage2_ns)

    def finish(self) -> HeraldLog:
        cfg = self.config
        if self.keep and self.release:
            release_live = np.concatenate(self.release)
            s1 = np.concatenate(self.s1)
            s2 = np.concatenate(self.s2)
            order = np.argsort(release_live, kind="stable")
            release = _live_to_wall(release_live[order], cfg)
            s1, s2 = s1[order], s2[order]
        else:
            release = np.empty(0)
            s1 = np.empty(0)
            s2 = np.empty(0)
        return HeraldLog(
            config=cfg,
            release_time_s=release,
            storage1_ns=s1,
            storage2_ns=s2,
            n_events=self.n_events,
            analytic_rate_cps=analytic_dual_rate(cfg),
            empirical_rate_cps=self.n_events / cfg.total_time_s,
            n_attempts=self.n_attempts,
            hist_edges_ns=self.edges,
            hist_counts=self.hist,
        )


def _pairs_against(firsts: np.ndarray, seconds: np.ndarray, tau_s: float):
    """All (first, second) ordered pairs with 0 <= second - first <= tau_s."""
    lo = np.searchsorted(firsts, seconds - tau_s, side="left")
    hi = np.searchsorted(firsts, seconds, side="left")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return np.empty(0), np.empty(0)
    offsets = np.repeat(np.cumsum(counts) - counts, counts)
    first_idx = np.repeat(lo, counts) + (np.arange(total) - offsets)
    second_times = np.repeat(seconds, counts)
    return second_times, second_times - firsts[first_idx]


def _simulate_idealized(config: SyncConfig, acc: _EventAccumulator, stream_seeds) -> None:
    tau_s = config.tau_max_us * 1e-6
    live_total = config.total_time_s * config.duty
    rng1, rng2 = _stream_rngs(config, stream_seeds)
    lam1 = config.rate1_cps / config.duty
    lam2 = config.rate2_cps / config.duty
    if lam1 == 0.0 or lam2 == 0.0:
        return
    stream1 = _ArrivalStream(lam1, rng1)
    stream2 = _ArrivalStream(lam2, rng2)
    chunk = max(_CHUNK_ARRIVALS / max(lam1, lam2), 10.0 * tau_s)
    tail1 = np.empty(0)
    tail2 = np.empty(0)
    t_lo = 0.0
    while t_lo < live_total:
        t_hi = min(t_lo + chunk, live_total)
        new1 = stream1.until(t_hi)
        new2 = stream2.until(t_hi)
        all1 = np.concatenate([tail1, new1])
        all2 = np.concatenate([tail2, new2])
        # stream 1 heralds first: photon 1 waits
        rel_a, gap_a = _pairs_against(all1, new2, tau_s)
        # stream 2 heralds first: photon 2 waits
        rel_b, gap_b = _pairs_against(all2, new1, tau_s)
        release = np.concatenate([rel_a, rel_b])
        s1 = np.concatenate([gap_a, np.zeros(rel_b.size)]) * 1e9
        s2 = np.concatenate([np.zeros(rel_a.size), gap_b]) * 1e9
        acc.add(release, s1, s2)
        tail1 = all1[all1 > t_hi - tau_s]
        tail2 = all2[all2 > t_hi - tau_s]
        t_lo = t_hi
    acc.n_attempts = acc.n_events


def _simulate_protocol(config: SyncConfig, acc: _EventAccumulator, stream_seeds) -> None:
    tau_s = config.tau_max_us * 1e-6
    dead_s = config.dead_time_us * 1e-6
    live_total = config.total_time_s * config.duty
    rng1, rng2 = _stream_rngs(config, stream_seeds)
    lam1 = config.rate1_cps / config.duty
    lam2 = config.rate2_cps / config.duty
    if lam1 == 0.0 or lam2 == 0.0:
        return
    stream1 = _ArrivalStream(lam1, rng1)
    stream2 = _ArrivalStream(lam2, rng2)
    chunk = max(_CHUNK_ARRIVALS / max(lam1, lam2), 100.0 * (tau_s + dead_s))
    carry1 = np.empty(0)
    carry2 = np.empty(0)
    cursor = 0.0
    t_lo = 0.0
    while t_lo < live_total:
        t_hi = min(t_lo + chunk, live_total)
        t1 = np.concatenate([carry1, stream1.until(t_hi)])
        t2 = np.concatenate([carry2, stream2.until(t_hi)])
        times = np.concatenate([t1, t2])
        stream_of = np.concatenate(
            [np.zeros(t1.size, dtype=np.int8), np.ones(t2.size, dtype=np.int8)]
        )
        order = np.argsort(times, kind="stable")
        times = times[order]
        stream_of = stream_of[order]
        n = times.size
        if n == 0:
            t_lo = t_hi
            continue

        # for each merged herald: the next opposite-stream herald after it
        pos = np.arange(n)
        pos1 = pos[stream_of == 0]
        pos2 = pos[stream_of == 1]
        partner_pos = np.full(n, n, dtype=np.int64)
        if pos2.size:
            k = np.searchsorted(pos2, pos1, side="left")
            partner_pos[pos1] = np.where(k < pos2.size, pos2[np.minimum(k, pos2.size - 1)], n)
        if pos1.size:
            k = np.searchsorted(pos1, pos2, side="left")
            partner_pos[pos2] = np.where(k < pos1.size, pos1[np.minimum(k, pos1.size - 1)], n)

        padded = np.append(times, np.inf)
        partner_time = padded[partner_pos]
        success = partner_time - times <= tau_s
        # index of the first herald available after the attempt resolves
        next_if_success = np.searchsorted(times, partner_time[success], side="right")
        next_idx = np.searchsorted(times, times + tau_s + dead_s, side="left")
        next_idx[success] = next_if_success

        # walk attempts sequentially; attempts that could spill past the
        # chunk end are deferred to the next chunk via the carry arrays
        safe_end = t_hi - (tau_s + dead_s)
        i = int(np.searchsorted(times, cursor, side="left"))
        ev_rel, ev_s1, ev_s2 = [], [], []
        attempts = 0
        t_list = times.tolist()
        ok_list = success.tolist()
        partner_list = partner_time.tolist()
        stream_list = stream_of.tolist()
        next_list = next_idx.tolist()
        while i < n and t_list[i] < safe_end:
            attempts += 1
            if ok_list[i]:
                ev_rel.append(partner_list[i])
                gap = (partner_list[i] - t_list[i]) * 1e9
                if stream_list[i] == 0:
                    ev_s1.append(gap)
                    ev_s2.append(0.0)
                else:
                    ev_s1.append(0.0)
                    ev_s2.append(gap)
                cursor = partner_list[i]
            else:
                cursor = t_list[i] + tau_s + dead_s
            i = next_list[i]
        acc.n_attempts += attempts
        if ev_rel:
            acc.add(
                np.array(ev_rel),
                np.array(ev_s1, dtype=float),
                np.array(ev_s2, dtype=float),
            )
        # heralds from the first unprocessed one onward stay in play; the
        # cursor keeps any dead-time lockout that extends past them
        kept_times = times[i:]
        kept_stream = stream_of[i:]
        carry1 = kept_times[kept_stream == 0]
        carry2 = kept_times[kept_stream == 1]
        t_lo = t_hi


def simulate_dual_heralds(
    config: SyncConfig,
    *,
    keep_events: bool = True,
    stream_seeds=None,
    histogram_bins: int = 100,
) -> HeraldLog:
    """Run the dual-herald synchronization and collect pair events.

    keep_events=False drops the per-event arrays (counts and the storage
    histogram are still accumulated), which keeps long runs in bounded
    memory.  stream_seeds optionally pins the two herald streams to their
    own seeds so runs with swapped arm labels reproduce mirrored events.
    """
    expected = analytic_dual_rate(config) * config.total_time_s
    if expected < 100.0:
        warnings.warn(
            f"run is short: only about {expected:.1f} pair events expected",
            stacklevel=2,
        )
    acc = _EventAccumulator(config, keep_events, histogram_bins)
    if config.idealized:
        _simulate_idealized(config, acc, stream_seeds)
    else:
        _simulate_protocol(config, acc, stream_seeds)
    return acc.finish()


@dataclass
class WindowPurityCurve:
    """Mean retrieval purity of each arm vs the pairing-window cut."""

    windows_us: np.ndarray
    mean_purity1: np.ndarray
    mean_purity2: np.ndarray
    n_events: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("tau_max_us,mean_purity1,mean_purity2,n_events\n")
            for w, p1, p2, n in zip(
                self.windows_us, self.mean_purity1, self.mean_purity2, self.n_events
            ):
                fh.write(f"{float(w)!r},{float(p1)!r},{float(p2)!r},{int(n)}\n")


def purity_vs_window(
    config: SyncConfig,
    memory1: MemoryModel,
    memory2: MemoryModel,
    windows_us=None,
    log: HeraldLog | None = None,
) -> WindowPurityCurve:
    """Sweep the analysis window over one simulated run.

    Events are filtered to those whose storage time fits the window; each
    arm's purity follows its storage-time decay (zero storage for the arm
    released immediately).
    """
    if log is None:
        log = simulate_dual_heralds(config, keep_events=True)
    if windows_us is None:
        windows_us = np.arange(0.1, config.tau_max_us + 1e-9, 0.1)
    windows_us = np.asarray(windows_us, dtype=float)
    if np.any(windows_us <= 0.0) or np.any(windows_us > config.tau_max_us + 1e-9):
        raise ValueError("windows must lie in (0, tau_max_us]")
    gaps = log.storage_gaps_ns()
    p1 = memory1.p0_retrieval * np.exp(-log.storage1_ns / memory1.tau_life)
    p2 = memory2.p0_retrieval * np.exp(-log.storage2_ns / memory2.tau_life)
    mean1 = np.empty(windows_us.size)
    mean2 = np.empty(windows_us.size)
    counts = np.empty(windows_us.size, dtype=np.int64)
    for k, w in enumerate(windows_us):
        mask = gaps <= w * 1e3
        counts[k] = int(np.count_nonzero(mask))
        if counts[k] == 0:
            mean1[k] = math.nan
            mean2[k] = math.nan
        else:
            mean1[k] = float(np.mean(p1[mask]))
            mean2[k] = float(np.mean(p2[mask]))
    return WindowPurityCurve(windows_us, mean1, mean2, counts)
