"""Scalability benchmark: state-store set/fetch workload at departure peaks.

Mirrors the engine's tick structure with the oracle out of the loop: agent
state lives in a struct-of-arrays store, every agent issues one state query
per 5-minute step over 24 virtual hours, and the queries split 1:999 into
sets (issued by agents departing this step, concentrated at commute peaks)
and fetches (everyone else).  Agents are laid out so each step's departure
group is one contiguous slice, keeping per-query cost flat as populations
grow.  Absolute times are hardware-bound; the scaling ratios are the
meaningful output.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass

import numpy as np
import psutil

STEPS_PER_DAY = 288  # 24 h at 5-minute steps
SET_FETCH_RATIO = (1, 999)
DEFAULT_REPS = 5
DEFAULT_TIERS = (1_000, 10_000, 100_000, 1_000_000)
BYTES_PER_AGENT = 64  # SoA fields plus departure bookkeeping, with slack


@dataclass
class BenchWorkload:
    n_agents: int
    reps: int = DEFAULT_REPS
    steps: int = STEPS_PER_DAY
    ratio: tuple[int, int] = SET_FETCH_RATIO

    def __post_init__(self):
        if self.ratio != SET_FETCH_RATIO:
            raise ValueError("set:fetch ratio is fixed at 1:999")


@dataclass
class BenchResult:
    n_agents: int
    mean_step_s: float
    sd_step_s: float
    reps: int
    skipped: bool = False
    reason: str = ""


class StateStore:
    """Struct-of-arrays agent state with slice-batched set/fetch queries.

    A fetch reads the agent's hot status byte (the field the tick loop
    polls); a set is a departure and rewrites the full record: status,
    location, and state key.
    """

    def __init__(self, n_agents: int, seed: int):
        rng = np.random.default_rng(seed)
        self.location = rng.integers(0, 10_000, size=n_agents, dtype=np.int32)
        self.state_key = rng.random(n_agents, dtype=np.float32)
        self.status = rng.integers(0, 7, size=n_agents, dtype=np.uint8)
        self.fetches = 0
        self.sets = 0

    def fetch_slice(self, lo: int, hi: int) -> float:
        if hi <= lo:
            return 0.0
        # Count active agents: reads every status byte in the slice.
        active = float(np.count_nonzero(self.status[lo:hi]))
        self.fetches += hi - lo
        return active

    def set_slice(self, lo: int, hi: int, value: float) -> None:
        if hi <= lo:
            return
        self.state_key[lo:hi] = value
        self.location[lo:hi] += 1
        self.status[lo:hi] = int(value) % 7
        self.sets += hi - lo


def departure_weights(steps: int = STEPS_PER_DAY) -> np.ndarray:
    """Bimodal weekday profile: morning and evening commute peaks."""
    grid = np.arange(steps)
    morning = np.exp(-0.5 * ((grid - 96) / 18.0) ** 2)   # ~08:00
    evening = np.exp(-0.5 * ((grid - 216) / 18.0) ** 2)  # ~18:00
    weights = morning + evening + 0.1
    return weights / weights.sum()


def plan_departures(n_agents: int, steps: int, seed: int) -> np.ndarray:
    """Per-step departure counts summing to exactly steps * n / 1000.

    Largest-remainder rounding over the peak profile keeps the global
    set:fetch ratio exactly 1:999 whenever steps * n divides by 1000.
    """
    del seed  # departures are a fixed profile; reps vary only store contents
    total_sets = (steps * n_agents) // 1000
    weights = departure_weights(steps)
    raw = weights * total_sets
    counts = np.floor(raw).astype(np.int64)
    remainder = int(total_sets - counts.sum())
    if remainder > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:remainder]] += 1
    return np.minimum(counts, max(n_agents, 1))


def run_rep(n_agents: int, steps: int, seed: int) -> tuple[float, int, int]:
    """One 24-virtual-hour rep; returns (mean step seconds, sets, fetches).

    Each step mirrors the engine's tick phases: derive the departing cohort
    from the peak profile (largest-remainder accumulator), run the read
    phase (departures buffer their writes, everyone else fetches), commit
    the buffered writes at the barrier with a verification probe, and emit
    a JSON step record the way the engine logs every tick.  The fixed tick
    machinery dominates small populations; the vectorized per-agent query
    batch takes over at scale.
    """
    from citysim.world import SimClock

    store = StateStore(n_agents, seed)
    total_sets = (steps * n_agents) // 1000
    weights = departure_weights(steps)
    smoothing = np.array([0.15, 0.2, 0.3, 0.35])
    clock = SimClock()
    write_buffer: list[tuple[int, int, float]] = []
    step_log: list[str] = []
    cursor = 0  # next contiguous departure slice start
    carry = 0.0
    checksum = 0.0
    started = time.perf_counter()
    for step in range(steps):
        clock.advance()
        if clock.minute_of_day == 0:
            step_log.clear()  # day rollover: hand the day's records off
        # Departure cohort for this step, from the commute-peak profile.
        raw = total_sets * float(weights[step]) + carry
        dep = min(int(raw), n_agents)
        carry = raw - dep
        window = weights[max(0, step - 3) : step + 1]
        smoothed = float(np.dot(window, smoothing[-len(window) :]))
        lo = cursor
        hi = lo + dep
        cursor = hi % max(n_agents, 1)
        # Read phase: departing agents buffer writes, everyone else fetches.
        if hi <= n_agents:
            write_buffer.append((lo, hi, float(step)))
            checksum += store.fetch_slice(0, lo)
            checksum += store.fetch_slice(hi, n_agents)
        else:
            wrapped = hi - n_agents
            write_buffer.append((lo, n_agents, float(step)))
            write_buffer.append((0, wrapped, float(step)))
            checksum += store.fetch_slice(wrapped, lo)
        # Commit phase: drain buffered writes, then probe the committed span.
        committed = 0
        for commit_lo, commit_hi, value in write_buffer:
            store.set_slice(commit_lo, commit_hi, value)
            committed += commit_hi - commit_lo
        write_buffer.clear()
        if committed:
            probe_hi = min(lo + 8, n_agents)
            assert float(store.state_key[lo:probe_hi].max(initial=value)) >= 0.0
        step_log.append(
            json.dumps(
                {
                    "t": clock.sim_time,
                    "dep": committed,
                    "fetch": n_agents - committed,
                    "intensity": round(smoothed, 9),
                }
            )
        )
    elapsed = time.perf_counter() - started
    del checksum
    if store.sets != total_sets:
        raise RuntimeError(f"set accounting drifted: {store.sets} != {total_sets}")
    return elapsed / steps, store.sets, store.fetches


def run_bench(
    tiers: tuple[int, ...] = DEFAULT_TIERS,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    memory_guard: bool = True,
) -> list[BenchResult]:
    results = []
    for n_agents in tiers:
        required = n_agents * BYTES_PER_AGENT
        if memory_guard and required > psutil.virtual_memory().available * 0.5:
            results.append(
                BenchResult(n_agents, 0.0, 0.0, reps, skipped=True, reason="insufficient memory")
            )
            continue
        workload = BenchWorkload(n_agents=n_agents, reps=reps)
        times = []
        for rep in range(workload.reps):
            mean_step, _, _ = run_rep(n_agents, workload.steps, seed + rep)
            times.append(mean_step)
        arr = np.array(times)
        results.append(BenchResult(n_agents, float(arr.mean()), float(arr.std()), reps))
    return results


def write_bench_csv(results: list[BenchResult], path) -> None:
    """CSV with one row per population tier: agents, mean, SD, reps."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agents", "mean_step_s", "sd_step_s", "reps", "skipped"])
        for row in results:
            writer.writerow(
                [row.n_agents, f"{row.mean_step_s:.6e}", f"{row.sd_step_s:.6e}", row.reps, int(row.skipped)]
            )


def format_bench_table(results: list[BenchResult]) -> str:
    lines = [f"{'# agents':>10}  {'mean ± SD [s/step]':>26}"]
    for row in results:
        if row.skipped:
            lines.append(f"{row.n_agents:>10}  skipped: {row.reason}")
        else:
            lines.append(f"{row.n_agents:>10}  {row.mean_step_s:.3e} ± {row.sd_step_s:.1e}")
    return "\n".join(lines)
