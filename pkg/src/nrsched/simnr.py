"""Slot/RBG-level single-cell 5G NR downlink simulator.

Timing follows the 3GPP frame structure: 10 ms frames, 10*2^mu slots per
frame, 12-subcarrier RBs grouped into RBGs of 2 RBs (the tail RBG of an odd
RB count carries a single RB). The scheduler is invoked once per RBG; the
per-user wideband MCS is redrawn at the channel coherence interval. HARQ is
modeled as eligibility blocking: a failed transport block is retransmitted
out-of-band at RTT expiries and never consumes a scheduler RBG.

Three independent RNG streams keep the channel (and traffic) realization a
function of (seed, config) alone, so different schedulers can be compared on
identical channel traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nrsched import kpi
from nrsched.mcs import McsEntry, N_VALID_MCS, mcs_entry

SUBCARRIERS_PER_RB = 12
SYMBOLS_PER_SLOT = 14

# (bandwidth MHz, RB count) per numerology index, as tested.
STANDARD_CELLS = {0: (5, 25), 1: (10, 24), 2: (20, 24)}


@dataclass
class CellConfig:
    """Cell-level parameters; defaults are the 5 MHz / 15 kHz SCS setting."""

    mu: int = 0
    bandwidth_mhz: int = 5
    n_rb: int = 25
    rbg_size: int = 2
    n_ue: int = 4
    frames: int = 250
    coherence_s: float = 0.25
    # Per-RBG transport-block error probability. Kept well below the classic
    # 10%-per-TB operating point: TBs here are per RBG (up to 13 per slot and
    # UE), so 0.10 per TB would saturate HARQ blocking and leave the
    # scheduler with a near-singleton eligible set most of the time.
    bler: float = 0.07
    harq_rtt: int = 4
    harq_max_retx: int = 3
    activity_prob: float = 1.0  # 1.0 = full-buffer traffic, else per-slot Bernoulli on/off

    def __post_init__(self):
        if self.mu not in (0, 1, 2):
            raise ValueError(f"unsupported numerology index {self.mu}")
        if self.n_rb < 1 or self.rbg_size < 1 or self.n_ue < 1:
            raise ValueError("n_rb, rbg_size and n_ue must be >= 1")
        if not 0.0 <= self.bler < 1.0:
            raise ValueError(f"BLER must be in [0, 1), got {self.bler}")
        if self.frames < 0 or self.harq_rtt < 1 or self.harq_max_retx < 0:
            raise ValueError("frames >= 0, harq_rtt >= 1, harq_max_retx >= 0 required")
        if not 0.0 < self.activity_prob <= 1.0:
            raise ValueError(f"activity_prob must be in (0, 1], got {self.activity_prob}")

    @classmethod
    def for_numerology(cls, mu: int, **overrides) -> CellConfig:
        if mu not in STANDARD_CELLS:
            raise ValueError(f"unsupported numerology index {mu}")
        bw, n_rb = STANDARD_CELLS[mu]
        return cls(mu=mu, bandwidth_mhz=bw, n_rb=n_rb, **overrides)

    @property
    def slot_duration_s(self) -> float:
        return 1e-3 / 2**self.mu

    @property
    def redraw_period_slots(self) -> int:
        return max(1, round(self.coherence_s / self.slot_duration_s))


def slots_per_frame(mu: int) -> int:
    """10 ms frame over 1/2^mu ms slots."""
    if mu not in (0, 1, 2):
        raise ValueError(f"unsupported numerology index {mu}")
    return 10 * 2**mu


def rbgs_per_slot(n_rb: int, rbg_size: int) -> int:
    if n_rb < 1 or rbg_size < 1:
        raise ValueError("n_rb and rbg_size must be >= 1")
    return math.ceil(n_rb / rbg_size)


def rbg_rb_counts(n_rb: int, rbg_size: int) -> list[int]:
    """RBs per RBG; the tail group carries the remainder when n_rb is odd."""
    n = rbgs_per_slot(n_rb, rbg_size)
    counts = [rbg_size] * n
    tail = n_rb - rbg_size * (n - 1)
    counts[-1] = tail
    return counts


def tb_bits(entry: McsEntry, rbg_rbs: int) -> int:
    """Transport block size for one RBG grant: SE x RBs x 12 subcarriers x 14 symbols."""
    res = rbg_rbs * SUBCARRIERS_PER_RB * SYMBOLS_PER_SLOT
    return int(math.floor(entry.spectral_efficiency * res))


@dataclass
class ChannelState:
    """Per-user wideband MCS, redrawn at every coherence boundary."""

    mcs: np.ndarray
    slots_until_redraw: int

    @classmethod
    def initial(cls, cfg: CellConfig, rng: np.random.Generator) -> ChannelState:
        return cls(
            mcs=rng.integers(0, N_VALID_MCS, cfg.n_ue),
            slots_until_redraw=cfg.redraw_period_slots,
        )


def channel_step(chan: ChannelState, cfg: CellConfig, rng: np.random.Generator) -> None:
    """Advance one slot; redraw all users' MCS when the coherence window ends."""
    chan.slots_until_redraw -= 1
    if chan.slots_until_redraw <= 0:
        chan.mcs = rng.integers(0, N_VALID_MCS, cfg.n_ue)
        chan.slots_until_redraw = cfg.redraw_period_slots


@dataclass
class UeContext:
    """Buffer and HARQ status plus cumulative accounting for one user."""

    buffer_active: bool = True
    harq_active: bool = False
    harq_tb: int = 0
    harq_rtt_left: int = 0
    harq_retx: int = 0
    scheduled_bits: int = 0
    delivered_bits: int = 0

    @property
    def eligible(self) -> bool:
        return self.buffer_active and not self.harq_active

    def _close_harq(self) -> None:
        self.harq_active = False
        self.harq_tb = 0
        self.harq_rtt_left = 0
        self.harq_retx = 0


def eligible_set(ues: list[UeContext]) -> set[int]:
    """Users with buffered data and no HARQ process in progress."""
    return {i for i, ue in enumerate(ues) if ue.eligible}


def apply_grant(
    ue: UeContext, entry: McsEntry, rbg_rbs: int, cfg: CellConfig, rng: np.random.Generator
) -> tuple[int, bool]:
    """Grant one RBG: returns (tb size, delivered now).

    A first-transmission failure opens a HARQ process that blocks eligibility
    until it resolves.
    """
    if not ue.eligible:
        raise RuntimeError("granted an ineligible UE")
    tb = tb_bits(entry, rbg_rbs)
    ue.scheduled_bits += tb
    if rng.random() >= cfg.bler:
        ue.delivered_bits += tb
        return tb, True
    ue.harq_active = True
    ue.harq_tb = tb
    ue.harq_rtt_left = cfg.harq_rtt
    ue.harq_retx = 0
    return tb, False


def harq_tick(ues: list[UeContext], cfg: CellConfig, rng: np.random.Generator) -> np.ndarray:
    """Advance HARQ by one slot; returns bits delivered by retransmissions.

    At RTT expiry the block is retransmitted out-of-band: success delivers it
    and closes the process; a failure restarts the RTT until the maximum
    retransmission count, at which point the block is dropped.
    """
    delivered = np.zeros(len(ues), dtype=np.int64)
    for i, ue in enumerate(ues):
        if not ue.harq_active:
            continue
        ue.harq_rtt_left -= 1
        if ue.harq_rtt_left > 0:
            continue
        if ue.harq_retx >= cfg.harq_max_retx:
            ue._close_harq()  # retransmissions exhausted (covers max_retx=0)
            continue
        if rng.random() >= cfg.bler:
            ue.delivered_bits += ue.harq_tb
            delivered[i] = ue.harq_tb
            ue._close_harq()
        else:
            ue.harq_retx += 1
            if ue.harq_retx >= cfg.harq_max_retx:
                ue._close_harq()  # final retransmission failed: drop the block
            else:
                ue.harq_rtt_left = cfg.harq_rtt
    return delivered


@dataclass
class SchedulerObservation:
    """Everything a scheduler may look at for one RBG decision."""

    eligible: set[int]
    buffered: np.ndarray
    achievable_bits: np.ndarray
    mcs: np.ndarray
    slot: int = 0
    rbg: int = 0


def run_simulation(cfg: CellConfig, scheduler, frames: int | None = None, seed: int = 0) -> kpi.KpiRecord:
    """Run the cell for the given number of frames under one scheduler.

    Per slot: one scheduler decision per RBG on the current eligible set,
    then a HARQ tick, then a channel step. The channel and traffic RNG
    streams are independent of the grant-outcome stream, so the channel
    trace never depends on the scheduler under test.
    """
    if frames is None:
        frames = cfg.frames
    if frames < 0:
        raise ValueError(f"frames must be >= 0, got {frames}")
    spf = slots_per_frame(cfg.mu)
    n_rbgs = rbgs_per_slot(cfg.n_rb, cfg.rbg_size)
    rb_counts = rbg_rb_counts(cfg.n_rb, cfg.rbg_size)
    n_slots = frames * spf

    ss = np.random.SeedSequence(seed)
    chan_seed, link_seed, traffic_seed = ss.spawn(3)
    chan_rng = np.random.default_rng(chan_seed)
    link_rng = np.random.default_rng(link_seed)
    traffic_rng = np.random.default_rng(traffic_seed)

    chan = ChannelState.initial(cfg, chan_rng)
    ues = [UeContext() for _ in range(cfg.n_ue)]
    scheduler.reset(cfg.n_ue)

    scheduled = np.zeros((n_slots, cfg.n_ue), dtype=np.int64)
    delivered = np.zeros((n_slots, cfg.n_ue), dtype=np.int64)
    decisions = np.full((n_slots, n_rbgs), kpi.NO_ELIGIBLE, dtype=np.int16)
    eligible_log = np.zeros((n_slots, n_rbgs, cfg.n_ue), dtype=bool)

    for slot in range(n_slots):
        if cfg.activity_prob < 1.0:
            for ue in ues:
                ue.buffer_active = bool(traffic_rng.random() < cfg.activity_prob)
        delivered_this_slot = np.zeros(cfg.n_ue, dtype=np.int64)
        entries = [mcs_entry(int(m)) for m in chan.mcs]
        for j in range(n_rbgs):
            elig = eligible_set(ues)
            for u in elig:
                eligible_log[slot, j, u] = True
            if not elig:
                continue  # scheduler not invoked on an empty eligible set
            achievable = np.array([tb_bits(entries[u], rb_counts[j]) for u in range(cfg.n_ue)])
            obs = SchedulerObservation(
                eligible=elig,
                buffered=np.array([ue.buffer_active for ue in ues]),
                achievable_bits=achievable,
                mcs=chan.mcs.copy(),
                slot=slot,
                rbg=j,
            )
            choice = scheduler.decide(obs)
            if choice is None:
                decisions[slot, j] = kpi.IDLE_INVALID
                continue
            if choice not in elig:
                raise RuntimeError(
                    f"scheduler {getattr(scheduler, 'name', '?')} chose ineligible UE {choice}"
                )
            tb, now = apply_grant(ues[choice], entries[choice], rb_counts[j], cfg, link_rng)
            decisions[slot, j] = choice
            scheduled[slot, choice] += tb
            if now:
                delivered[slot, choice] += tb
                delivered_this_slot[choice] += tb
        harq_delivered = harq_tick(ues, cfg, link_rng)
        delivered[slot] += harq_delivered
        delivered_this_slot += harq_delivered
        scheduler.on_slot_end(delivered_this_slot)
        channel_step(chan, cfg, chan_rng)

    return kpi.KpiRecord(
        mu=cfg.mu,
        n_ue=cfg.n_ue,
        slot_duration_s=cfg.slot_duration_s,
        scheduled=scheduled,
        delivered=delivered,
        decisions=decisions,
        eligible=eligible_log,
        seed=seed,
        scheduler=getattr(scheduler, "name", ""),
    )
