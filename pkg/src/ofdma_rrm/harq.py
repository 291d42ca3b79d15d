"""Stop-and-wait HARQ with ideal chase combining."""

from __future__ import annotations

from dataclasses import dataclass

IDLE, AWAITING, PENDING = "idle", "awaiting_feedback", "pending_retx"


class HarqError(RuntimeError):
    pass


@dataclass
class HarqProcess:
    state: str = IDLE
    transmission_count: int = 0
    accumulated_sinr: float = 0.0     # linear, sum over transmissions
    payload_bits: int = 0
    mcs: int = 0
    n_prb: int = 0
    stream: int = 0
    last_tx_tti: int = -1
    pending_since: int = -1


class HarqPool:
    """Parallel SAW processes of one (UE, stream)."""

    def __init__(self, n_processes: int = 6, max_retx: int = 3, feedback_delay: int = 2, stream: int = 0):
        self.processes = [HarqProcess(stream=stream) for _ in range(n_processes)]
        self.max_transmissions = 1 + max_retx
        self.feedback_delay = feedback_delay
        self.stream = stream
        self.credited_bits = 0
        self.dropped = 0

    def __len__(self):
        return len(self.processes)

    def idle_slots(self) -> list:
        return [i for i, p in enumerate(self.processes) if p.state == IDLE]

    def has_idle(self) -> bool:
        return any(p.state == IDLE for p in self.processes)

    def in_flight(self) -> int:
        return sum(p.state != IDLE for p in self.processes)


def combine(accumulated: float, new: float) -> float:
    """Ideal chase combining: linear SINRs add."""
    if accumulated < 0 or new < 0:
        raise ValueError("SINR must be nonnegative")
    return accumulated + new


def start_transmission(pool: HarqPool, payload_bits: int, mcs: int, eff_sinr: float,
                       n_prb: int = 1, tti: int = 0) -> int:
    """First transmission of a new transport block; returns the process id (first fit)."""
    for pid, p in enumerate(pool.processes):
        if p.state == IDLE:
            pool.processes[pid] = HarqProcess(AWAITING, 1, float(eff_sinr), int(payload_bits), int(mcs),
                                              int(n_prb), pool.stream, tti)
            return pid
    raise HarqError("no idle HARQ process")


def retransmit(pool: HarqPool, pid: int, eff_sinr: float, tti: int = 0) -> float:
    """Send a pending block again with the same format; returns the combined SINR."""
    p = pool.processes[pid]
    if p.state != PENDING:
        raise HarqError(f"process {pid} has no pending retransmission")
    p.accumulated_sinr = combine(p.accumulated_sinr, eff_sinr)
    p.transmission_count += 1
    p.state = AWAITING
    p.last_tx_tti = tti
    return p.accumulated_sinr


def on_feedback(pool: HarqPool, pid: int, ack: bool, tti: int | None = None) -> int:
    """
    Apply ACK/NACK for ``pid``.

    Returns the bits credited (payload on ACK, 0 otherwise). After the last
    allowed transmission a NACK drops the block.
    """
    p = pool.processes[pid]
    if p.state != AWAITING:
        raise HarqError(f"feedback for process {pid} in state {p.state}")
    if tti is not None and tti - p.last_tx_tti != pool.feedback_delay:
        raise HarqError("feedback does not match the ACK/NACK delay")
    if ack:
        bits = p.payload_bits
        pool.credited_bits += bits
        pool.processes[pid] = HarqProcess(stream=pool.stream)
        return bits
    if p.transmission_count >= pool.max_transmissions:
        pool.dropped += 1
        pool.processes[pid] = HarqProcess(stream=pool.stream)
        return 0
    p.state = PENDING
    p.pending_since = p.last_tx_tti if tti is None else tti
    return 0


def pending_retransmissions(pool: HarqPool) -> list:
    """(pid, payload_bits, mcs) of blocks waiting for a retransmission, oldest first."""
    waiting = [(p.pending_since, pid) for pid, p in enumerate(pool.processes) if p.state == PENDING]
    return [(pid, pool.processes[pid].payload_bits, pool.processes[pid].mcs) for _, pid in sorted(waiting)]
