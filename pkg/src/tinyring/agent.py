"""Single-ring forwarding agent: one receive ring mirrored by N transmit
rings over a shared buffer set.

Every ring uses the same slot index space and every transmit ring's slot i
points at the same buffer as receive slot i, so a packet moves from wire to
wire without copies: the agent reads the done bit, runs the processor in
place, and writes fresh transmit metadata. Packets are handled strictly in
order, one at a time; a per-output length of 0 tells the device to retire
the descriptor without emitting anything.

Bookkeeping runs on unwrapped counters (total packets, not ring positions).
With ring size S the pipeline keeps

    min_q TX head  <=  published TX tail  <=  processed  <  RX tail

with each counter within S - 1 of the next. The receive tail starts at
S - 1 and recycling republishes it as (earliest TX head - 1) mod S, so one
slot always stays unowned: a full interval is never confused with an empty
one, and a mod-S register value can be unwrapped against `processed`
unambiguously.

Tail writes are batched: transmit tails are published once per
`flush_period` packets (all queues in one pass, which keeps them equal),
and the receive tail is republished once per `recycle_period` packets.
When a receive poll comes up empty the agent publishes and recycles
immediately instead; without that, a ragged batch at the end of a burst
would sit unpublished forever and rings no larger than the recycle period
would wedge.
"""

from __future__ import annotations

import struct
from collections import deque
from typing import Callable, Iterable, Sequence

from .mem import MemEnv
from .nic import (DESC_BYTES, MAX_FRAME, META_DD, META_EOP, META_LEN_MASK,
                  META_RS, Frame, Nic)

FLUSH_PERIOD = 8
RECYCLE_PERIOD = 64

MAX_OUTPUTS = 8

# (buffer view of full capacity, received length, output count) -> per-output lengths.
# A processor that returns a length beyond the received one must have written
# those bytes itself; all built-ins only shrink or keep the length.
Processor = Callable[[memoryview, int, int], Sequence[int]]

_U64 = struct.Struct("<Q")
_U32 = struct.Struct("<I")


class ProtocolViolation(Exception):
    """receive and transmit were not strictly alternated."""


class Agent:
    """The processing unit driving one device."""

    def __init__(self, env: MemEnv, nic: Nic, ring_size: int, num_outputs: int = 1,
                 flush_period: int = FLUSH_PERIOD,
                 recycle_period: int = RECYCLE_PERIOD) -> None:
        if ring_size < 2 or ring_size > 65536 or ring_size & (ring_size - 1):
            raise ValueError(f"ring size must be a power of two in [2, 65536], got {ring_size}")
        if not 1 <= num_outputs <= MAX_OUTPUTS:
            raise ValueError(f"output count must be in [1, {MAX_OUTPUTS}], got {num_outputs}")
        if num_outputs != nic.num_tx_queues:
            raise ValueError(f"device has {nic.num_tx_queues} transmit queues, "
                             f"agent needs {num_outputs}")
        if flush_period < 1 or recycle_period % flush_period:
            raise ValueError("recycle period must be a positive multiple of the flush period")
        self.env = env
        self.nic = nic
        self.ring_size = ring_size
        self.num_outputs = num_outputs
        self.flush_period = flush_period
        self.recycle_period = recycle_period
        self._mask = ring_size - 1
        self._mem = env.dma

        rx = env.allocate_dma(ring_size * DESC_BYTES)
        txs = [env.allocate_dma(ring_size * DESC_BYTES) for _ in range(num_outputs)]
        bufs = env.allocate_dma(ring_size * MAX_FRAME)
        shadow = env.allocate_dma(4 * num_outputs)
        self._rx_base = rx.phys_base
        self._tx_bases = [r.phys_base for r in txs]
        self._shadow_base = shadow.phys_base
        # One reusable full-capacity view per slot. This tuple is the whole
        # buffer set; it never changes after construction.
        self.buffers = tuple(bufs.view[i * MAX_FRAME:(i + 1) * MAX_FRAME]
                             for i in range(ring_size))

        mem = self._mem
        for i in range(ring_size):
            baddr = bufs.phys_base + i * MAX_FRAME
            _U64.pack_into(mem, self._rx_base + i * DESC_BYTES, baddr)
            for tb in self._tx_bases:
                _U64.pack_into(mem, tb + i * DESC_BYTES, baddr)

        nic.reg_write("RDBA", self._rx_base)
        nic.reg_write("RDLEN", ring_size)
        nic.reg_write("RDT", ring_size - 1)  # device owns every slot but one
        for q in range(num_outputs):
            nic.reg_write("TDBA", self._tx_bases[q], q)
            nic.reg_write("TDLEN", ring_size, q)
            nic.reg_write("TDWBA", self._shadow_base + 4 * q, q)
            nic.reg_write("TXEN", 1, q)
        nic.reg_write("RXEN", 1)

        self.processed = 0                      # unwrapped packets fully handled
        self._published = 0                     # unwrapped value last written to the TX tails
        self._rdt_unwrapped = ring_size - 1     # unwrapped value of the RX tail
        self._earliest = 0                      # min TX head seen by the last recycle
        self._inflight = False

    # -- ring protocol ------------------------------------------------------

    def receive(self) -> tuple[memoryview, int] | None:
        """Peek the next slot; (buffer, length) once the device is done with it.

        Returns None while no packet is waiting. A returned packet is
        outstanding until transmit() files it; receiving again before that
        is a protocol violation.
        """
        if self._inflight:
            raise ProtocolViolation("previous packet was never transmitted")
        slot = self.processed & self._mask
        (meta,) = _U64.unpack_from(self._mem, self._rx_base + slot * DESC_BYTES + 8)
        if not meta & META_DD:
            return None
        self._inflight = True
        return self.buffers[slot], meta & META_LEN_MASK

    def transmit(self, lengths: Sequence[int]) -> None:
        """File the outstanding packet on every output; length 0 skips one."""
        if not self._inflight:
            raise ProtocolViolation("no packet outstanding")
        if len(lengths) != self.num_outputs:
            raise ValueError(f"need {self.num_outputs} lengths, got {len(lengths)}")
        for q, n in enumerate(lengths):
            if not 0 <= n <= MAX_FRAME:
                raise ValueError(f"output {q}: length {n} exceeds buffer capacity")
        p = self.processed
        off = (p & self._mask) * DESC_BYTES + 8
        flags = META_EOP | (META_RS if (p + 1) % self.flush_period == 0 else 0)
        mem = self._mem
        for q, n in enumerate(lengths):
            _U64.pack_into(mem, self._tx_bases[q] + off, n | flags)
        # Retire the receive slot now: clearing its done bit here (rather than
        # waiting for recycle) means a later lap can never mistake this lap's
        # completion for a fresh delivery when the tail sits right on the slot.
        _U64.pack_into(mem, self._rx_base + off, 0)
        self._inflight = False
        self.processed = p + 1
        if (p + 1) % self.flush_period == 0:
            self._flush()
        if (p + 1) % self.recycle_period == 0:
            self.recycle()

    def _flush(self, mark_rs: bool = False) -> None:
        """Publish the transmit tails (one pass, so they stay equal).

        mark_rs retrofits a report-status flag onto the last descriptor of a
        ragged, still-unpublished batch so the head write-back eventually
        reaches `processed` even when the batch ends off the flush grid.
        """
        p = self.processed
        if mark_rs and p > self._published:
            off = ((p - 1) & self._mask) * DESC_BYTES + 8
            for tb in self._tx_bases:
                (meta,) = _U64.unpack_from(self._mem, tb + off)
                if not meta & META_RS:
                    _U64.pack_into(self._mem, tb + off, meta | META_RS)
        tail = p & self._mask
        for q in range(self.num_outputs):
            self.nic.reg_write("TDT", tail, q)
        self._published = p

    def recycle(self) -> None:
        """Hand fully transmitted slots back to the receive ring.

        The bound is the earliest transmit head across queues: a slot is
        reused only once every queue is done with it. No-op when nothing
        new has drained.
        """
        p = self.processed
        mask = self._mask
        earliest = p
        for q in range(self.num_outputs):
            (h,) = _U32.unpack_from(self._mem, self._shadow_base + 4 * q)
            # mod-size head to unwrapped: heads trail processed by < ring_size
            uh = p - ((p - h) & mask)
            if uh < earliest:
                earliest = uh
        self._earliest = earliest
        new_tail = earliest - 1 + self.ring_size
        if new_tail <= self._rdt_unwrapped:
            return
        # clear stale done bits before the device may deliver there again
        for u in range(self._rdt_unwrapped, new_tail):
            _U64.pack_into(self._mem, self._rx_base + (u & mask) * DESC_BYTES + 8, 0)
        self._rdt_unwrapped = new_tail
        self.nic.reg_write("RDT", new_tail & mask)

    # -- driving loops ------------------------------------------------------

    def poll(self, processor: Processor) -> bool:
        """One receive attempt; process and file the packet if one is waiting.

        An empty poll does the deferred housekeeping instead (publish any
        ragged batch, recycle), which keeps the pipeline live when traffic
        pauses between flush boundaries.
        """
        got = self.receive()
        if got is None:
            if self._published != self.processed:
                self._flush(mark_rs=True)
            self.recycle()
            return False
        buf, length = got
        self.transmit(processor(buf, length, self.num_outputs))
        return True

    def quiescent(self) -> bool:
        """True when nothing submitted or outstanding remains in flight."""
        if self._inflight or self._published != self.processed:
            return False
        nic = self.nic
        return all(nic.reg_read("TDH", q) == nic.reg_read("TDT", q)
                   for q in range(self.num_outputs))

    def finish(self, device_budget: int = 1) -> None:
        """Publish everything still pending and step the device until it drains."""
        self._flush(mark_rs=True)
        nic = self.nic
        while not self.quiescent():
            nic.step_device(device_budget)
        self.recycle()

    def run(self, processor: Processor, max_packets: int,
            device_budget: int = 1, idle_budget: int | None = None) -> int:
        """Lockstep forwarding loop: step the device, then poll.

        Stops after max_packets packets or after idle_budget consecutive
        empty polls, then drains all submitted work. Returns the number of
        packets processed by this call.
        """
        if idle_budget is None:
            idle_budget = 64 + 4 * (1 + self.num_outputs) * self.ring_size
        nic = self.nic
        count = 0
        idle = 0
        while count < max_packets and idle < idle_budget:
            nic.step_device(device_budget)
            if self.poll(processor):
                count += 1
                idle = 0
            else:
                idle += 1
        self.finish(device_budget)
        return count


def forward_trace(agent: Agent, frames: Iterable[Frame], processor: Processor,
                  device_budget: int = 1) -> int:
    """Feed frames through the agent with ingress flow control.

    The next frame enters the wire only when the previous one has been taken
    off it and a device-owned receive slot is free, so the device never
    drops for lack of descriptors, whatever the ring size. Runs to
    quiescence and returns the number of packets processed.
    """
    nic = agent.nic
    link = nic.link
    todo = deque(frames)
    count = 0
    while True:
        if todo and not link.rx_pending and nic.reg_read("RDH") != nic.reg_read("RDT"):
            nic.inject_rx(todo.popleft())
        nic.step_device(device_budget)
        if agent.poll(processor):
            count += 1
        if not todo and not link.rx_pending and agent.processed == link.rx_delivered:
            break
    agent.finish(device_budget)
    return count
