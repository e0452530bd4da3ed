"""Steppable model of an 82599-style NIC: register file, descriptor rings,
DMA into simulated memory, and a simulated link.

The device does nothing between explicit step_device calls (lockstep), so
identical register writes, injections and step counts produce bit-identical
memory contents and emissions.

Register file (all values unsigned 32-bit, ring lengths in descriptors):

    receive ring             transmit ring q (one set per queue)
    ------------             -----------------------------------
    RDBA   ring base         TDBA   ring base
    RDLEN  ring length       TDLEN  ring length
    RDH    head (device)     TDH    head (device)
    RDT    tail              TDT    tail
    RXEN   enable            TXEN   enable
                             TDWBA  head write-back address (0 = off)

Ring lengths are powers of two in [2, 65536]; bases are physical, 16-byte
aligned. Heads are device-owned once the ring is enabled: software writes
then fault. The device owns the descriptors in the modular interval
[head, tail), so head == tail means it owns nothing.

Descriptor wire format, 16 bytes little-endian: a u64 buffer physical
address, then a u64 metadata word with the byte length in bits [15:0],
end-of-packet at bit 24, report-status at bit 27 and done at bit 32.
The device writes buffer bytes first and the whole metadata word second,
in one 8-byte store; a reader that observes the done bit may trust the
payload. Bits outside the defined fields are ignored on decode.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass

from .mem import MemEnv

DESC_BYTES = 16
META_LEN_MASK = 0xFFFF
META_EOP = 1 << 24
META_RS = 1 << 27
META_DD = 1 << 32

MAX_FRAME = 2048
MAX_QUEUES = 8
MIN_RING = 2
MAX_RING = 65536

_DESC = struct.Struct("<QQ")
_U64 = struct.Struct("<Q")
_U32 = struct.Struct("<I")


class InvalidRegisterError(Exception):
    """No such register name or queue index on this device."""


class RegisterWriteFault(Exception):
    """Software wrote a register the device currently owns."""


class NotReadyError(Exception):
    """Operation needs an enabled device."""


@dataclass(slots=True)
class Descriptor:
    buffer_addr: int
    length: int
    eop: bool = False
    rs: bool = False
    dd: bool = False


def encode_descriptor(d: Descriptor) -> bytes:
    if not 0 <= d.buffer_addr < 1 << 64:
        raise ValueError(f"buffer address out of range: {d.buffer_addr:#x}")
    if not 0 <= d.length <= META_LEN_MASK:
        raise ValueError(f"length does not fit the 16-bit field: {d.length}")
    meta = d.length
    if d.eop:
        meta |= META_EOP
    if d.rs:
        meta |= META_RS
    if d.dd:
        meta |= META_DD
    return _DESC.pack(d.buffer_addr, meta)


def decode_descriptor(raw: bytes) -> Descriptor:
    if len(raw) != DESC_BYTES:
        raise ValueError(f"descriptor is {DESC_BYTES} bytes, got {len(raw)}")
    addr, meta = _DESC.unpack(raw)
    return Descriptor(addr, meta & META_LEN_MASK,
                      eop=bool(meta & META_EOP),
                      rs=bool(meta & META_RS),
                      dd=bool(meta & META_DD))


def ownership(head: int, tail: int, length: int) -> set[int]:
    """Descriptor indexes the device owns: the modular interval [head, tail).

    head == tail means the device owns nothing. A completely full ring is
    therefore unrepresentable, which is why drivers keep one slot unused.
    """
    if length < 1:
        raise ValueError(f"ring length must be positive, got {length}")
    if not (0 <= head < length and 0 <= tail < length):
        raise ValueError(f"head {head} and tail {tail} must lie in [0, {length})")
    if head <= tail:
        return set(range(head, tail))
    return set(range(head, length)) | set(range(0, tail))


@dataclass(slots=True)
class Frame:
    """One packet on the simulated wire.

    inject_time and drain_time are simulated step counts; their difference
    is the frame's in-simulation latency. order is the global injection
    ordinal, carried through to emission so tests can check sequencing
    without trusting payload contents.
    """

    payload: bytes
    inject_time: int | None = None
    drain_time: int | None = None
    order: int | None = None


class Link:
    """Frame queues on both sides of the device, plus loss accounting."""

    def __init__(self, num_tx_queues: int) -> None:
        self.rx_pending: deque[Frame] = deque()
        self.tx_emitted: list[list[Frame]] = [[] for _ in range(num_tx_queues)]
        self.injected = 0
        self.rx_delivered = 0
        self.rx_dropped = 0
        # buffer phys addr -> (inject_time, order) of the frame last written
        # there; lets emission carry timing through the zero-copy path.
        self.buffer_meta: dict[int, tuple[int | None, int | None]] = {}


class Nic:
    """The device model. One receive ring, num_tx_queues transmit rings."""

    _RX_REGS = frozenset({"RDBA", "RDLEN", "RDH", "RDT", "RXEN"})
    _TX_REGS = frozenset({"TDBA", "TDLEN", "TDH", "TDT", "TDWBA", "TXEN"})

    def __init__(self, env: MemEnv, num_tx_queues: int = 1) -> None:
        if not 1 <= num_tx_queues <= MAX_QUEUES:
            raise ValueError(f"transmit queue count must be in [1, {MAX_QUEUES}], "
                             f"got {num_tx_queues}")
        self.env = env
        self._mem = env.dma
        self.num_tx_queues = num_tx_queues
        self.now = 0
        self.link = Link(num_tx_queues)
        n = num_tx_queues
        self._rdba = 0
        self._rdlen = 0
        self._rdh = 0
        self._rdt = 0
        self._rxen = False
        self._tdba = [0] * n
        self._tdlen = [0] * n
        self._tdh = [0] * n
        self._tdt = [0] * n
        self._tdwba = [0] * n
        self._txen = [False] * n
        # round-robin cursor over service classes: 0 is RX, 1 + q is TX q
        self._rr = 0

    # -- register file ----------------------------------------------------

    def _check_reg(self, reg: str, queue: int) -> None:
        if reg in self._RX_REGS:
            if queue != 0:
                raise InvalidRegisterError(f"{reg} exists for queue 0 only, got {queue}")
        elif reg in self._TX_REGS:
            if not 0 <= queue < self.num_tx_queues:
                raise InvalidRegisterError(
                    f"{reg}({queue}): device has {self.num_tx_queues} transmit queues")
        else:
            raise InvalidRegisterError(f"unknown register {reg!r}")

    def reg_read(self, reg: str, queue: int = 0) -> int:
        self._check_reg(reg, queue)
        if reg == "RDBA":
            return self._rdba
        if reg == "RDLEN":
            return self._rdlen
        if reg == "RDH":
            return self._rdh
        if reg == "RDT":
            return self._rdt
        if reg == "RXEN":
            return int(self._rxen)
        if reg == "TDBA":
            return self._tdba[queue]
        if reg == "TDLEN":
            return self._tdlen[queue]
        if reg == "TDH":
            return self._tdh[queue]
        if reg == "TDT":
            return self._tdt[queue]
        if reg == "TDWBA":
            return self._tdwba[queue]
        return int(self._txen[queue])  # TXEN

    def reg_write(self, reg: str, value: int, queue: int = 0) -> None:
        self._check_reg(reg, queue)
        if not 0 <= value < 1 << 32:
            raise ValueError(f"register value must fit 32 bits, got {value:#x}")
        if reg == "RDH":
            if self._rxen:
                raise RegisterWriteFault("RDH is device-owned while the receive ring is enabled")
            self._rdh = value
        elif reg == "TDH":
            if self._txen[queue]:
                raise RegisterWriteFault(f"TDH({queue}) is device-owned while the queue is enabled")
            self._tdh[queue] = value
        elif reg == "RDT":
            if value >= self._rdlen:
                raise ValueError(f"RDT {value} outside ring of length {self._rdlen}")
            self._rdt = value
        elif reg == "TDT":
            if value >= self._tdlen[queue]:
                raise ValueError(f"TDT({queue}) {value} outside ring of length {self._tdlen[queue]}")
            self._tdt[queue] = value
        elif reg == "RDBA":
            self._rdba = value
        elif reg == "RDLEN":
            self._rdlen = value
        elif reg == "TDBA":
            self._tdba[queue] = value
        elif reg == "TDLEN":
            self._tdlen[queue] = value
        elif reg == "TDWBA":
            if value and (value % 4 or value + 4 > self.env.arena_size):
                raise ValueError(f"TDWBA({queue}) {value:#x} must be a 4-byte aligned arena address")
            self._tdwba[queue] = value
        elif reg == "RXEN":
            if value:
                self._validate_ring(self._rdba, self._rdlen, self._rdh, self._rdt, "receive ring")
            self._rxen = bool(value)
        else:  # TXEN
            if value:
                self._validate_ring(self._tdba[queue], self._tdlen[queue],
                                    self._tdh[queue], self._tdt[queue],
                                    f"transmit ring {queue}")
            self._txen[queue] = bool(value)

    def _validate_ring(self, base: int, length: int, head: int, tail: int, what: str) -> None:
        if length < MIN_RING or length > MAX_RING or length & (length - 1):
            raise ValueError(f"{what}: length must be a power of two in "
                             f"[{MIN_RING}, {MAX_RING}], got {length}")
        if base % DESC_BYTES:
            raise ValueError(f"{what}: base {base:#x} is not 16-byte aligned")
        if base + length * DESC_BYTES > self.env.arena_size:
            raise ValueError(f"{what}: does not fit the DMA arena")
        if head >= length or tail >= length:
            raise ValueError(f"{what}: head {head} and tail {tail} must be below length {length}")

    # -- link --------------------------------------------------------------

    def inject_rx(self, frame: Frame) -> None:
        n = len(frame.payload)
        if not 1 <= n <= MAX_FRAME:
            raise ValueError(f"frame payload must be 1..{MAX_FRAME} bytes, got {n}")
        frame.inject_time = self.now
        frame.order = self.link.injected
        self.link.injected += 1
        self.link.rx_pending.append(frame)

    def drain_tx(self, queue: int) -> list[Frame]:
        """Return and clear everything emitted on one output, in order."""
        if not 0 <= queue < self.num_tx_queues:
            raise ValueError(f"no transmit queue {queue}")
        out = self.link.tx_emitted[queue]
        self.link.tx_emitted[queue] = []
        return out

    # -- stepping ----------------------------------------------------------

    def step_device(self, max_work: int = 1) -> int:
        """Advance the clock one step and retire up to max_work descriptors.

        Service rotates fairly over the receive ring and every enabled
        transmit queue (persistent round-robin cursor, skipping classes with
        nothing to do). Returns the number of work units spent; dropping an
        undeliverable frame costs one unit like a completion does.
        """
        if not (self._rxen or any(self._txen)):
            raise NotReadyError("device is not enabled")
        self.now += 1
        classes = 1 + self.num_tx_queues
        done = 0
        while done < max_work:
            for probe in range(classes):
                c = self._rr + probe
                if c >= classes:
                    c -= classes
                if c == 0:
                    if self._rxen and self.link.rx_pending:
                        self._service_rx()
                        break
                elif self._txen[c - 1] and self._tdh[c - 1] != self._tdt[c - 1]:
                    self._service_tx(c - 1)
                    break
            else:
                break  # nothing serviceable anywhere
            self._rr = c + 1 if c + 1 < classes else 0
            done += 1
        return done

    def _service_rx(self) -> None:
        link = self.link
        frame = link.rx_pending.popleft()
        if self._rdh == self._rdt:
            # no device-owned descriptor: the wire does not wait
            link.rx_dropped += 1
            return
        slot = self._rdh
        daddr = self._rdba + slot * DESC_BYTES
        (baddr,) = _U64.unpack_from(self._mem, daddr)
        payload = frame.payload
        n = len(payload)
        self._mem[baddr:baddr + n] = payload
        # payload first, then the whole metadata word: the publish order
        _U64.pack_into(self._mem, daddr + 8, n | META_EOP | META_DD)
        self._rdh = (slot + 1) & (self._rdlen - 1)
        link.rx_delivered += 1
        link.buffer_meta[baddr] = (frame.inject_time, frame.order)

    def _service_tx(self, q: int) -> None:
        slot = self._tdh[q]
        daddr = self._tdba[q] + slot * DESC_BYTES
        baddr, meta = _DESC.unpack_from(self._mem, daddr)
        length = meta & META_LEN_MASK
        if length:
            frame = Frame(bytes(self._mem[baddr:baddr + length]), drain_time=self.now)
            timing = self.link.buffer_meta.get(baddr)
            if timing is not None:
                frame.inject_time, frame.order = timing
            self.link.tx_emitted[q].append(frame)
        _U64.pack_into(self._mem, daddr + 8, meta | META_DD)
        slot = (slot + 1) & (self._tdlen[q] - 1)
        self._tdh[q] = slot
        if meta & META_RS and self._tdwba[q]:
            _U32.pack_into(self._mem, self._tdwba[q], slot)
