"""Load generation, measurement, and persistence for the forwarding pipeline.

Loads are packets per 1000 simulated steps; the simulator has no physical
clock, so nothing here is a bit rate. The device retires at most
device_budget descriptor completions per step and a forwarded packet costs
1 + num_outputs completions (one receive, one per transmit ring, skips
included), so the sustainable rate is

    service_rate = 1000 * device_budget // (1 + num_outputs)

packets per 1000 steps.

A load point injects its trace on an even schedule (remainders spread
Bresenham-style), runs the pipeline until the schedule ends plus a short
drain allowance, and counts a measured frame as lost if it was not emitted
on output 0 by then; frames the device dropped for lack of receive
descriptors are lost the same way. The first 10% of the trace warms the
pipeline up and is excluded from all statistics. Latency is drain step
minus inject step; percentiles are nearest-rank (the 50th of [1, 2, 3, 4]
is 2). One deterministic trial per load point, all points sharing a seed.
"""

from __future__ import annotations

import math
import random
import struct
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .agent import Agent, Processor
from .mem import DEFAULT_PAGE_SIZE, MemEnv
from .netfuncs import make_processor
from .nic import DESC_BYTES, MAX_FRAME, Frame, Nic

DEVICE_BUDGET = 1
DRAIN_ALLOWANCE = 64        # steps granted past the end of the injection schedule
SEARCH_GRANULARITY = 16     # load-grid resolution of find_max_throughput
MAX_LOAD_PER_BUDGET = 1000  # search ceiling: one packet per step per budget unit
DEFAULT_TRACE_LENGTH = 2000
DEFAULT_PACKET_SIZE = 64
WARMUP_FRACTION = 10        # first trace_length // 10 frames are not measured

CSV_HEADER = "offered_load,delivered,lost,loss_fraction,latency_p50,latency_p99"


def service_rate(device_budget: int = DEVICE_BUDGET, num_outputs: int = 1) -> int:
    """Sustainable packets per 1000 steps for a given budget and output count."""
    return 1000 * device_budget // (1 + num_outputs)


@dataclass(frozen=True)
class LoadPoint:
    offered_load: int  # packets per 1000 steps
    packet_size: int = DEFAULT_PACKET_SIZE
    trace_length: int = DEFAULT_TRACE_LENGTH

    def __post_init__(self) -> None:
        if self.offered_load < 1:
            raise ValueError(f"offered load must be positive, got {self.offered_load}")
        if not 1 <= self.packet_size <= MAX_FRAME:
            raise ValueError(f"packet size must be in [1, {MAX_FRAME}], got {self.packet_size}")
        if self.trace_length < 1:
            raise ValueError(f"trace length must be positive, got {self.trace_length}")


@dataclass(frozen=True)
class LoadPointResult:
    offered_load: int
    delivered: int
    lost: int
    loss_fraction: float
    latency_p50: int
    latency_p99: int


def percentile(values: Sequence[int], pct: float) -> int:
    """Nearest-rank percentile; 0 for an empty sample."""
    if not values:
        return 0
    ordered = sorted(values)
    rank = math.ceil(pct / 100 * len(ordered))
    return ordered[max(rank, 1) - 1]


def gen_traffic(count: int, size: int, seed: int) -> list[Frame]:
    """Deterministic frames whose first 8 bytes are a little-endian sequence number."""
    if count < 0:
        raise ValueError(f"frame count must be non-negative, got {count}")
    if not 12 <= size <= MAX_FRAME:
        raise ValueError(f"packet size must be in [12, {MAX_FRAME}], got {size}")
    rng = random.Random(seed)
    return [Frame(seq.to_bytes(8, "little") + rng.randbytes(size - 8))
            for seq in range(count)]


# -- pcap ingestion ----------------------------------------------------------

_PCAP_GLOBAL = struct.Struct("<IHHiIII")  # magic, major, minor, zone, sigfigs, snaplen, linktype
_PCAP_RECORD = struct.Struct("<IIII")     # ts_sec, ts_usec, incl_len, orig_len
PCAP_MAGIC_LE = 0xA1B2C3D4
PCAP_MAGIC_BE = 0xD4C3B2A1


class PcapFormatError(Exception):
    """Capture file violates the classic pcap layout."""

    def __init__(self, message: str, record_index: int | None = None) -> None:
        super().__init__(message)
        self.record_index = record_index


def parse_pcap(data: bytes) -> list[Frame]:
    """Frames from a classic little-endian pcap capture, in file order.

    Payloads longer than the buffer capacity are truncated to it. Only the
    little-endian magic is accepted; byte-swapped files are rejected.
    """
    if len(data) < _PCAP_GLOBAL.size:
        raise PcapFormatError(f"global header needs {_PCAP_GLOBAL.size} bytes, "
                              f"file has {len(data)}")
    magic = _PCAP_GLOBAL.unpack_from(data)[0]
    if magic == PCAP_MAGIC_BE:
        raise PcapFormatError("big-endian capture files are not supported")
    if magic != PCAP_MAGIC_LE:
        raise PcapFormatError(f"bad magic {magic:#010x}")
    frames: list[Frame] = []
    offset = _PCAP_GLOBAL.size
    index = 0
    while offset < len(data):
        if len(data) - offset < _PCAP_RECORD.size:
            raise PcapFormatError(f"record {index}: truncated header", record_index=index)
        incl_len = _PCAP_RECORD.unpack_from(data, offset)[2]
        offset += _PCAP_RECORD.size
        if incl_len == 0:
            raise PcapFormatError(f"record {index}: empty capture record", record_index=index)
        if len(data) - offset < incl_len:
            raise PcapFormatError(f"record {index}: payload truncated", record_index=index)
        frames.append(Frame(bytes(data[offset:offset + min(incl_len, MAX_FRAME)])))
        offset += incl_len
        index += 1
    return frames


# -- measurement --------------------------------------------------------------

def _build_pipeline(ring_size: int, num_outputs: int,
                    page_size: int | None) -> tuple[MemEnv, Nic, Agent]:
    ps = page_size if page_size is not None else DEFAULT_PAGE_SIZE
    need = ((1 + num_outputs) * ring_size * DESC_BYTES
            + ring_size * MAX_FRAME + 4 * num_outputs)
    # one page of rounding slack per region
    env = MemEnv(arena_size=need + (3 + num_outputs) * ps, page_size=ps)
    nic = Nic(env, num_outputs)
    return env, nic, Agent(env, nic, ring_size, num_outputs)


def run_load_point(lp: LoadPoint, nf: Processor | str, ring_size: int,
                   num_outputs: int, *, seed: int = 0,
                   frames: Sequence[Frame] | None = None,
                   device_budget: int = DEVICE_BUDGET,
                   page_size: int | None = None) -> LoadPointResult:
    """Measure one load point on a fresh pipeline.

    frames, when given, replace the generated trace (sizes and payloads of
    a capture replay); the injection schedule still follows lp.offered_load.
    """
    processor = make_processor(nf) if isinstance(nf, str) else nf
    if frames is None:
        trace = gen_traffic(lp.trace_length, lp.packet_size, seed)
    else:
        # fresh Frame objects: injection stamps them, runs must not alias
        trace = [Frame(f.payload) for f in frames]
    n = len(trace)
    _env, nic, agent = _build_pipeline(ring_size, num_outputs, page_size)
    link = nic.link
    load = lp.offered_load
    deadline = (n - 1) * 1000 // load + 1 + DRAIN_ALLOWANCE if n else DRAIN_ALLOWANCE
    k = 0
    while nic.now < deadline:
        while k < n and k * 1000 // load <= nic.now:
            nic.inject_rx(trace[k])
            k += 1
        nic.step_device(device_budget)
        agent.poll(processor)
        if (k == n and not link.rx_pending
                and agent.processed == link.rx_delivered and agent.quiescent()):
            break  # nothing left that could still emit; the deadline is moot

    warm = n // WARMUP_FRACTION
    measured = n - warm
    got = [f for f in nic.drain_tx(0) if f.order is not None and f.order >= warm]
    delivered = len(got)
    lost = measured - delivered
    latencies = [f.drain_time - f.inject_time for f in got]
    return LoadPointResult(load, delivered, lost,
                           lost / measured if measured else 0.0,
                           percentile(latencies, 50), percentile(latencies, 99))


def find_max_throughput(nf: Processor | str, ring_size: int, num_outputs: int,
                        loss_bound: float = 0.001, *,
                        packet_size: int = DEFAULT_PACKET_SIZE,
                        trace_length: int = DEFAULT_TRACE_LENGTH,
                        seed: int = 0, frames: Sequence[Frame] | None = None,
                        device_budget: int = DEVICE_BUDGET,
                        page_size: int | None = None,
                        granularity: int = SEARCH_GRANULARITY) -> LoadPoint:
    """Largest load on the granularity grid whose loss stays under the bound.

    Binary search; sound because loss is non-decreasing in offered load for
    a fixed seed and configuration.
    """
    ceiling = MAX_LOAD_PER_BUDGET * device_budget
    lo, hi = 0, ceiling // granularity
    while lo < hi:
        mid = (lo + hi + 1) // 2
        lp = LoadPoint(mid * granularity, packet_size, trace_length)
        res = run_load_point(lp, nf, ring_size, num_outputs, seed=seed, frames=frames,
                             device_budget=device_budget, page_size=page_size)
        if res.loss_fraction < loss_bound:
            lo = mid
        else:
            hi = mid - 1
    return LoadPoint(max(lo, 1) * granularity, packet_size, trace_length)


def run_sweep(nf: Processor | str, ring_size: int, num_outputs: int, step: int, *,
              packet_size: int = DEFAULT_PACKET_SIZE,
              trace_length: int = DEFAULT_TRACE_LENGTH,
              seed: int = 0, frames: Sequence[Frame] | None = None,
              device_budget: int = DEVICE_BUDGET,
              page_size: int | None = None) -> list[LoadPointResult]:
    """Load points from step up to the discovered maximum, inclusive.

    The maximum is appended as a final point when it is not a multiple of
    the step.
    """
    if step < 1:
        raise ValueError(f"sweep step must be positive, got {step}")
    best = find_max_throughput(nf, ring_size, num_outputs,
                               packet_size=packet_size, trace_length=trace_length,
                               seed=seed, frames=frames, device_budget=device_budget,
                               page_size=page_size)
    loads = list(range(step, best.offered_load + 1, step))
    if not loads or loads[-1] != best.offered_load:
        loads.append(best.offered_load)
    return [run_load_point(LoadPoint(load, packet_size, trace_length), nf,
                           ring_size, num_outputs, seed=seed, frames=frames,
                           device_budget=device_budget, page_size=page_size)
            for load in loads]


def write_csv(results: Iterable[LoadPointResult], destination: str | IO[str]) -> None:
    """Persist results: fixed header, one row per point, UTF-8, \\n endings.

    Loss fractions are rendered with six decimals so files compare bit-exact
    across runs.
    """
    lines = [CSV_HEADER]
    lines += [f"{r.offered_load},{r.delivered},{r.lost},"
              f"{r.loss_fraction:.6f},{r.latency_p50},{r.latency_p99}"
              for r in results]
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
