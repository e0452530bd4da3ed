"""Pool-based forwarding pipeline used as a differential oracle.

Deliberately structured nothing like the ring agent: each frame is copied
into a buffer taken from a pool, processed, copied out once per output, and
the buffer is returned. No descriptors, no devices, no shared state.
Obvious beats fast here; for in-order processors the observable forwarding
behavior must match the agent byte for byte.
"""

from __future__ import annotations

from typing import Iterable

from .agent import Processor
from .nic import MAX_FRAME, Frame


class BufferPool:
    """Fixed set of packet buffers allocated once up front."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError(f"pool capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._free = [bytearray(MAX_FRAME) for _ in range(capacity)]

    @property
    def free_count(self) -> int:
        return len(self._free)

    def acquire(self) -> bytearray:
        return self._free.pop()

    def release(self, buf: bytearray) -> None:
        self._free.append(buf)


class RefPipeline:
    """One receive queue feeding num_outputs output queues through a processor."""

    def __init__(self, pool: BufferPool, num_outputs: int, processor: Processor) -> None:
        if num_outputs < 1:
            raise ValueError(f"output count must be positive, got {num_outputs}")
        self.pool = pool
        self.num_outputs = num_outputs
        self.processor = processor

    def process_trace(self, frames: Iterable[Frame]) -> list[list[bytes]]:
        """Run every frame through the pipeline; returns payloads per output.

        Strictly sequential: one buffer is in flight at a time, so the pool
        can never run dry and order is preserved end to end.
        """
        outs: list[list[bytes]] = [[] for _ in range(self.num_outputs)]
        for frame in frames:
            payload = frame.payload
            n = len(payload)
            buf = self.pool.acquire()
            buf[:n] = payload
            lengths = self.processor(memoryview(buf), n, self.num_outputs)
            for q, ln in enumerate(lengths):
                if ln > 0:
                    outs[q].append(bytes(buf[:ln]))
            self.pool.release(buf)
        return outs


def ref_init(pool_capacity: int, num_outputs: int, processor: Processor) -> RefPipeline:
    """Build a ready pipeline; no further allocation happens after this."""
    return RefPipeline(BufferPool(pool_capacity), num_outputs, processor)
