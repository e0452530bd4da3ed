"""Simulated DMA memory: a flat physical arena with page-level translation.

The physical side is one zero-filled byte arena handed out by a bump
allocator, so allocations are deterministic and physically contiguous.
Virtual addresses live in a far-away range with an unmapped guard page
between regions; confusing the two spaces, or touching a stale address,
fails fast with TranslationFault instead of silently aliasing.

There is no deallocation. Everything is claimed up front and kept for the
lifetime of the environment, which is exactly the discipline the driver
side needs anyway.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_PAGE_SIZE = 4096
DEFAULT_ARENA_SIZE = 16 * 1024 * 1024

# Base of the simulated virtual address space. Far from any arena offset so
# that a physical address used as a virtual one (or vice versa) faults.
_VIRT_BASE = 0x7F00_0000_0000


class TranslationFault(Exception):
    """Address is not covered by any live mapping."""


class OutOfMemory(Exception):
    """The physical arena has no room left for the request."""


@dataclass(frozen=True, eq=False)
class DmaRegion:
    """A physically contiguous, zero-initialized, page-backed allocation."""

    virt_base: int
    phys_base: int
    size: int
    view: memoryview  # writable window over this region's arena bytes

    def __repr__(self) -> str:
        return (f"DmaRegion(virt=0x{self.virt_base:x}, "
                f"phys=0x{self.phys_base:x}, size={self.size})")


class MemEnv:
    """Execution environment owning the DMA arena and the page map."""

    def __init__(self, arena_size: int = DEFAULT_ARENA_SIZE,
                 page_size: int = DEFAULT_PAGE_SIZE) -> None:
        if page_size < 1 or page_size & (page_size - 1):
            raise ValueError(f"page size must be a power of two, got {page_size}")
        if arena_size < 1:
            raise ValueError(f"arena size must be positive, got {arena_size}")
        self._page_size = page_size
        npages = -(-arena_size // page_size)
        self._arena = bytearray(npages * page_size)
        # Whole-arena view used for device-side DMA. memoryview assignment
        # cannot resize, so an out-of-range device access raises instead of
        # growing the arena the way bytearray slice assignment would.
        self.dma = memoryview(self._arena)
        self._next_phys = 0
        self._next_virt = _VIRT_BASE
        self._v2p: dict[int, int] = {}
        self._p2v: dict[int, int] = {}

    def page_size(self) -> int:
        """Configured page granularity, constant for the environment's lifetime."""
        return self._page_size

    @property
    def arena_size(self) -> int:
        return len(self._arena)

    def allocate_dma(self, size: int) -> DmaRegion:
        """Hand out a zeroed, page-aligned, physically contiguous region."""
        if size < 1:
            raise ValueError(f"allocation size must be positive, got {size}")
        ps = self._page_size
        span = -(-size // ps) * ps
        if self._next_phys + span > len(self._arena):
            raise OutOfMemory(f"{size} bytes requested, "
                              f"{len(self._arena) - self._next_phys} left in arena")
        phys = self._next_phys
        virt = self._next_virt
        self._next_phys += span
        self._next_virt += span + ps  # guard page keeps regions apart virtually
        for off in range(0, span, ps):
            self._v2p[virt + off] = phys + off
            self._p2v[phys + off] = virt + off
        return DmaRegion(virt, phys, size, self.dma[phys:phys + size])

    def virt_to_phys(self, addr: int) -> int:
        mask = self._page_size - 1
        try:
            return self._v2p[addr & ~mask] + (addr & mask)
        except KeyError:
            raise TranslationFault(f"virtual address 0x{addr:x} is not mapped") from None

    def phys_to_virt(self, addr: int) -> int:
        mask = self._page_size - 1
        try:
            return self._p2v[addr & ~mask] + (addr & mask)
        except KeyError:
            raise TranslationFault(f"physical address 0x{addr:x} is not mapped") from None
