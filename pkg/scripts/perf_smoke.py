#!/usr/bin/env python3
"""Measure simulated forwarding throughput in packets per wall-clock second.

Injects pre-generated frames up front (a 1024-slot ring recycles fast enough
that the device is never starved), then times the lockstep identity run loop.
The figure reflects the ring protocol and device model, not payload
generation; it tracks regressions, and absolute numbers are interpreter-bound.
"""

import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from tinyring import DESC_BYTES, Agent, MemEnv, Nic, gen_traffic, identity

RING = 1024
PACKETS = 200_000


def main() -> None:
    frames = gen_traffic(PACKETS, 64, 0)
    env = MemEnv(arena_size=RING * 2048 + 2 * RING * DESC_BYTES + 6 * 4096)
    nic = Nic(env, 1)
    agent = Agent(env, nic, RING, 1)
    for f in frames:
        nic.inject_rx(f)

    t0 = time.perf_counter()
    done = agent.run(identity(), max_packets=PACKETS, device_budget=2)
    dt = time.perf_counter() - t0

    assert done == PACKETS and nic.link.rx_dropped == 0
    print(f"{done} packets in {dt:.3f}s -> {done / dt:,.0f} packets/s "
          f"({len(nic.drain_tx(0))} emitted)")


if __name__ == "__main__":
    main()
