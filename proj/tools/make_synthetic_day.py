#!/usr/bin/env python3
"""Writes the synthetic 8-bus feeder, battery roster and one-day load file in data/.

Loads are kW per bus (two households each): a morning and an evening peak,
rooftop PV producing midday export. Output is deterministic.
"""
import json
import math
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data"
BUSES = 7
STEPS = 288  # 5-min intervals


def bump(t, centre, width):
    return math.exp(-0.5 * ((t - centre) / width) ** 2)


def household(t, rng_phase, scale):
    base = 0.35 + 0.15 * math.cos(2 * math.pi * (t - 3.0) / 24.0)
    morning = 1.6 * bump(t, 7.5 + rng_phase, 0.9)
    evening = 2.6 * bump(t, 19.0 + rng_phase, 1.4)
    return scale * (base + morning + evening)


def pv(t, capacity):
    if t <= 6.0 or t >= 19.0:
        return 0.0
    return capacity * math.sin(math.pi * (t - 6.0) / 13.0) ** 1.5


def main():
    rng = random.Random(20240601)
    OUT.mkdir(exist_ok=True)

    # Per-unit impedances on 10 kVA / 230 V; about 60 m of LV cable per segment.
    segments = []
    parent = {1: 0, 2: 1, 3: 2, 4: 3, 5: 4, 6: 3, 7: 6}
    for b in range(1, BUSES + 1):
        r = round(0.0032 + 0.0008 * rng.random(), 5)
        x = round(0.6 * r, 5)
        segments.append({"from": parent[b], "to": b, "r_pu": r, "x_pu": x})
    feeder = {
        "power_base_va": 10000.0,
        "voltage_base_v": 230.0,
        "slack_voltage_pu": 1.0,
        "buses": list(range(BUSES + 1)),
        "segments": segments,
    }
    (OUT / "feeder_8bus.json").write_text(json.dumps(feeder, indent=2) + "\n")

    batteries = {
        "batteries": [
            {"bus": b, "s_rated_kva": 5.0, "c_max_kwh": 10.0, "c_min_kwh": 0.0, "c_init_kwh": 3.0}
            for b in range(1, BUSES + 1)
        ]
    }
    (OUT / "batteries_8bus.json").write_text(json.dumps(batteries, indent=2) + "\n")

    phases = [[rng.uniform(-0.5, 0.5) for _ in range(2)] for _ in range(BUSES)]
    scales = [[rng.uniform(0.8, 1.2) for _ in range(2)] for _ in range(BUSES)]
    pv_caps = [rng.uniform(3.5, 5.0) for _ in range(BUSES)]
    lines = ["time_min," + ",".join(f"p_{b}" for b in range(1, BUSES + 1))]
    for k in range(STEPS):
        t = k * 5.0 / 60.0
        row = []
        for b in range(BUSES):
            demand = sum(household(t, phases[b][h], scales[b][h]) for h in range(2))
            noise = 1.0 + 0.05 * math.sin(7.3 * t + b)
            row.append(round(demand * noise - pv(t, pv_caps[b]), 4))
        lines.append(f"{k * 5}," + ",".join(f"{v:.4f}" for v in row))
    (OUT / "day_8bus.csv").write_text("\n".join(lines) + "\n")

    chain = {
        "power_base_va": 1000.0,
        "voltage_base_v": 230.0,
        "slack_voltage_pu": 1.0,
        "buses": [0, 1, 2],
        "segments": [
            {"from": 0, "to": 1, "r_pu": 0.1, "x_pu": 0.0},
            {"from": 1, "to": 2, "r_pu": 0.2, "x_pu": 0.0},
        ],
    }
    (OUT / "chain_2bus.json").write_text(json.dumps(chain, indent=2) + "\n")


if __name__ == "__main__":
    main()
