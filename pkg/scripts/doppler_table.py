#!/usr/bin/env python3
"""Print the maximum Doppler shift grid (speed rows, carrier columns) in Hz."""
from thzwave.core import kmh_to_mps, max_doppler_hz

SPEEDS_KMH = [5, 30, 120, 300, 500]
CARRIERS_HZ = [3e9, 28e9, 60e9, 150e9, 300e9, 0.8e12, 1.2e12]


def main():
    head = "".join(f"{fc / 1e9:>10g}G" for fc in CARRIERS_HZ)
    print(f"{'km/h':>6s}{head}")
    for v in SPEEDS_KMH:
        row = "".join(f"{max_doppler_hz(kmh_to_mps(v), fc):>11.0f}" for fc in CARRIERS_HZ)
        print(f"{v:>6d}{row}")


if __name__ == "__main__":
    main()
