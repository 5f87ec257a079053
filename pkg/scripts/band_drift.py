"""Image-series band survival with both drift scalings versus constant-control MC.

Usage: python3 scripts/band_drift.py [--paths 100000]
"""

import argparse

from dividend_barrier import ModelParams, SimConfig, band_stay_mc, bm_band_stay_probability

TRIPLES = ((100.0, 300.0, 1.0), (100.0, 400.0, 2.0), (0.0, 600.0, 5.0))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=100_000)
    args = ap.parse_args()
    p = ModelParams.from_sigma2(2.0, 50.0, 0.2, 0.05, 0.5, 8.0)
    cfg = SimConfig(dt=1e-3, n_paths=args.paths, seed=77)
    print("b1     b2     T    mc        stderr    scaled    z       unscaled  z")
    for b1, b2, T in TRIPLES:
        est = band_stay_mc(b1, b2, p, T, cfg)
        scaled = bm_band_stay_probability(b1, b2, p, T)
        unscaled = bm_band_stay_probability(b1, b2, p, T, printed_drift=True)
        print(f"{b1:5.0f}  {b2:5.0f}  {T:3.0f}  {est.value:.6f}  {est.stderr:.6f}  "
              f"{scaled:.6f}  {(scaled - est.value) / est.stderr:+6.2f}  "
              f"{unscaled:.6f}  {(unscaled - est.value) / est.stderr:+8.1f}")


if __name__ == "__main__":
    main()
