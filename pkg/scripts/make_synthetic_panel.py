"""Write a synthetic two-currency panel and its layout file for CLI demos.

    python scripts/make_synthetic_panel.py --out demo --K 751
    scengen calibrate --panel demo/panel.csv --layout demo/layout.txt --out demo
"""

import argparse
from pathlib import Path

import numpy as np

from scengen.data import FactorLayout, dump_layout, write_panel
from scengen.oracle import SyntheticSpec, generate_synthetic_panel


def demo_spec(K: int, seed: int) -> SyntheticSpec:
    layout = FactorLayout(("EUR", "USD"), (0.0, 0.5, 1.0, 2.0, 5.0))
    x = layout.tenors
    lam = np.zeros((3, layout.J))
    lam[0, :5], lam[0, 5:10], lam[0, 10] = 0.05, 0.03, 0.05
    lam[1, :5], lam[1, 5:10], lam[1, 10] = 0.03 * np.exp(-x / 2), 0.04 * np.exp(-x / 3), -0.04
    lam[2, 5:10], lam[2, 10] = 0.01, 0.08
    initial = np.concatenate([0.02 + 0.001 * x, 0.03 + 0.002 * x, [0.1]])
    return SyntheticSpec("hjm", layout, K, seed=seed, initial=initial, directions=lam)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="demo")
    ap.add_argument("--K", type=int, default=751, help="observations (default: 500 history + 250 backtest days + 1)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel = generate_synthetic_panel(demo_spec(args.K, args.seed))
    write_panel(panel, out / "panel.csv")
    (out / "layout.txt").write_text(dump_layout(panel.layout, panel.delta))
    print(f"wrote {out / 'panel.csv'} ({panel.K} x {panel.J}) and {out / 'layout.txt'}")


if __name__ == "__main__":
    main()
