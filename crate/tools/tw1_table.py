"""Tabulate the GOE Tracy-Widom CDF F1(s) on [-10, 8] with step 0.01.

F1(s) = det(I - K) on L2(s, inf) with K(x, y) = Ai((x + y) / 2) / 2, evaluated
by Gauss-Legendre discretisation of the Fredholm determinant. The interval is
truncated where the Airy kernel is below 1e-12.

    python3 tools/tw1_table.py > crates/core/data/tw1_cdf.csv
"""
import numpy as np
from scipy.special import airy

NODES = 200


def f1(s, nodes=NODES):
    upper = max(24.0 - s, s + 8.0)
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = s + (upper - s) * (x + 1.0) / 2.0
    w = w * (upper - s) / 2.0
    sw = np.sqrt(w)
    kernel = 0.5 * airy((x[:, None] + x[None, :]) / 2.0)[0]
    return np.linalg.det(np.eye(nodes) - sw[:, None] * kernel * sw[None, :])


def main():
    grid = np.round(np.arange(-1000, 801) * 0.01, 2)
    values = np.array([f1(s) for s in grid])
    values = np.clip(values, 0.0, 1.0)
    values = np.maximum.accumulate(values)
    print("s,cdf")
    for s, v in zip(grid, values):
        print(f"{s:.2f},{v:.17e}")


if __name__ == "__main__":
    main()
