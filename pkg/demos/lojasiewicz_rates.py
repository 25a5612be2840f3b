"""How the Lojasiewicz exponent sets the decay rate.

For a gradient flow x' = -E'(x) with E = x^(2m) / (2m) the exponent is
theta = 1/(2m): theta = 1/2 (m = 1) gives exponential decay and theta < 1/2
gives the power law (1 + t)^(-theta/(1 - 2 theta)).  The script integrates the
scalar ODE exactly, hands the series to the same estimators used for full
simulations and prints what they recover.

    python3 demos/lojasiewicz_rates.py
"""
import numpy as np

from nematic.diagnostics import fit_decay, lojasiewicz_fit


def trajectory(m: int, t: np.ndarray, x0: float = 1.0) -> np.ndarray:
    if m == 1:
        return x0 * np.exp(-t)
    # x' = -x^(2m-1) has x^(2-2m) = x0^(2-2m) + (2m - 2) t
    return (x0 ** (2 - 2 * m) + (2 * m - 2) * t) ** (1.0 / (2 - 2 * m))


def main():
    t = np.linspace(0.0, 200.0, 2001)
    print(f"{'m':>2} {'theta exact':>11} {'theta fit':>9} {'decay model':>12} {'rate':>8}")
    for m in (1, 2, 3):
        x = trajectory(m, t)
        energy = x ** (2 * m) / (2 * m)
        residual = np.abs(x) ** (2 * m - 1)
        loj = lojasiewicz_fit(energy, residual)
        fit = fit_decay(t, x)
        print(f"{m:2d} {1 / (2 * m):11.4f} {loj.theta:9.4f} {fit.model:>12} {fit.rate:8.4f}")
    print("For m >= 2 the power-law exponent of x approaches 1/(2m - 2) = theta/(1 - 2 theta).")


if __name__ == "__main__":
    main()
