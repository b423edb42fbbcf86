"""Empirical convergence rates against the proven ones.

For a few gallery problems we measure the L1 error at the terminal time,
fit a slope on the log-log scale, and print the exponent of the proven
upper bound next to it. The bound is an upper bound, so the measured slope
should be at least as large (up to noise).
"""
from irregular_em import coefficients as co
from irregular_em.error_stats import fit_rate, strong_errors, theoretical_rate

n_list = [2 ** k for k in range(5, 10)]
cases = [("G1", {}), ("G3", {"beta": 0.5}), ("G4", {"alpha": 0.25}), ("G6", {})]

for name, params in cases:
    prob = co.gallery_problem(name, **params)
    ests = strong_errors(prob, ["L1_terminal", "L1_sup"], n_list, 16, 2000, seed=42)
    for norm, rows in ests.items():
        fit = fit_rate(rows)
        rate = theoretical_rate(prob.alpha, prob.beta, norm, l1_drift=prob.drift.integrable,
                                hoelder_only=prob.drift.class_a_part is None)
        print(f"{name:3s} {norm:12s} slope {fit.slope:5.3f}  (R^2 {fit.r_squared:.3f})   "
              f"proven {rate.exponent:.3f}{' *' if rate.subpolynomial else ''}")
print("* up to an exp(C sqrt(log n)) factor")
