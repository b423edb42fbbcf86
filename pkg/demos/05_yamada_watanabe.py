"""Yamada-Watanabe approximations of |x|.

phi_{delta,eps} is even, C2, and its second derivative lives on
[eps/delta, eps] with phi'' <= 2 / (|x| log delta). The step-count schedule
ties delta and eps to n.
"""
import numpy as np

from irregular_em import yamada_watanabe as yw

for n in (16, 256, 4096):
    p = yw.schedule(0.25, n)
    x = np.array([0.0, p.lower, np.sqrt(p.lower * p.epsilon), p.epsilon, 1.0])
    print(f"n = {n:5d}: delta = {p.delta:g}, eps = {p.epsilon:.4f}")
    print("   phi  :", np.round(yw.yw_phi(p, x), 6))
    print("   phi' :", np.round(yw.yw_phi_prime(p, x), 6))
    print("   |x| - eps <= phi:", bool(np.all(np.abs(x) - p.epsilon <= yw.yw_phi(p, x))))

p0 = yw.schedule(0.0, 1000)
print(f"alpha = 0 schedule at n = 1000: delta = {p0.delta:.3f}, eps = {p0.epsilon:.4f}")
yw.dump_csv(p0, np.linspace(-0.3, 0.3, 601), "yw_phi.csv")
