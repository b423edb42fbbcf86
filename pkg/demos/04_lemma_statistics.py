"""Two small-time statistics behind the error analysis.

modulus_stat: mean |X_{t+h/2} - X_t|^2 over steps, which should halve when
the number of steps doubles.

class_a_increment_stat: time integral of E|1[X_s >= 0] - 1[X_eta(s) >= 0]|
for Brownian motion, which decays like n^-1/2 (so a factor 2 per 4n).
"""
from irregular_em import coefficients as co
from irregular_em.simulate import class_a_increment_stat, modulus_stat

for name in ("G1", "G4"):
    prob = co.gallery_problem(name)
    vals = [modulus_stat(prob, n, 2.0, 5000, seed=1).mean for n in (128, 256, 512)]
    print(name, "modulus:", ", ".join(f"{v:.3e}" for v in vals),
          " ratios:", ", ".join(f"{a / b:.3f}" for a, b in zip(vals, vals[1:])))

bm = co.gallery_problem("G5")
zeta = co.indicator_ge(0.0)
vals = {n: class_a_increment_stat(bm, zeta, n, 1.0, 10_000, seed=1).mean for n in (64, 256, 1024)}
for n in (64, 256):
    print(f"class-A increment n = {n:4d}: {vals[n]:.4e}  ratio to 4n: {vals[n] / vals[4 * n]:.3f}")
