"""Monte-Carlo residual RMS of the affine student fit.

Truth angles uniform in lon [-pi, pi), lat [-pi/3, pi/3]; observed =
A truth + b + N(0, sigma^2 I) with a random near-identity A (entries within
0.03) and |b| in [3, 6] deg. Ordinary least squares of truth on
[observed, 1]; residual RMS is sqrt(mean squared 2D residual).
"""
import numpy as np

rng = np.random.default_rng(20240611)
SIGMA, N, TRIALS = 0.01, 50, 20000
out = []
for _ in range(TRIALS):
    truth = np.column_stack([rng.uniform(-np.pi, np.pi, N), rng.uniform(-np.pi / 3, np.pi / 3, N)])
    a = np.eye(2) + rng.uniform(-0.03, 0.03, (2, 2))
    ang = rng.uniform(-np.pi, np.pi)
    mag = np.radians(rng.uniform(3, 6))
    b = mag * np.array([np.cos(ang), np.sin(ang)])
    obs = truth @ a.T + b + rng.normal(0, SIGMA, (N, 2))
    x = np.column_stack([obs, np.ones(N)])
    coef, *_ = np.linalg.lstsq(x, truth, rcond=None)
    r = truth - x @ coef
    out.append(np.sqrt(np.mean(np.sum(r * r, axis=1))))
out = np.array(out)
print(f"mean {out.mean():.6f} p99 {np.quantile(out, 0.99):.6f} max {out.max():.6f}")
