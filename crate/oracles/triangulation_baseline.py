"""Monte-Carlo median 3D error of homogeneous-DLT triangulation for an
8-camera ring rig with 0.5 px Gaussian pixel noise.

Rig: cameras on a 2.5 m circle at 1.8 m height, aimed at (0, 0, 1.2),
f = 900 px, principal point (640, 360), no distortion. Points are uniform in
the 1 m cube centred on the aim point.
"""
import numpy as np

N_CAM, RADIUS, HEIGHT = 8, 2.5, 1.8
TARGET = np.array([0.0, 0.0, 1.2])
F, CX, CY = 900.0, 640.0, 360.0
SIGMA = 0.5
TRIALS = 20000


def look_at(eye):
    fwd = TARGET - eye
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, [0.0, 0.0, 1.0])
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd])
    return R, -R @ eye


def main():
    K = np.array([[F, 0, CX], [0, F, CY], [0, 0, 1.0]])
    cams = []
    for i in range(N_CAM):
        a = 2 * np.pi * i / N_CAM
        R, t = look_at(np.array([RADIUS * np.cos(a), RADIUS * np.sin(a), HEIGHT]))
        cams.append(K @ np.hstack([R, t[:, None]]))
    rng = np.random.default_rng(20240611)
    errs = []
    for _ in range(TRIALS):
        X = TARGET + rng.uniform(-0.5, 0.5, 3)
        rows = []
        for P in cams:
            x = P @ np.append(X, 1.0)
            u, v = x[:2] / x[2] + rng.normal(0, SIGMA, 2)
            rows.append(u * P[2] - P[0])
            rows.append(v * P[2] - P[1])
        _, _, vt = np.linalg.svd(np.array(rows))
        h = vt[-1]
        errs.append(np.linalg.norm(h[:3] / h[3] - X))
    errs = np.array(errs)
    print(f"median_m {np.median(errs):.6e}")
    print(f"p90_m {np.percentile(errs, 90):.6e}")


if __name__ == "__main__":
    main()
