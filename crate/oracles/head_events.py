"""Reference head-event and gaze-state labels for constructed traces.

Head trace: 100 Hz, yaw 0 until t=2 s, raised-cosine ramp to 30 deg over
0.3 s, then still until t=4 s. Events are found by direct speed
thresholding: a run of consecutive intervals on the opposing side whose
span reaches `hold` flips the state; the event time is the run's first
sample.

Gaze trace: 100 Hz, fixation at lon 0 for 1 s, saccade to lon 20 deg
over 0.05 s, fixation for 1 s. Sample i (i >= 1) is scanning when the
speed over interval (i-1, i) exceeds 30 deg/s; sample 0 copies sample 1.
"""
import numpy as np

HZ = 100.0


def fwd(yaw, pitch=0.0):
    return np.stack([np.cos(pitch) * np.cos(yaw), np.cos(pitch) * np.sin(yaw),
                     np.sin(pitch) * np.ones_like(yaw)], axis=-1)


def speeds(t, d):
    c = np.cross(d[:-1], d[1:])
    ang = np.arctan2(np.linalg.norm(c, axis=1), np.sum(d[:-1] * d[1:], axis=1))
    return ang / np.diff(t)


def events(t, w, thr, hold):
    out, moving, i = [], False, 0
    while i < len(w):
        opp = (w[i] <= thr) if moving else (w[i] > thr)
        if not opp:
            i += 1
            continue
        j = i
        while j < len(w):
            o = (w[j] <= thr) if moving else (w[j] > thr)
            if not o:
                break
            if t[j + 1] - t[i] >= hold - 1e-12:
                out.append(("stop" if moving else "start", t[i]))
                moving = not moving
                break
            j += 1
        i = j + 1
    return out


def main():
    n = int(4 * HZ) + 1
    t = np.arange(n) / HZ
    s = np.clip((t - 2.0) / 0.3, 0.0, 1.0)
    yaw = np.radians(30.0) * 0.5 * (1 - np.cos(np.pi * s))
    w = speeds(t, fwd(yaw))
    for kind, tt in events(t, w, 0.5, 0.05):
        print(f"head {kind} {tt:.2f}")

    n = 206
    t = np.arange(n) / HZ
    lon = np.where(t < 1.0, 0.0, np.radians(20.0) * np.clip((t - 1.0) / 0.05, 0, 1))
    g = np.stack([np.cos(lon), np.sin(lon), np.zeros_like(lon)], axis=-1)
    v = speeds(t, g)
    lab = np.concatenate([[v[0] > np.radians(30)], v > np.radians(30)])
    runs, start = [], 0
    for i in range(1, n + 1):
        if i == n or lab[i] != lab[start]:
            runs.append(("S" if lab[start] else "F", start, i - 1))
            start = i
    print("gaze", " ".join(f"{k}{a}-{b}" for k, a, b in runs))


if __name__ == "__main__":
    main()
