"""Back-map table for an 8x8 rectilinear patch centred at lon=0, lat=0, 90 deg
horizontal field of view, on a 1920x960 equirectangular image.

Uses the textbook inverse gnomonic formulas (Snyder, Map Projections: A
Working Manual, eqs. 20-14/20-15) rather than ray rotation, so it shares no
code path with the Rust implementation.
"""
import math
import sys

W, H = 1920, 960
OUT_W = OUT_H = 8
FOV = 90.0
LON0, LAT0 = 0.0, 0.0


def inverse_gnomonic(x, y):
    rho = math.hypot(x, y)
    if rho == 0.0:
        return LON0, LAT0
    c = math.atan(rho)
    lat = math.asin(math.cos(c) * math.sin(LAT0) + y * math.sin(c) * math.cos(LAT0) / rho)
    lon = LON0 + math.atan2(
        x * math.sin(c),
        rho * math.cos(LAT0) * math.cos(c) - y * math.sin(LAT0) * math.sin(c),
    )
    return lon, lat


def main(out):
    f = (OUT_W / 2) / math.tan(math.radians(FOV) / 2)
    for row in range(OUT_H):
        for col in range(OUT_W):
            x = (col - (OUT_W - 1) / 2) / f
            y = ((OUT_H - 1) / 2 - row) / f
            lon, lat = inverse_gnomonic(x, y)
            u = ((lon + math.pi) / (2 * math.pi) * W) % W
            v = min(max((math.pi / 2 - lat) / math.pi * H, 0.0), H)
            out.write(f"{row} {col} {u:.6f} {v:.6f} {math.floor(u)} {math.floor(v)}\n")


if __name__ == "__main__":
    main(sys.stdout)
