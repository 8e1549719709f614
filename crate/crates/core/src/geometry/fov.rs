//! Gnomonic (rectilinear) view extraction from an equirectangular raster.

use std::fmt::Write as _;

use crate::domain::{ErpPoint, ImageSize, Raster};

use super::{dir_to_erp, GeometryError, SphereDir};

/// Perspective patch plus, for every patch pixel, the ERP position it samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FovPatch {
    pub raster: Raster,
    /// Row-major, `out_w * out_h` entries.
    pub backmap: Vec<ErpPoint>,
    pub center: SphereDir,
    pub fov_deg: f64,
}

impl FovPatch {
    pub fn width(&self) -> usize {
        self.raster.width()
    }

    pub fn height(&self) -> usize {
        self.raster.height()
    }

    /// ERP position sampled by patch pixel `(row, col)`.
    pub fn source(&self, row: usize, col: usize) -> ErpPoint {
        self.backmap[row * self.width() + col]
    }

    /// Integer ERP pixel sampled by patch pixel `(row, col)`.
    pub fn source_pixel(&self, row: usize, col: usize) -> (usize, usize) {
        let p = self.source(row, col);
        (p.u.floor() as usize, p.v.floor() as usize)
    }
}

/// Viewing ray through patch pixel `(row, col)` for a horizontal field of
/// view of `fov_deg` centred on `g`.
///
/// Pixel centres are offset from the optical axis by
/// `x = col - (w-1)/2` (toward increasing longitude) and
/// `y = (h-1)/2 - row` (toward the zenith); the focal length is
/// `(w/2) / tan(fov/2)`.
pub fn fov_ray(
    g: &SphereDir,
    fov_deg: f64,
    out_w: usize,
    out_h: usize,
    row: usize,
    col: usize,
) -> SphereDir {
    let lon0 = g.lon();
    let lat0 = g.lat();
    let f = (out_w as f64 / 2.0) / (fov_deg.to_radians() / 2.0).tan();
    let xc = col as f64 - (out_w as f64 - 1.0) / 2.0;
    let yc = (out_h as f64 - 1.0) / 2.0 - row as f64;
    let (s0, c0) = lat0.sin_cos();
    let (sl, cl) = lon0.sin_cos();
    let right = [-sl, cl, 0.0];
    let up = [-s0 * cl, -s0 * sl, c0];
    let fwd = [c0 * cl, c0 * sl, s0];
    let d: Vec<f64> = (0..3)
        .map(|i| f * fwd[i] + xc * right[i] + yc * up[i])
        .collect();
    SphereDir::new(d[0], d[1], d[2]).expect("focal length is positive")
}

pub fn extract_fov(
    erp: &Raster,
    size: ImageSize,
    g: &SphereDir,
    fov_deg: f64,
    out_w: usize,
    out_h: usize,
) -> Result<FovPatch, GeometryError> {
    if !(fov_deg > 0.0 && fov_deg < 180.0) {
        return Err(GeometryError::FovOutOfRange(fov_deg));
    }
    if erp.width() != size.width as usize || erp.height() != size.height as usize {
        return Err(GeometryError::RasterSize {
            got_w: erp.width(),
            got_h: erp.height(),
            want_w: size.width,
            want_h: size.height,
        });
    }
    if out_w == 0 || out_h == 0 {
        return Err(GeometryError::InvalidCamera("empty output patch".into()));
    }
    let mut raster = Raster::new(out_w, out_h, [0, 0, 0]);
    let mut backmap = Vec::with_capacity(out_w * out_h);
    for row in 0..out_h {
        for col in 0..out_w {
            let d = fov_ray(g, fov_deg, out_w, out_h, row, col);
            let p = dir_to_erp(&d, size);
            raster.set(col, row, erp.sample_nearest(p.u, p.v));
            backmap.push(p);
        }
    }
    Ok(FovPatch {
        raster,
        backmap,
        center: *g,
        fov_deg,
    })
}

/// One line per patch pixel: `row col u v src_u src_v` with six decimals.
pub fn backmap_table_text(patch: &FovPatch) -> String {
    let mut out = String::new();
    for row in 0..patch.height() {
        for col in 0..patch.width() {
            let p = patch.source(row, col);
            let (su, sv) = patch.source_pixel(row, col);
            let _ = writeln!(out, "{row} {col} {:.6} {:.6} {su} {sv}", p.u, p.v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::erp_to_dir;

    fn gradient_erp(size: ImageSize) -> Raster {
        let mut r = Raster::new(size.width as usize, size.height as usize, [0, 0, 0]);
        for y in 0..r.height() {
            for x in 0..r.width() {
                r.set(
                    x,
                    y,
                    [(x % 256) as u8, (y % 256) as u8, ((x / 256) * 16) as u8],
                );
            }
        }
        r
    }

    #[test]
    fn odd_patch_center_backmaps_to_gaze() {
        let size = ImageSize::from_height(90);
        let erp = gradient_erp(size);
        let g = SphereDir::from_angles(0.7, -0.3);
        let patch = extract_fov(&erp, size, &g, 120.0, 9, 7).unwrap();
        let c = patch.source(3, 4);
        let want = dir_to_erp(&g, size);
        assert!((c.u - want.u).abs() < 1e-9 && (c.v - want.v).abs() < 1e-9);
    }

    #[test]
    fn horizontal_midline_within_half_fov() {
        let size = ImageSize::from_height(180);
        let erp = gradient_erp(size);
        let g = SphereDir::from_angles(0.0, 0.0);
        let patch = extract_fov(&erp, size, &g, 120.0, 33, 17).unwrap();
        for col in 0..33 {
            let d = erp_to_dir(&patch.source(8, col));
            assert!(d.angle_to(&g) <= 60f64.to_radians() + 1e-9);
        }
    }

    #[test]
    fn samples_come_from_backmapped_pixels() {
        let size = ImageSize::from_height(64);
        let erp = gradient_erp(size);
        let g = SphereDir::from_angles(-2.9, 0.8);
        let patch = extract_fov(&erp, size, &g, 100.0, 12, 10).unwrap();
        for row in 0..10 {
            for col in 0..12 {
                let (u, v) = patch.source_pixel(row, col);
                assert_eq!(patch.raster.get(col, row), erp.get(u, v));
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let size = ImageSize::from_height(32);
        let erp = gradient_erp(size);
        let g = SphereDir::FORWARD;
        for fov in [0.0, 180.0, -5.0, f64::NAN] {
            assert!(matches!(
                extract_fov(&erp, size, &g, fov, 4, 4),
                Err(GeometryError::FovOutOfRange(_))
            ));
        }
        let other = ImageSize::from_height(16);
        assert!(matches!(
            extract_fov(&erp, other, &g, 90.0, 4, 4),
            Err(GeometryError::RasterSize { .. })
        ));
    }
}
