//! Per-subject angular gaze bias.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{ErpPoint, Scanpath};
use crate::geometry::{angles_to_erp, erp_to_angles, wrap_angle};

use super::SimError;

/// Maps true gaze angles `(lon, lat)` to observed ones: `A x + b` plus
/// isotropic Gaussian noise of `sigma` radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub id: String,
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub sigma: f64,
    /// Free-form labels for reports.
    #[serde(default)]
    pub tags: Vec<String>,
}

impl SubjectProfile {
    pub fn identity(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            a: [[1.0, 0.0], [0.0, 1.0]],
            b: [0.0, 0.0],
            sigma: 0.0,
            tags: Vec::new(),
        }
    }

    pub fn offset(id: impl Into<String>, b: [f64; 2]) -> Self {
        Self {
            b,
            ..Self::identity(id)
        }
    }

    /// Offset of `offset_deg` in a random direction, a near-identity matrix
    /// (entries perturbed by up to `matrix_jitter`) and noise `sigma_deg`.
    pub fn random_affine<R: Rng + ?Sized>(
        id: impl Into<String>,
        offset_deg: f64,
        matrix_jitter: f64,
        sigma_deg: f64,
        rng: &mut R,
    ) -> Self {
        let dir = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let mag = offset_deg.to_radians();
        let mut j = || {
            if matrix_jitter > 0.0 {
                rng.random_range(-matrix_jitter..matrix_jitter)
            } else {
                0.0
            }
        };
        let a = [[1.0 + j(), j()], [j(), 1.0 + j()]];
        Self {
            id: id.into(),
            a,
            b: [mag * dir.cos(), mag * dir.sin()],
            sigma: sigma_deg.to_radians(),
            tags: vec!["affine".into()],
        }
    }

    pub fn det(&self) -> f64 {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.det().abs() > 1e-9) {
            return Err(SimError::Profile(format!(
                "bias matrix of `{}` is singular",
                self.id
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SimError::Profile(format!(
                "noise sigma {} must be >= 0",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Noise-free affine part.
    pub fn map(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * x[0] + self.a[0][1] * x[1] + self.b[0],
            self.a[1][0] * x[0] + self.a[1][1] * x[1] + self.b[1],
        ]
    }

    /// Noise-free profile undoing [`SubjectProfile::map`].
    pub fn inverse(&self) -> Result<Self, SimError> {
        self.validate()?;
        let d = self.det();
        let inv = [
            [self.a[1][1] / d, -self.a[0][1] / d],
            [-self.a[1][0] / d, self.a[0][0] / d],
        ];
        let b = [
            -(inv[0][0] * self.b[0] + inv[0][1] * self.b[1]),
            -(inv[1][0] * self.b[0] + inv[1][1] * self.b[1]),
        ];
        Ok(Self {
            id: format!("{}^-1", self.id),
            a: inv,
            b,
            sigma: 0.0,
            tags: self.tags.clone(),
        })
    }
}

/// Observed scanpath alongside the truth it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedScanpath {
    pub observed: Scanpath,
    pub truth: Scanpath,
    /// Fixations whose biased latitude left `[-pi/2, pi/2]` and was clamped.
    pub clamped: Vec<bool>,
}

/// Maps one ERP point through the profile; the flag reports latitude clamping.
pub fn bias_point<R: Rng + ?Sized>(
    p: &ErpPoint,
    profile: &SubjectProfile,
    rng: &mut R,
) -> (ErpPoint, bool) {
    let (lon, lat) = erp_to_angles(p.u, p.v, p.size);
    let [mut l, mut f] = profile.map([lon, lat]);
    if profile.sigma > 0.0 {
        let n = Normal::new(0.0, profile.sigma).expect("sigma validated");
        l += n.sample(rng);
        f += n.sample(rng);
    }
    let clamped = !(-FRAC_PI_2..=FRAC_PI_2).contains(&f);
    let f = f.clamp(-FRAC_PI_2, FRAC_PI_2);
    (angles_to_erp(wrap_angle(l), f, p.size), clamped)
}

pub fn apply_bias<R: Rng + ?Sized>(
    scanpath: &Scanpath,
    profile: &SubjectProfile,
    rng: &mut R,
) -> Result<BiasedScanpath, SimError> {
    profile.validate()?;
    let mut observed = scanpath.clone();
    let mut clamped = Vec::with_capacity(scanpath.len());
    for f in &mut observed.fixations {
        let (p, c) = bias_point(&f.point, profile, rng);
        f.point = p;
        clamped.push(c);
    }
    Ok(BiasedScanpath {
        observed,
        truth: scanpath.clone(),
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{rng_stream, EmotionLabel, Fixation, ImageSize};

    fn path(points: &[(f64, f64)]) -> Scanpath {
        let size = ImageSize::DEFAULT;
        let fixations = points
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| Fixation {
                point: ErpPoint::new(u, v, size).unwrap(),
                t_start: i as f64 * 0.5,
                duration: 0.3,
                target: None,
            })
            .collect();
        Scanpath::new("s", EmotionLabel::Fear, "scene", fixations).unwrap()
    }

    #[test]
    fn identity_is_noop() {
        let p = path(&[(100.0, 200.0), (1500.5, 700.25)]);
        let out = apply_bias(&p, &SubjectProfile::identity("x"), &mut rng_stream(0, 0)).unwrap();
        for (a, b) in out.observed.fixations.iter().zip(&p.fixations) {
            assert!((a.point.u - b.point.u).abs() < 1e-9 && (a.point.v - b.point.v).abs() < 1e-9);
        }
        assert_eq!(out.truth, p);
    }

    #[test]
    fn offset_shifts_longitude() {
        let p = path(&[(300.0, 480.0), (900.0, 100.0)]);
        let out = apply_bias(
            &p,
            &SubjectProfile::offset("x", [0.05, 0.0]),
            &mut rng_stream(0, 0),
        )
        .unwrap();
        for (a, b) in out.observed.fixations.iter().zip(&p.fixations) {
            let (la, fa) = erp_to_angles(a.point.u, a.point.v, a.point.size);
            let (lb, fb) = erp_to_angles(b.point.u, b.point.v, b.point.size);
            assert!((la - lb - 0.05).abs() < 1e-12 && (fa - fb).abs() < 1e-12);
        }
    }

    #[test]
    fn latitude_clamping_flagged() {
        let p = path(&[(960.0, 5.0), (960.0, 480.0)]);
        let out = apply_bias(
            &p,
            &SubjectProfile::offset("x", [0.0, 0.1]),
            &mut rng_stream(0, 0),
        )
        .unwrap();
        assert_eq!(out.clamped, vec![true, false]);
        assert_eq!(out.observed.fixations[0].point.v, 0.0);
    }

    #[test]
    fn singular_profiles_rejected() {
        let mut p = SubjectProfile::identity("x");
        p.a = [[1.0, 2.0], [0.5, 1.0]];
        assert!(p.validate().is_err());
        assert!(p.inverse().is_err());
    }
}
