//! Handcrafted image features and the fixation-context consistency score.

use serde::{Deserialize, Serialize};

use crate::domain::{pixel_span, ErpPoint, Raster, Scene};

use super::MetricsError;

pub const HIST_BINS_PER_CHANNEL: usize = 16;
/// 48 histogram bins plus mean gradient magnitude.
pub const FEATURE_DIM: usize = 3 * HIST_BINS_PER_CHANNEL + 1;

/// Pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Window {
    pub fn full(r: &Raster) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: r.width(),
            y1: r.height(),
        }
    }

    /// Square of pixels whose centres lie within `radius` (Chebyshev) of
    /// `(x, y)`, clipped to the raster.
    pub fn around(r: &Raster, x: f64, y: f64, radius: f64) -> Result<Self, MetricsError> {
        let lo = |c: f64| (c - radius - 0.5).ceil().max(0.0) as usize;
        let hi =
            |c: f64, n: usize| ((c + radius - 0.5).floor() + 1.0).clamp(0.0, n as f64) as usize;
        let w = Self {
            x0: lo(x),
            y0: lo(y),
            x1: hi(x, r.width()),
            y1: hi(y, r.height()),
        };
        if w.x0 >= w.x1 || w.y0 >= w.y1 {
            return Err(MetricsError::EmptyWindow { x, y, radius });
        }
        Ok(w)
    }
}

/// Turns a raster window into a feature vector.
pub trait FeatureExtractor {
    fn id(&self) -> &str;
    fn extract(&self, raster: &Raster, window: Window) -> Vec<f64>;
}

/// Per-channel 16-bin colour histogram (fractions of window pixels) and the
/// mean forward-difference luma gradient magnitude scaled to `[0, 1]`,
/// L2-normalized as a whole. An all-zero vector stays zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistGradExtractor;

impl FeatureExtractor for HistGradExtractor {
    fn id(&self) -> &str {
        "histgrad"
    }

    fn extract(&self, raster: &Raster, w: Window) -> Vec<f64> {
        let mut f = vec![0.0; FEATURE_DIM];
        let n = ((w.x1 - w.x0) * (w.y1 - w.y0)) as f64;
        let mut grad = 0.0;
        for y in w.y0..w.y1 {
            for x in w.x0..w.x1 {
                let px = raster.get(x, y);
                for (c, &v) in px.iter().enumerate() {
                    f[c * HIST_BINS_PER_CHANNEL + v as usize / HIST_BINS_PER_CHANNEL] += 1.0 / n;
                }
                let l = luma(px);
                let gx = if x + 1 < w.x1 {
                    luma(raster.get(x + 1, y)) - l
                } else {
                    0.0
                };
                let gy = if y + 1 < w.y1 {
                    luma(raster.get(x, y + 1)) - l
                } else {
                    0.0
                };
                grad += gx.hypot(gy);
            }
        }
        f[FEATURE_DIM - 1] = grad / n;
        l2_normalize(&mut f);
        f
    }
}

fn luma(p: [u8; 3]) -> f64 {
    (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0
}

pub fn l2_normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::DimMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FccConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Half-width of the local window, pixels.
    pub radius: f64,
    pub extractor: String,
}

impl Default for FccConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            radius: 48.0,
            extractor: "histgrad".into(),
        }
    }
}

impl FccConfig {
    pub fn new(alpha: f64, radius: f64) -> Result<Self, MetricsError> {
        let c = Self {
            alpha,
            beta: 1.0 - alpha,
            radius,
            ..Self::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && (self.alpha + self.beta - 1.0).abs() <= 1e-12)
        {
            return Err(MetricsError::Weights(format!(
                "alpha {} and beta {} must be >= 0 and sum to 1",
                self.alpha, self.beta
            )));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(MetricsError::Weights(format!(
                "radius {} must be >= 0",
                self.radius
            )));
        }
        if self.extractor != "histgrad" {
            return Err(MetricsError::Weights(format!(
                "unknown extractor `{}`",
                self.extractor
            )));
        }
        Ok(())
    }
}

/// Local and global features of the attended render (`v`) and of the raw
/// scene (`e`) around one gaze point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextFeatures {
    pub v_local: Vec<f64>,
    pub v_global: Vec<f64>,
    pub e_local: Vec<f64>,
    pub e_global: Vec<f64>,
}

pub fn extract_features(
    attended: &Raster,
    scene_raster: &Raster,
    gaze: &ErpPoint,
    cfg: &FccConfig,
    extractor: &dyn FeatureExtractor,
) -> Result<ContextFeatures, MetricsError> {
    let lv = Window::around(attended, gaze.u, gaze.v, cfg.radius)?;
    let le = Window::around(scene_raster, gaze.u, gaze.v, cfg.radius)?;
    Ok(ContextFeatures {
        v_local: extractor.extract(attended, lv),
        v_global: extractor.extract(attended, Window::full(attended)),
        e_local: extractor.extract(scene_raster, le),
        e_global: extractor.extract(scene_raster, Window::full(scene_raster)),
    })
}

/// The scene raster with everything outside the attended objects' boxes
/// set to black.
pub fn render_attention(scene: &Scene, raster: &Raster, attended: &[u32]) -> Raster {
    let mut out = Raster::new(raster.width(), raster.height(), [0, 0, 0]);
    for o in scene.objects.iter().filter(|o| attended.contains(&o.id)) {
        let b = &o.bbox;
        let (xs, xe) = pixel_span(b.x_min, b.x_max, raster.width());
        let (ys, ye) = pixel_span(b.y_min, b.y_max, raster.height());
        for y in ys..ye {
            for x in xs..xe {
                out.set(x, y, raster.get(x, y));
            }
        }
    }
    out
}

/// `alpha cos(v_local, e_local) + beta cos(v_global, e_global)`.
pub fn fcc_score(f: &ContextFeatures, cfg: &FccConfig) -> Result<f64, MetricsError> {
    Ok(cfg.alpha * cosine(&f.v_local, &f.e_local)? + cfg.beta * cosine(&f.v_global, &f.e_global)?)
}
