//! Procedural panoramas: random object layouts and their flat-colour rendering.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    rng_stream, stream_id, BoundingBox, ErpPoint, ImageSize, Lighting, Raster, Rgb, Scene,
    SceneObject, StreamDomain,
};

use super::SimError;

pub const CATEGORIES: [&str; 8] = [
    "person", "screen", "plant", "lamp", "poster", "chair", "window", "vehicle",
];

/// Attempts per object before packing is declared impossible.
const PLACEMENT_TRIES: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub id: String,
    pub size: ImageSize,
    pub n_objects: usize,
    pub lighting: Lighting,
    /// Probability that an object is dynamic.
    pub dynamic_fraction: f64,
}

impl SceneSpec {
    pub fn new(id: impl Into<String>, n_objects: usize, lighting: Lighting) -> Self {
        Self {
            id: id.into(),
            size: ImageSize::DEFAULT,
            n_objects,
            lighting,
            dynamic_fraction: 0.0,
        }
    }
}

fn brightness_range(l: Lighting) -> (f64, f64) {
    match l {
        Lighting::Low => (0.05, 0.5),
        Lighting::Normal => (0.1, 0.9),
        Lighting::High => (0.5, 1.0),
    }
}

/// Random non-overlapping boxes between 10 and 80 degrees of latitude away
/// from the poles, with uniform saliency and lighting-dependent brightness.
pub fn gen_scene(seed: u64, spec: &SceneSpec) -> Result<Scene, SimError> {
    if spec.n_objects == 0 {
        return Err(SimError::Generation(
            "a scene needs at least one object".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.dynamic_fraction) {
        return Err(SimError::Generation(format!(
            "dynamic fraction {} outside [0, 1]",
            spec.dynamic_fraction
        )));
    }
    let mut rng = rng_stream(seed, stream_id(StreamDomain::Scene, 0));
    let (w, h) = (spec.size.w(), spec.size.h());
    let gap = w / 192.0;
    let (b_lo, b_hi) = brightness_range(spec.lighting);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(spec.n_objects);
    for id in 0..spec.n_objects as u32 {
        let mut placed = None;
        for _ in 0..PLACEMENT_TRIES {
            let bw = rng.random_range(w / 24.0..w / 9.0);
            let bh = rng.random_range(h / 12.0..h / 5.0);
            let x0 = rng.random_range(0.0..w - bw);
            let y0 = rng.random_range(h / 9.0..h * 8.0 / 9.0 - bh);
            let b = BoundingBox::new(x0, y0, x0 + bw, y0 + bh).expect("positive extent");
            if objects.iter().all(|o| !o.bbox.intersects(&b, gap)) {
                placed = Some(b);
                break;
            }
        }
        let bbox = placed.ok_or_else(|| {
            SimError::Generation(format!(
                "could not place object {id} of {} after {PLACEMENT_TRIES} tries",
                spec.n_objects
            ))
        })?;
        let category = CATEGORIES[rng.random_range(0..CATEGORIES.len())].to_string();
        let saliency = rng.random_range(0.0..=1.0);
        let brightness = rng.random_range(b_lo..=b_hi);
        let dynamic = rng.random_bool(spec.dynamic_fraction);
        let motion_start = dynamic.then(|| {
            let u = rng.random_range(bbox.x_min..=bbox.x_max);
            let v = rng.random_range(bbox.y_min..=bbox.y_max);
            ErpPoint::wrapped(u, v, spec.size)
        });
        objects.push(SceneObject {
            id,
            bbox,
            category,
            saliency,
            brightness,
            dynamic,
            motion_start,
        });
    }
    let background_seed = rng.random();
    Ok(Scene {
        id: spec.id.clone(),
        size: spec.size,
        dynamic: objects.iter().any(|o| o.dynamic),
        objects,
        background_seed,
        lighting: spec.lighting,
    })
}

/// HSV with all components in `[0, 1]` (hue in turns).
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Rgb {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let c = v * s;
    let x = c * (1.0 - ((h6 % 2.0) - 1.0).abs());
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |t: f64| ((t + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Colour of an object: hue from category, saturation from saliency,
/// value from brightness.
pub fn object_color(o: &SceneObject) -> Rgb {
    let idx = CATEGORIES
        .iter()
        .position(|c| *c == o.category)
        .unwrap_or(CATEGORIES.len());
    let hue = idx as f64 / (CATEGORIES.len() + 1) as f64;
    hsv_to_rgb(hue, 0.25 + 0.75 * o.saliency, 0.15 + 0.85 * o.brightness)
}

/// Blocky grey background (32 x 16 cells) seeded by the scene, with objects
/// painted in order so later objects cover earlier ones.
pub fn render_scene(scene: &Scene) -> Raster {
    let (wp, hp) = (scene.size.width as usize, scene.size.height as usize);
    let mut rng = rng_stream(scene.background_seed, stream_id(StreamDomain::Scene, 1));
    let (cols, rows) = (32usize, 16usize);
    let (lo, hi) = match scene.lighting {
        Lighting::Low => (10.0, 50.0),
        Lighting::Normal => (40.0, 110.0),
        Lighting::High => (90.0, 170.0),
    };
    let cells: Vec<u8> = (0..cols * rows)
        .map(|_| rng.random_range(lo..hi) as u8)
        .collect();
    let mut raster = Raster::new(wp, hp, [0, 0, 0]);
    for y in 0..hp {
        let r = y * rows / hp;
        for x in 0..wp {
            let g = cells[r * cols + x * cols / wp];
            raster.set(x, y, [g, g, g]);
        }
    }
    for o in &scene.objects {
        let b = &o.bbox;
        raster.fill_rect(b.x_min, b.y_min, b.x_max, b.y_max, object_color(o));
    }
    raster
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Validate;

    #[test]
    fn single_object_scene() {
        let s = gen_scene(1, &SceneSpec::new("s1", 1, Lighting::Normal)).unwrap();
        assert_eq!(s.objects.len(), 1);
        s.validate().unwrap();
    }

    #[test]
    fn low_light_brightness_bounded() {
        let s = gen_scene(9, &SceneSpec::new("s9", 12, Lighting::Low)).unwrap();
        assert_eq!(s.objects.len(), 12);
        assert!(s.objects.iter().all(|o| o.brightness <= 0.5));
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = SceneSpec {
            dynamic_fraction: 0.5,
            ..SceneSpec::new("d", 8, Lighting::High)
        };
        let a = gen_scene(3, &spec).unwrap();
        assert_eq!(a, gen_scene(3, &spec).unwrap());
        assert_ne!(a, gen_scene(4, &spec).unwrap());
        a.validate().unwrap();
        assert_eq!(render_scene(&a), render_scene(&a));
    }

    #[test]
    fn impossible_packing_is_an_error() {
        let spec = SceneSpec {
            size: ImageSize::from_height(40),
            ..SceneSpec::new("crowd", 500, Lighting::Normal)
        };
        assert!(matches!(gen_scene(2, &spec), Err(SimError::Generation(_))));
        assert!(gen_scene(2, &SceneSpec::new("none", 0, Lighting::Normal)).is_err());
    }

    #[test]
    fn objects_are_painted() {
        let s = gen_scene(5, &SceneSpec::new("p", 4, Lighting::Normal)).unwrap();
        let r = render_scene(&s);
        for o in &s.objects {
            let (cx, cy) = o.bbox.centroid();
            assert_eq!(r.get(cx as usize, cy as usize), object_color(o));
        }
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0), [255, 0, 0]);
        assert_eq!(hsv_to_rgb(1.0 / 3.0, 1.0, 1.0), [0, 255, 0]);
        assert_eq!(hsv_to_rgb(0.5, 0.0, 0.5), [128, 128, 128]);
    }
}
