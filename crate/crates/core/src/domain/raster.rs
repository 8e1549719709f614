//! 8-bit RGB rasters with plain-text pixmap export.

use std::fmt::Write as _;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Raster {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    /// Pixel containing the continuous position `(x, y)`, clamped to the image.
    pub fn sample_nearest(&self, x: f64, y: f64) -> Rgb {
        let xi = (x.floor().max(0.0) as usize).min(self.width - 1);
        let yi = (y.floor().max(0.0) as usize).min(self.height - 1);
        self.get(xi, yi)
    }

    /// Fills the pixels whose centers fall inside `[x0, x1] x [y0, y1]`.
    pub fn fill_rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, c: Rgb) {
        let (xs, xe) = pixel_span(x0, x1, self.width);
        let (ys, ye) = pixel_span(y0, y1, self.height);
        for y in ys..ye {
            for x in xs..xe {
                self.set(x, y, c);
            }
        }
    }

    /// Plain (P3) pixmap text.
    pub fn to_ppm(&self) -> String {
        let mut out = format!("P3\n{} {}\n255\n", self.width, self.height);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row
                .iter()
                .map(|p| format!("{} {} {}", p[0], p[1], p[2]))
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Plain (P2) graymap text of the luma channel.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|p| luma(*p).to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

pub fn luma(p: Rgb) -> u8 {
    let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
    y.round().clamp(0.0, 255.0) as u8
}

/// Half-open range of pixel indices whose centres lie in `[lo, hi]`.
pub fn pixel_span(lo: f64, hi: f64, n: usize) -> (usize, usize) {
    let start = (lo - 0.5).ceil().max(0.0) as usize;
    let end = ((hi - 0.5).floor() + 1.0).max(0.0) as usize;
    (start.min(n), end.min(n))
}
