//! A simplified center-surround saliency model: Gaussian pyramid, intensity,
//! red-green and blue-yellow opponency, oriented derivatives, across-scale
//! differences and single-pass max normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel grid with one (gray) or three (RGB) channels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("width", "image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::param(
                "channels",
                format!("must be 1 or 3, got {channels}"),
            ));
        }
        if data.len() != width as usize * height as usize * channels {
            return Err(Error::Format(format!(
                "{}x{}x{} image needs {} values, got {}",
                width,
                height,
                channels,
                width as usize * height as usize * channels,
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let data = img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
        Image::new(img.width(), img.height(), 3, data).expect("rgb buffer matches dimensions")
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[f64] {
        let i = (y as usize * self.width as usize + x as usize) * self.channels;
        &self.data[i..i + self.channels]
    }

    fn plane(&self, f: impl Fn(&[f64]) -> f64) -> Plane {
        Plane {
            w: self.width as usize,
            h: self.height as usize,
            v: self.data.chunks(self.channels).map(f).collect(),
        }
    }
}

/// Per-pixel saliency in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
    /// Largest combined response before min-max normalization.
    pub raw_peak: f64,
    /// Set when the response was constant and the map is all zeros.
    pub degenerate: bool,
}

impl SaliencyMap {
    /// Wraps values already in `[0, 1]`.
    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize || width == 0 || height == 0 {
            return Err(Error::Format(format!(
                "saliency map {}x{} needs {} values, got {}",
                width,
                height,
                width as usize * height as usize,
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Format("saliency values must lie in [0, 1]".into()));
        }
        let raw_peak = values.iter().copied().fold(0.0, f64::max);
        Ok(SaliencyMap {
            width,
            height,
            values,
            raw_peak,
            degenerate: false,
        })
    }

    /// Min-max normalizes arbitrary finite responses.
    pub fn normalized(width: u32, height: u32, raw: Vec<f64>) -> Self {
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let degenerate = !(span > 1e-12 * hi.abs().max(1.0));
        let values = if degenerate {
            vec![0.0; raw.len()]
        } else {
            raw.iter().map(|v| (v - lo) / span).collect()
        };
        SaliencyMap {
            width,
            height,
            values,
            raw_peak: hi,
            degenerate,
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaliencyMode {
    #[default]
    Color,
    #[serde(alias = "grayscale")]
    Gray,
}

impl std::str::FromStr for SaliencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "color" => Ok(SaliencyMode::Color),
            "gray" | "grayscale" => Ok(SaliencyMode::Gray),
            other => Err(Error::param(
                "mode",
                format!("unknown saliency mode `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for SaliencyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SaliencyMode::Color => "color",
            SaliencyMode::Gray => "gray",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaliencyConfig {
    pub levels: usize,
    pub surround_offset: usize,
    pub orientations: usize,
    pub intensity: bool,
    pub color: bool,
    pub orientation: bool,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        SaliencyConfig {
            levels: 5,
            surround_offset: 2,
            orientations: 4,
            intensity: true,
            color: true,
            orientation: true,
        }
    }
}

#[derive(Clone, Debug)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Plane {
    fn at(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.v[y * self.w + x]
    }

    /// Separable filter with clamped borders.
    fn filter(&self, kx: &[f64], ky: &[f64]) -> Plane {
        let (rx, ry) = ((kx.len() / 2) as isize, (ky.len() / 2) as isize);
        let mut tmp = vec![0.0; self.v.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                tmp[y * self.w + x] = kx
                    .iter()
                    .enumerate()
                    .map(|(i, k)| k * self.at(x as isize + i as isize - rx, y as isize))
                    .sum();
            }
        }
        let t = Plane {
            w: self.w,
            h: self.h,
            v: tmp,
        };
        let mut out = vec![0.0; self.v.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                out[y * self.w + x] = ky
                    .iter()
                    .enumerate()
                    .map(|(i, k)| k * t.at(x as isize, y as isize + i as isize - ry))
                    .sum();
            }
        }
        Plane {
            w: self.w,
            h: self.h,
            v: out,
        }
    }

    fn downsample(&self) -> Plane {
        const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let b = self.filter(&K, &K);
        let (w, h) = (self.w.div_ceil(2), self.h.div_ceil(2));
        let mut v = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                v.push(b.v[2 * y * self.w + 2 * x]);
            }
        }
        Plane { w, h, v }
    }

    /// Bilinear resampling with pixel centers aligned.
    fn resize(&self, w: usize, h: usize) -> Plane {
        if (w, h) == (self.w, self.h) {
            return self.clone();
        }
        let sx = self.w as f64 / w as f64;
        let sy = self.h as f64 / h as f64;
        let mut v = Vec::with_capacity(w * h);
        for y in 0..h {
            let fy = ((y as f64 + 0.5) * sy - 0.5).max(0.0);
            let y0 = fy.floor() as isize;
            let ty = fy - y0 as f64;
            for x in 0..w {
                let fx = ((x as f64 + 0.5) * sx - 0.5).max(0.0);
                let x0 = fx.floor() as isize;
                let tx = fx - x0 as f64;
                let top = self.at(x0, y0) * (1.0 - tx) + self.at(x0 + 1, y0) * tx;
                let bot = self.at(x0, y0 + 1) * (1.0 - tx) + self.at(x0 + 1, y0 + 1) * tx;
                v.push(top * (1.0 - ty) + bot * ty);
            }
        }
        Plane { w, h, v }
    }

    fn abs_diff(&self, other: &Plane) -> Plane {
        Plane {
            w: self.w,
            h: self.h,
            v: self
                .v
                .iter()
                .zip(&other.v)
                .map(|(a, b)| (a - b).abs())
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &Plane) {
        for (a, b) in self.v.iter_mut().zip(&other.v) {
            *a += b;
        }
    }
}

/// Responses below this are treated as numerically flat.
const FLAT: f64 = 1e-9;

/// Scales to `[0, 1]` and weights by `(1 - mean of other local maxima)^2`,
/// promoting maps with few strong peaks.
fn max_normalize(p: &Plane) -> Plane {
    let hi = p.v.iter().copied().fold(0.0, f64::max);
    if hi < FLAT {
        return Plane {
            w: p.w,
            h: p.h,
            v: vec![0.0; p.v.len()],
        };
    }
    let s: Vec<f64> = p.v.iter().map(|v| v / hi).collect();
    let q = Plane {
        w: p.w,
        h: p.h,
        v: s,
    };
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut global_seen = false;
    for y in 0..q.h as isize {
        for x in 0..q.w as isize {
            let c = q.at(x, y);
            if c <= 0.0 {
                continue;
            }
            let is_max = (-1..=1).all(|dy| {
                (-1..=1).all(|dx| {
                    let inside = (0..q.w as isize).contains(&(x + dx))
                        && (0..q.h as isize).contains(&(y + dy));
                    (dx == 0 && dy == 0) || !inside || q.at(x + dx, y + dy) < c
                })
            });
            if is_max {
                if c == 1.0 && !global_seen {
                    global_seen = true;
                } else {
                    sum += c;
                    n += 1;
                }
            }
        }
    }
    let mean = if n > 0 { sum / n as f64 } else { 0.0 };
    let k = (1.0 - mean).powi(2);
    Plane {
        w: q.w,
        h: q.h,
        v: q.v.iter().map(|v| v * k).collect(),
    }
}

fn pyramid(base: Plane, levels: usize) -> Vec<Plane> {
    let mut p = vec![base];
    while p.len() < levels {
        let next = p.last().expect("non-empty").downsample();
        p.push(next);
    }
    p
}

/// Center-surround maps, max-normalized and summed at `target` size.
fn conspicuity(pyr: &[Plane], cfg: &SaliencyConfig, target: (usize, usize)) -> Plane {
    let mut acc = Plane {
        w: target.0,
        h: target.1,
        v: vec![0.0; target.0 * target.1],
    };
    for c in 0..pyr.len() {
        let s = c + cfg.surround_offset;
        if s >= pyr.len() {
            break;
        }
        let surround = pyr[s].resize(pyr[c].w, pyr[c].h);
        let cs = pyr[c].abs_diff(&surround).resize(target.0, target.1);
        acc.add_assign(&max_normalize(&cs));
    }
    acc
}

fn luminance(px: &[f64]) -> f64 {
    if px.len() == 1 {
        px[0]
    } else {
        (px[0] + px[1] + px[2]) / 3.0
    }
}

/// Red-green and blue-yellow opponency, with hue normalized by intensity
/// where the pixel is bright enough to carry color.
fn opponency(img: &Image) -> (Plane, Plane) {
    let max_i = img.data.chunks(3).map(luminance).fold(0.0, f64::max);
    let floor = max_i / 10.0;
    let hue = |px: &[f64]| -> [f64; 3] {
        let i = luminance(px);
        if i > floor && i > 0.0 {
            [px[0] / i, px[1] / i, px[2] / i]
        } else {
            [0.0; 3]
        }
    };
    let rg = img.plane(|px| {
        let [r, g, b] = hue(px);
        let rr = (r - (g + b) / 2.0).max(0.0);
        let gg = (g - (r + b) / 2.0).max(0.0);
        rr - gg
    });
    let by = img.plane(|px| {
        let [r, g, b] = hue(px);
        let bb = (b - (r + g) / 2.0).max(0.0);
        let yy = ((r + g) / 2.0 - (r - g).abs() / 2.0 - b).max(0.0);
        bb - yy
    });
    (rg, by)
}

fn oriented(p: &Plane, n: usize) -> Vec<Plane> {
    const SMOOTH: [f64; 3] = [0.25, 0.5, 0.25];
    const DIFF: [f64; 3] = [-0.5, 0.0, 0.5];
    let gx = p.filter(&DIFF, &SMOOTH);
    let gy = p.filter(&SMOOTH, &DIFF);
    (0..n)
        .map(|k| {
            let theta = std::f64::consts::PI * k as f64 / n as f64;
            let (s, c) = theta.sin_cos();
            Plane {
                w: p.w,
                h: p.h,
                v: gx
                    .v
                    .iter()
                    .zip(&gy.v)
                    .map(|(x, y)| (c * x + s * y).abs())
                    .collect(),
            }
        })
        .collect()
}

/// Builds a saliency map. Gray mode drops the opponency channels and works
/// on luminance alone.
pub fn saliency_map(img: &Image, mode: SaliencyMode, cfg: &SaliencyConfig) -> Result<SaliencyMap> {
    if mode == SaliencyMode::Color && img.channels != 3 {
        return Err(Error::param("image", "color mode needs an RGB image"));
    }
    if cfg.levels < 2 || cfg.surround_offset == 0 || cfg.surround_offset >= cfg.levels {
        return Err(Error::param("levels", "need surround_offset in 1..levels"));
    }
    let (w, h) = (img.width as usize, img.height as usize);
    let target_level = cfg.levels.saturating_sub(1 + cfg.surround_offset).min(2);
    let intensity = img.plane(luminance);
    let i_pyr = pyramid(intensity, cfg.levels);
    let target = (i_pyr[target_level].w, i_pyr[target_level].h);

    let mut channels = Vec::new();
    if cfg.intensity {
        channels.push(conspicuity(&i_pyr, cfg, target));
    }
    if cfg.color && mode == SaliencyMode::Color {
        let (rg, by) = opponency(img);
        let mut c = conspicuity(&pyramid(rg, cfg.levels), cfg, target);
        c.add_assign(&conspicuity(&pyramid(by, cfg.levels), cfg, target));
        channels.push(c);
    }
    if cfg.orientation && cfg.orientations > 0 {
        let per_level: Vec<Vec<Plane>> = i_pyr
            .iter()
            .map(|p| oriented(p, cfg.orientations))
            .collect();
        let mut o = Plane {
            w: target.0,
            h: target.1,
            v: vec![0.0; target.0 * target.1],
        };
        for k in 0..cfg.orientations {
            let pyr: Vec<Plane> = per_level.iter().map(|l| l[k].clone()).collect();
            o.add_assign(&conspicuity(&pyr, cfg, target));
        }
        channels.push(o);
    }
    if channels.is_empty() {
        return Err(Error::param(
            "channels",
            "every feature channel is disabled",
        ));
    }
    let n = channels.len() as f64;
    let mut sum = Plane {
        w: target.0,
        h: target.1,
        v: vec![0.0; target.0 * target.1],
    };
    for c in &channels {
        sum.add_assign(&max_normalize(c));
    }
    sum.v.iter_mut().for_each(|v| *v /= n);
    let full = sum.resize(w, h);
    Ok(SaliencyMap::normalized(img.width, img.height, full.v))
}
