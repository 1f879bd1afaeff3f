#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use egogaze::scene::{ClassId, FrameSegmentation, InstanceMask, RleMask};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A rectangle, ellipse or speckle mask; shapes may leave the frame.
pub fn random_mask(rng: &mut impl Rng, w: u32, h: u32) -> RleMask {
    match rng.random_range(0..4) {
        0 => {
            let x0 = rng.random_range(-20..w as i64);
            let y0 = rng.random_range(-20..h as i64);
            let x1 = x0 + rng.random_range(0..w as i64 / 2 + 2);
            let y1 = y0 + rng.random_range(0..h as i64 / 2 + 2);
            RleMask::rect(w, h, x0, y0, x1, y1)
        }
        1 | 2 => {
            let cx = rng.random_range(-10.0..w as f64 + 10.0);
            let cy = rng.random_range(-10.0..h as f64 + 10.0);
            let rx = rng.random_range(0.5..w as f64 / 2.0 + 1.0);
            let ry = rng.random_range(0.5..h as f64 / 2.0 + 1.0);
            RleMask::ellipse(w, h, cx, cy, rx, ry)
        }
        _ => {
            let p = rng.random_range(0.0..0.6);
            let bits: Vec<bool> = (0..w * h).map(|_| rng.random_bool(p)).collect();
            RleMask::encode(w, h, &bits).unwrap()
        }
    }
}

/// Up to `max_masks` overlapping instances of random classes.
pub fn random_frame(
    rng: &mut impl Rng,
    index: u64,
    w: u32,
    h: u32,
    max_masks: usize,
    classes: u16,
) -> FrameSegmentation {
    let n = rng.random_range(0..=max_masks);
    let masks = (0..n)
        .map(|i| {
            let class = ClassId(rng.random_range(1..=classes));
            let conf = rng.random_range(0.0..=1.0);
            InstanceMask::new(i as u32, class, random_mask(rng, w, h), conf).unwrap()
        })
        .collect();
    FrameSegmentation::new(index, index as f64 * 33.0, w, h, masks).unwrap()
}
