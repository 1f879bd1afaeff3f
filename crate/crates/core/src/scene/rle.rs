//! Run-length encoded binary masks.
//!
//! Runs are row-major and alternate background/foreground, starting with a
//! background run that may be empty. Every run after the first is non-empty,
//! so each mask has exactly one encoding. All set algebra works directly on
//! the runs and returns exact pixel counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tight bounding box with inclusive pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn overlaps(&self, other: &BBox) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RleMask {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

impl RleMask {
    /// Builds a mask from raw runs, validating the total and collapsing
    /// empty interior runs into canonical form.
    pub fn from_runs(width: u32, height: u32, runs: &[u32]) -> Result<Self> {
        check_dims(width, height)?;
        let total: u64 = runs.iter().map(|&r| u64::from(r)).sum();
        let expected = u64::from(width) * u64::from(height);
        if total != expected {
            return Err(Error::Format(format!(
                "runs sum to {total}, expected {width}x{height} = {expected}"
            )));
        }
        let mut canon: Vec<u32> = Vec::with_capacity(runs.len());
        // set while an odd number of empty runs separates the next run from
        // the last pushed one, i.e. both carry the same pixel value
        let mut pending_zero = false;
        for (i, &r) in runs.iter().enumerate() {
            if i == 0 {
                canon.push(r);
                continue;
            }
            if r == 0 {
                // an empty run means the next run continues the previous one
                pending_zero = !pending_zero;
                continue;
            }
            if pending_zero {
                *canon.last_mut().expect("first run pushed") += r;
                pending_zero = false;
            } else {
                canon.push(r);
            }
        }
        Ok(RleMask {
            width,
            height,
            runs: canon,
        })
    }

    /// Encodes a row-major boolean grid.
    pub fn encode(width: u32, height: u32, bits: &[bool]) -> Result<Self> {
        check_dims(width, height)?;
        let n = width as usize * height as usize;
        if bits.len() != n {
            return Err(Error::Format(format!(
                "bitmap has {} pixels, expected {width}x{height} = {n}",
                bits.len()
            )));
        }
        let mut runs = Vec::new();
        let mut current = false;
        let mut count = 0u32;
        for &b in bits {
            if b != current {
                runs.push(count);
                count = 0;
                current = b;
            }
            count += 1;
        }
        runs.push(count);
        Ok(RleMask {
            width,
            height,
            runs,
        })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        RleMask {
            width,
            height,
            runs: vec![width * height],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        RleMask {
            width,
            height,
            runs: vec![0, width * height],
        }
    }

    /// Builds a mask from sorted, non-overlapping half-open pixel intervals
    /// over the row-major index space. Adjacent intervals are merged.
    pub fn from_intervals<I>(width: u32, height: u32, intervals: I) -> Self
    where
        I: IntoIterator<Item = (u64, u64)>,
    {
        let total = u64::from(width) * u64::from(height);
        let mut runs: Vec<u32> = Vec::new();
        let mut cursor = 0u64;
        for (start, end) in intervals {
            debug_assert!(start >= cursor && end <= total);
            if end <= start {
                continue;
            }
            if start == cursor && !runs.is_empty() {
                // touches the previous foreground run
                *runs.last_mut().unwrap() += (end - start) as u32;
            } else {
                runs.push((start - cursor) as u32);
                runs.push((end - start) as u32);
            }
            cursor = end;
        }
        if cursor < total || runs.is_empty() {
            runs.push((total - cursor) as u32);
        }
        RleMask {
            width,
            height,
            runs,
        }
    }

    /// Axis-aligned rectangle with inclusive corners, clipped to the frame.
    pub fn rect(width: u32, height: u32, x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        let cx0 = x0.max(0);
        let cy0 = y0.max(0);
        let cx1 = x1.min(i64::from(width) - 1);
        let cy1 = y1.min(i64::from(height) - 1);
        if cx0 > cx1 || cy0 > cy1 {
            return RleMask::empty(width, height);
        }
        let w = u64::from(width);
        RleMask::from_intervals(
            width,
            height,
            (cy0..=cy1).map(|y| {
                let row = y as u64 * w;
                (row + cx0 as u64, row + cx1 as u64 + 1)
            }),
        )
    }

    /// Axis-aligned ellipse: pixel `(x, y)` is inside when
    /// `((x-cx)/rx)^2 + ((y-cy)/ry)^2 <= 1`. Clipped to the frame.
    pub fn ellipse(width: u32, height: u32, cx: f64, cy: f64, rx: f64, ry: f64) -> Self {
        if !(rx > 0.0 && ry > 0.0) {
            return RleMask::empty(width, height);
        }
        let w = u64::from(width);
        let y_lo = (cy - ry).ceil().max(0.0) as i64;
        let y_hi = (cy + ry).floor().min(f64::from(height) - 1.0) as i64;
        let mut spans = Vec::new();
        for y in y_lo..=y_hi {
            let dy = (y as f64 - cy) / ry;
            let t = 1.0 - dy * dy;
            if t < 0.0 {
                continue;
            }
            let half = rx * t.sqrt();
            let x_lo = (cx - half).ceil().max(0.0) as i64;
            let x_hi = (cx + half).floor().min(f64::from(width) - 1.0) as i64;
            if x_lo > x_hi {
                continue;
            }
            let row = y as u64 * w;
            spans.push((row + x_lo as u64, row + x_hi as u64 + 1));
        }
        RleMask::from_intervals(width, height, spans)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    pub fn pixel_count(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }

    pub fn decode(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.pixel_count() as usize);
        let mut value = false;
        for &r in &self.runs {
            out.extend(std::iter::repeat_n(value, r as usize));
            value = !value;
        }
        out
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.runs
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&r| u64::from(r))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.len() < 2
    }

    /// Foreground intervals `[start, end)` in row-major pixel index space.
    pub fn intervals(&self) -> Intervals<'_> {
        Intervals {
            runs: &self.runs,
            idx: 0,
            pos: 0,
        }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        let p = u64::from(y) * u64::from(self.width) + u64::from(x);
        self.intervals()
            .take_while(|&(s, _)| s <= p)
            .any(|(s, e)| p >= s && p < e)
    }

    pub fn bbox(&self) -> Option<BBox> {
        let w = u64::from(self.width);
        let mut bbox: Option<BBox> = None;
        for (s, e) in self.intervals() {
            let (ys, ye) = ((s / w) as u32, ((e - 1) / w) as u32);
            let (xs, xe) = if ys == ye {
                ((s % w) as u32, ((e - 1) % w) as u32)
            } else {
                (0, self.width - 1)
            };
            bbox = Some(match bbox {
                None => BBox {
                    x0: xs,
                    y0: ys,
                    x1: xe,
                    y1: ye,
                },
                Some(b) => BBox {
                    x0: b.x0.min(xs),
                    y0: b.y0.min(ys),
                    x1: b.x1.max(xe),
                    y1: b.y1.max(ye),
                },
            });
        }
        bbox
    }

    fn check_same_dims(&self, other: &RleMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }

    /// Exact number of pixels set in both masks.
    pub fn intersect_count(&self, other: &RleMask) -> Result<u64> {
        self.check_same_dims(other)?;
        Ok(intersect_intervals(self.intervals(), other.intervals()))
    }

    pub fn union_count(&self, other: &RleMask) -> Result<u64> {
        let inter = self.intersect_count(other)?;
        Ok(self.area() + other.area() - inter)
    }

    /// Intersection-over-union; two empty masks have IoU 0.
    pub fn iou(&self, other: &RleMask) -> Result<f64> {
        let inter = self.intersect_count(other)?;
        let union = self.area() + other.area() - inter;
        Ok(if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        })
    }

    pub fn intersection(&self, other: &RleMask) -> Result<RleMask> {
        self.check_same_dims(other)?;
        let mut out = Vec::new();
        let mut a = self.intervals().peekable();
        let mut b = other.intervals().peekable();
        while let (Some(&(s1, e1)), Some(&(s2, e2))) = (a.peek(), b.peek()) {
            let lo = s1.max(s2);
            let hi = e1.min(e2);
            if lo < hi {
                out.push((lo, hi));
            }
            if e1 <= e2 {
                a.next();
            } else {
                b.next();
            }
        }
        Ok(RleMask::from_intervals(self.width, self.height, out))
    }

    pub fn union(&self, other: &RleMask) -> Result<RleMask> {
        self.check_same_dims(other)?;
        let merged = merge_sorted(self.intervals(), other.intervals());
        Ok(RleMask::from_intervals(
            self.width,
            self.height,
            coalesce(merged),
        ))
    }

    /// Pixels of `self` not set in `other`.
    pub fn difference(&self, other: &RleMask) -> Result<RleMask> {
        self.check_same_dims(other)?;
        let mut out = Vec::new();
        let mut b = other.intervals().peekable();
        for (s, e) in self.intervals() {
            let mut start = s;
            while let Some(&(bs, be)) = b.peek() {
                if be <= start {
                    b.next();
                    continue;
                }
                if bs >= e {
                    break;
                }
                if bs > start {
                    out.push((start, bs));
                }
                start = be.max(start);
                if be >= e {
                    break;
                }
                b.next();
            }
            if start < e {
                out.push((start, e));
            }
        }
        Ok(RleMask::from_intervals(self.width, self.height, out))
    }

    /// Union of many masks sharing `dims`; an empty iterator yields an empty mask.
    pub fn union_all<'a, I>(width: u32, height: u32, masks: I) -> Result<RleMask>
    where
        I: IntoIterator<Item = &'a RleMask>,
    {
        let mut spans: Vec<(u64, u64)> = Vec::new();
        for m in masks {
            if m.dims() != (width, height) {
                return Err(Error::DimensionMismatch {
                    expected: (width, height),
                    found: m.dims(),
                });
            }
            spans.extend(m.intervals());
        }
        spans.sort_unstable();
        Ok(RleMask::from_intervals(width, height, coalesce(spans)))
    }

    /// Keeps the centred `fraction` of every foreground row segment.
    pub fn shrink_rows(&self, fraction: f64) -> RleMask {
        let w = u64::from(self.width);
        let fraction = fraction.clamp(0.0, 1.0);
        let mut out = Vec::new();
        for (s, e) in self.intervals() {
            let mut start = s;
            while start < e {
                let row_end = ((start / w) + 1) * w;
                let end = e.min(row_end);
                let len = end - start;
                let keep = (len as f64 * fraction).round() as u64;
                let trim = (len - keep) / 2;
                if keep > 0 {
                    out.push((start + trim, start + trim + keep));
                }
                start = end;
            }
        }
        RleMask::from_intervals(self.width, self.height, out)
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Format(format!(
            "mask dimensions must be positive, got {width}x{height}"
        )));
    }
    if u64::from(width) * u64::from(height) > u64::from(u32::MAX) {
        return Err(Error::Format(format!("mask {width}x{height} is too large")));
    }
    Ok(())
}

pub struct Intervals<'a> {
    runs: &'a [u32],
    idx: usize,
    pos: u64,
}

impl Iterator for Intervals<'_> {
    type Item = (u64, u64);

    fn next(&mut self) -> Option<(u64, u64)> {
        while self.idx < self.runs.len() {
            let r = u64::from(self.runs[self.idx]);
            let start = self.pos;
            self.pos += r;
            let fg = self.idx % 2 == 1;
            self.idx += 1;
            if fg && r > 0 {
                return Some((start, self.pos));
            }
        }
        None
    }
}

fn intersect_intervals<A, B>(a: A, b: B) -> u64
where
    A: Iterator<Item = (u64, u64)>,
    B: Iterator<Item = (u64, u64)>,
{
    let mut a = a.peekable();
    let mut b = b.peekable();
    let mut total = 0u64;
    while let (Some(&(s1, e1)), Some(&(s2, e2))) = (a.peek(), b.peek()) {
        let lo = s1.max(s2);
        let hi = e1.min(e2);
        if lo < hi {
            total += hi - lo;
        }
        if e1 <= e2 {
            a.next();
        } else {
            b.next();
        }
    }
    total
}

fn merge_sorted<A, B>(a: A, b: B) -> Vec<(u64, u64)>
where
    A: Iterator<Item = (u64, u64)>,
    B: Iterator<Item = (u64, u64)>,
{
    let mut out: Vec<(u64, u64)> = a.chain(b).collect();
    out.sort_unstable();
    out
}

/// Merges overlapping or touching intervals of a sorted list.
fn coalesce(sorted: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(sorted.len());
    for (s, e) in sorted {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Rasterizes a closed disk: pixel `(i, j)` is set iff
/// `(i - cx)^2 + (j - cy)^2 <= radius^2`, clipped to the frame.
pub fn rasterize_disk(center: (i64, i64), radius: u32, width: u32, height: u32) -> RleMask {
    let (cx, cy) = center;
    let r = i64::from(radius);
    let r2 = r * r;
    let w = i64::from(width);
    let h = i64::from(height);
    let mut spans = Vec::new();
    for y in (cy - r).max(0)..=(cy + r).min(h - 1) {
        let dy = y - cy;
        let dx = isqrt(r2 - dy * dy);
        let x_lo = (cx - dx).max(0);
        let x_hi = (cx + dx).min(w - 1);
        if x_lo > x_hi {
            continue;
        }
        let row = (y * w) as u64;
        spans.push((row + x_lo as u64, row + x_hi as u64 + 1));
    }
    RleMask::from_intervals(width, height, spans)
}

/// Largest integer `s` with `s * s <= n`.
fn isqrt(n: i64) -> i64 {
    if n <= 0 {
        return 0;
    }
    let mut s = (n as f64).sqrt() as i64;
    while s * s > n {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= n {
        s += 1;
    }
    s
}
