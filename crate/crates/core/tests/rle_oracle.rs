mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{random_mask, rng};
use egogaze::scene::{rasterize_disk, RleMask};

fn popcount(bits: &[bool]) -> u64 {
    bits.iter().filter(|&&b| b).count() as u64
}

fn zip_bits(a: &[bool], b: &[bool], f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

#[test]
fn algebra_matches_bitmaps_on_ten_thousand_cases() {
    let mut r = rng(0x5eed);
    for case in 0..10_000 {
        let w = r.random_range(1..=48);
        let h = r.random_range(1..=48);
        let a = random_mask(&mut r, w, h);
        let b = random_mask(&mut r, w, h);
        let (ba, bb) = (a.decode(), b.decode());
        let and = zip_bits(&ba, &bb, |x, y| x && y);
        let or = zip_bits(&ba, &bb, |x, y| x || y);
        let minus = zip_bits(&ba, &bb, |x, y| x && !y);

        assert_eq!(a.area(), popcount(&ba), "case {case}: area");
        assert_eq!(
            a.intersect_count(&b).unwrap(),
            popcount(&and),
            "case {case}: intersect"
        );
        assert_eq!(
            a.union_count(&b).unwrap(),
            popcount(&or),
            "case {case}: union"
        );
        assert_eq!(
            a.intersection(&b).unwrap().decode(),
            and,
            "case {case}: intersection"
        );
        assert_eq!(a.union(&b).unwrap().decode(), or, "case {case}: union mask");
        assert_eq!(
            a.difference(&b).unwrap().decode(),
            minus,
            "case {case}: difference"
        );
        assert_eq!(
            RleMask::encode(w, h, &ba).unwrap(),
            a,
            "case {case}: round trip"
        );

        // coverage of a disk region by the mask
        let cx = r.random_range(-5..w as i64 + 5);
        let cy = r.random_range(-5..h as i64 + 5);
        let rad = r.random_range(0..20);
        let disk = rasterize_disk((cx, cy), rad, w, h);
        let bd = disk.decode();
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let inside = (x - cx).pow(2) + (y - cy).pow(2) <= i64::from(rad).pow(2);
                assert_eq!(
                    bd[(y * w as i64 + x) as usize],
                    inside,
                    "case {case}: disk pixel ({x}, {y})"
                );
            }
        }
        let covered = popcount(&zip_bits(&ba, &bd, |x, y| x && y));
        assert_eq!(
            a.intersect_count(&disk).unwrap(),
            covered,
            "case {case}: coverage"
        );
    }
}

#[test]
fn iou_matches_bitmap_ratio() {
    let mut r = rng(17);
    for _ in 0..500 {
        let (w, h) = (r.random_range(1..=32), r.random_range(1..=32));
        let a = random_mask(&mut r, w, h);
        let b = random_mask(&mut r, w, h);
        let (ba, bb) = (a.decode(), b.decode());
        let i = popcount(&zip_bits(&ba, &bb, |x, y| x && y));
        let u = popcount(&zip_bits(&ba, &bb, |x, y| x || y));
        let want = if u == 0 { 0.0 } else { i as f64 / u as f64 };
        let got = a.iou(&b).unwrap();
        assert!(
            (got - want).abs() < 1e-15 || (u == 0 && got.is_finite()),
            "{got} vs {want}"
        );
    }
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let a = RleMask::full(4, 4);
    let b = RleMask::full(4, 5);
    assert!(a.intersect_count(&b).is_err());
    assert!(a.union(&b).is_err());
    assert!(a.difference(&b).is_err());
}

fn mask_strategy() -> impl Strategy<Value = (RleMask, RleMask, RleMask)> {
    (1u32..24, 1u32..24, any::<u64>()).prop_map(|(w, h, seed)| {
        let mut r = rng(seed);
        (
            random_mask(&mut r, w, h),
            random_mask(&mut r, w, h),
            random_mask(&mut r, w, h),
        )
    })
}

proptest! {
    #[test]
    fn inclusion_exclusion((a, b, _) in mask_strategy()) {
        let i = a.intersect_count(&b).unwrap();
        let u = a.union_count(&b).unwrap();
        prop_assert_eq!(i + u, a.area() + b.area());
        prop_assert_eq!(i, b.intersect_count(&a).unwrap());
    }

    #[test]
    fn difference_and_intersection_partition((a, b, _) in mask_strategy()) {
        let d = a.difference(&b).unwrap();
        let i = a.intersection(&b).unwrap();
        prop_assert_eq!(d.intersect_count(&i).unwrap(), 0);
        prop_assert_eq!(d.union(&i).unwrap(), a);
    }

    #[test]
    fn union_all_is_associative((a, b, c) in mask_strategy()) {
        let (w, h) = a.dims();
        let all = RleMask::union_all(w, h, [&a, &b, &c]).unwrap();
        prop_assert_eq!(&all, &a.union(&b).unwrap().union(&c).unwrap());
        prop_assert_eq!(&all, &c.union(&a).unwrap().union(&b).unwrap());
    }

    #[test]
    fn shrink_rows_never_grows((a, _, _) in mask_strategy(), keep in 0.0f64..=1.0) {
        let s = a.shrink_rows(keep);
        prop_assert_eq!(s.difference(&a).unwrap().area(), 0);
        prop_assert!(s.area() <= a.area());
        prop_assert_eq!(a.shrink_rows(1.0), a);
    }
}
