//! Shared fixtures for the criterion benches.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use egogaze::gaze::DEFAULT_DISPERSION_DEG;
use egogaze::scene::{ClassId, FrameSegmentation, InstanceMask, RleMask};
use egogaze::synth::{synth_corpus, DogPlan, SynthConfig};
use egogaze::{extract_fixations, CorpusSet, DogProfile, Fixation, FixationParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An ellipse covering a few percent of the frame.
pub fn blob(rng: &mut impl Rng, w: u32, h: u32) -> RleMask {
    let (fw, fh) = (f64::from(w), f64::from(h));
    let cx = rng.random_range(0.0..fw);
    let cy = rng.random_range(0.0..fh);
    RleMask::ellipse(
        w,
        h,
        cx,
        cy,
        rng.random_range(0.05..0.25) * fw,
        rng.random_range(0.05..0.25) * fh,
    )
}

/// A frame with `masks` overlapping ellipses of classes 1..=14.
pub fn frame(rng: &mut impl Rng, w: u32, h: u32, masks: usize) -> FrameSegmentation {
    let masks = (0..masks)
        .map(|i| {
            InstanceMask::new(
                i as u32,
                ClassId(rng.random_range(1..=14)),
                blob(rng, w, h),
                1.0,
            )
            .unwrap()
        })
        .collect();
    FrameSegmentation::new(0, 0.0, w, h, masks).unwrap()
}

/// A synthetic walk ready for attribution.
pub struct Walk {
    pub fixations: Vec<Fixation>,
    pub corpora: CorpusSet,
    pub profiles: BTreeMap<String, DogProfile>,
}

pub fn walk(seed: u64, dogs: usize, fixations_per_dog: usize) -> Walk {
    let cfg = SynthConfig {
        seed,
        dogs: (0..dogs)
            .map(|i| DogPlan {
                id: format!("d{i:02}"),
                accuracy_deg: 5.32,
            })
            .collect(),
        fixations_per_dog,
        ..SynthConfig::default()
    };
    let out = synth_corpus(&cfg).expect("valid synth config");
    let params = FixationParams::for_camera(&cfg.camera, DEFAULT_DISPERSION_DEG);
    let fixations = out
        .gaze
        .iter()
        .flat_map(|(dog, samples)| {
            extract_fixations(dog, samples, &params, &cfg.camera).expect("clean gaze")
        })
        .collect();
    let profiles = cfg
        .dogs
        .iter()
        .map(|d| {
            (
                d.id.clone(),
                DogProfile::new(d.id.clone(), d.accuracy_deg, &cfg.camera).expect("valid dog"),
            )
        })
        .collect();
    Walk {
        fixations,
        corpora: CorpusSet::new(out.corpora).expect("consistent corpora"),
        profiles,
    }
}
