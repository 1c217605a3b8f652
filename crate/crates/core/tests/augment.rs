use image::{Rgb, RgbImage};
use proptest::prelude::*;
use pyrosort::augment::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(w: u32, h: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_fn(w, h, |_, _| Rgb([rng.random(), rng.random(), rng.random()]))
}

fn flips(h: bool, v: bool) -> AugmentationParams {
    AugmentationParams {
        h_flip: h,
        v_flip: v,
        ..AugmentationParams::identity()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sampled_params_keep_shape(seed in any::<u64>(), w in 1u32..48, h in 1u32..48) {
        let policy = AugmentationPolicy::default();
        let img = noise(w, h, seed);
        let params = policy.sample_params(&mut ChaCha8Rng::seed_from_u64(seed));
        let out = apply_augmentation(&img, &params, &policy).unwrap();
        prop_assert_eq!(out.dimensions(), (w, h));
    }

    #[test]
    fn flips_are_involutions(seed in any::<u64>(), w in 1u32..40, h in 1u32..40, hf in any::<bool>(), vf in any::<bool>()) {
        let policy = AugmentationPolicy::default();
        let img = noise(w, h, seed);
        let once = apply_augmentation(&img, &flips(hf, vf), &policy).unwrap();
        let twice = apply_augmentation(&once, &flips(hf, vf), &policy).unwrap();
        prop_assert_eq!(twice, img);
    }

    #[test]
    fn channel_shift_is_clamped_addition(seed in any::<u64>(), s in proptest::array::uniform3(-10.0f64..=10.0)) {
        let policy = AugmentationPolicy::default();
        let img = noise(16, 16, seed);
        let p = AugmentationParams { channel_shift: s, ..AugmentationParams::identity() };
        let out = apply_augmentation(&img, &p, &policy).unwrap();
        for (a, b) in img.pixels().zip(out.pixels()) {
            for c in 0..3 {
                prop_assert_eq!(b[c], (a[c] as f64 + s[c]).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
}

#[test]
fn identity_is_exact() {
    let img = noise(37, 23, 5);
    for policy in [AugmentationPolicy::default(), AugmentationPolicy::disabled()] {
        assert_eq!(apply_augmentation(&img, &AugmentationParams::identity(), &policy).unwrap(), img);
    }
}

#[test]
fn quarter_turn_matches_pixel_rotation() {
    let policy = AugmentationPolicy {
        rotation_deg: 90.0,
        ..AugmentationPolicy::default()
    };
    let img = noise(31, 31, 8);
    let p = AugmentationParams {
        rotation: 90.0,
        ..AugmentationParams::identity()
    };
    let out = apply_augmentation(&img, &p, &policy).unwrap();
    assert_eq!(out, image::imageops::rotate90(&img));
}

#[test]
fn disabled_policy_samples_identity() {
    let policy = AugmentationPolicy::disabled();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        assert_eq!(policy.sample_params(&mut rng), AugmentationParams::identity());
    }
}

#[test]
fn params_outside_policy_are_refused() {
    let policy = AugmentationPolicy::default();
    let img = noise(8, 8, 1);
    let bad = [
        AugmentationParams { rotation: 50.0, ..AugmentationParams::identity() },
        AugmentationParams { zoom: 1.5, ..AugmentationParams::identity() },
        AugmentationParams { channel_shift: [0.0, 11.0, 0.0], ..AugmentationParams::identity() },
    ];
    for p in bad {
        assert!(matches!(apply_augmentation(&img, &p, &policy), Err(pyrosort::Error::Argument(_))));
    }
}
