use lowlight_core::metrics::{loe, loe_bruteforce, loe_sample_dims, DEFAULT_LOE_GRID};
use lowlight_core::{resize_nearest, Image, Raster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random image on the 8-bit grid so that ties occur.
fn random_pair(rng: &mut ChaCha8Rng, h: usize, w: usize) -> (Image, Image) {
    let c = if rng.random::<bool>() { 3 } else { 1 };
    let mut draw = || {
        Image::from_fn(h, w, c, |_, _, _| {
            rng.random_range(0..=255u8) as f64 / 255.0
        })
        .unwrap()
    };
    (draw(), draw())
}

/// Pairwise definition written out directly on lightness values.
fn oracle(a: &Image, b: &Image) -> f64 {
    let light = |img: &Image| -> Vec<f64> {
        (0..img.pixel_count())
            .map(|p| {
                img.pixel(p / img.width(), p % img.width())
                    .iter()
                    .copied()
                    .fold(0.0, f64::max)
            })
            .collect()
    };
    let (la, lb) = (light(a), light(b));
    let mut count = 0usize;
    for x in 0..la.len() {
        for y in 0..la.len() {
            if (la[x] >= la[y]) != (lb[x] >= lb[y]) {
                count += 1;
            }
        }
    }
    count as f64 / la.len() as f64
}

#[test]
fn fast_equals_bruteforce_on_small_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let (h, w) = (rng.random_range(1..=50), rng.random_range(1..=50));
        let (a, b) = random_pair(&mut rng, h, w);
        let fast = loe(&a, &b, DEFAULT_LOE_GRID).unwrap();
        assert_eq!(fast, loe_bruteforce(&a, &b).unwrap());
        assert_eq!(fast, oracle(&a, &b));
    }
}

#[test]
fn downsampled_path_matches_bruteforce_on_reduced_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let (h, w) = (rng.random_range(51..120), rng.random_range(51..120));
        let (a, b) = random_pair(&mut rng, h, w);
        let (sh, sw) = loe_sample_dims(h, w, DEFAULT_LOE_GRID);
        assert!(sh.min(sw) <= DEFAULT_LOE_GRID);
        let ra = resize_nearest(&a, sh, sw).unwrap();
        let rb = resize_nearest(&b, sh, sw).unwrap();
        assert_eq!(
            loe(&a, &b, DEFAULT_LOE_GRID).unwrap(),
            loe_bruteforce(&ra, &rb).unwrap()
        );
    }
}

#[test]
fn monotone_remaps_give_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (a, _) = random_pair(&mut rng, 37, 29);
        let remap = |f: &dyn Fn(f64) -> f64| {
            Image::from_fn(a.height(), a.width(), a.channels(), |r, c, ch| {
                f(a.at(r, c, ch))
            })
            .unwrap()
        };
        assert_eq!(loe(&a, &a, DEFAULT_LOE_GRID).unwrap(), 0.0);
        for gamma in [0.5, 2.0] {
            assert_eq!(
                loe(&a, &remap(&|v| v.powf(gamma)), DEFAULT_LOE_GRID).unwrap(),
                0.0
            );
        }
        assert_eq!(
            loe(&a, &remap(&|v| 0.2 + 0.5 * v), DEFAULT_LOE_GRID).unwrap(),
            0.0
        );
    }
}

#[test]
fn inverted_two_by_two_is_three() {
    let orig = Image::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let inv = Image::new(2, 2, 1, vec![0.9, 0.8, 0.7, 0.6]).unwrap();
    // each pixel disagrees with the three others: 12 pairs over 4 pixels
    assert_eq!(loe(&orig, &inv, DEFAULT_LOE_GRID).unwrap(), 3.0);
    assert_eq!(loe_bruteforce(&orig, &inv).unwrap(), 3.0);
}
