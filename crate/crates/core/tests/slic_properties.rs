use std::collections::VecDeque;

use lowlight_core::{boundary_overlay, slic, Image, Raster, SlicParams, SuperpixelLabels};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Flood fill from the first pixel of each label; every pixel with that label
/// must be reached through 4-neighbours of the same label.
fn four_connected(labels: &SuperpixelLabels) -> bool {
    let (h, w) = (labels.height(), labels.width());
    let ids = labels.labels();
    let mut seen = vec![false; h * w];
    let mut started = vec![false; labels.count()];
    for start in 0..h * w {
        if seen[start] {
            continue;
        }
        let id = ids[start];
        if started[id as usize] {
            return false;
        }
        started[id as usize] = true;
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(p) = queue.pop_front() {
            let (r, c) = (p / w, p % w);
            let mut push = |q: usize| {
                if !seen[q] && ids[q] == id {
                    seen[q] = true;
                    queue.push_back(q);
                }
            };
            if r > 0 {
                push(p - w);
            }
            if r + 1 < h {
                push(p + w);
            }
            if c > 0 {
                push(p - 1);
            }
            if c + 1 < w {
                push(p + 1);
            }
        }
    }
    true
}

fn is_dense_partition(labels: &SuperpixelLabels) -> bool {
    let sizes = labels.region_sizes();
    sizes.len() == labels.count()
        && sizes.iter().all(|&s| s > 0)
        && sizes.iter().sum::<usize>() == labels.height() * labels.width()
        && labels
            .labels()
            .iter()
            .all(|&l| (l as usize) < labels.count())
}

/// Random piecewise-constant colour blocks with per-pixel jitter.
fn blocky(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Image {
    let block = rng.random_range(4..16);
    let cols = w.div_ceil(block);
    let palette: Vec<[f64; 3]> = (0..h.div_ceil(block) * cols)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    let jitter: Vec<f64> = (0..h * w * 3)
        .map(|_| rng.random_range(-0.05..0.05))
        .collect();
    Image::from_fn(h, w, 3, |r, c, ch| {
        palette[(r / block) * cols + c / block][ch] + jitter[(r * w + c) * 3 + ch]
    })
    .unwrap()
}

#[test]
fn two_halves_split_exactly() {
    let img = Image::from_fn(64, 64, 3, |_, c, _| if c < 32 { 0.0 } else { 1.0 }).unwrap();
    let params = SlicParams {
        k: 2,
        ..SlicParams::default()
    };
    let labels = slic(&img, &params).unwrap();
    assert_eq!(labels.count(), 2);
    for r in 0..64 {
        for c in 0..64 {
            assert_eq!(labels.label(r, c), u32::from(c >= 32), "pixel ({r}, {c})");
        }
    }
    let overlay = boundary_overlay(&img, &labels).unwrap();
    let marked = (0..64 * 64)
        .filter(|&p| overlay.pixel(p / 64, p % 64) != img.pixel(p / 64, p % 64))
        .count();
    assert!(marked <= 2 * 64, "{marked} marked pixels");
}

#[test]
fn constant_image_regions_near_target_size() {
    let img = Image::filled(60, 60, 3, 0.4).unwrap();
    let labels = slic(
        &img,
        &SlicParams {
            k: 9,
            ..SlicParams::default()
        },
    )
    .unwrap();
    assert_eq!(labels.count(), 9);
    for size in labels.region_sizes() {
        assert!((320..=480).contains(&size), "region of {size} pixels");
    }
}

#[test]
fn huge_compactness_gives_grid_partition() {
    // 90x60 with k=6 seeds a 3x2 grid of 30x30 cells; with no colour signal
    // every pixel joins the nearest cell centre
    let img = Image::filled(90, 60, 3, 0.7).unwrap();
    let params = SlicParams {
        k: 6,
        compactness: 1e6,
        ..SlicParams::default()
    };
    let labels = slic(&img, &params).unwrap();
    for r in 0..90 {
        for c in 0..60 {
            assert_eq!(labels.label(r, c) as usize, (r / 30) * 2 + c / 30);
        }
    }
}

#[test]
fn fifty_random_images_are_connected_partitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..50 {
        let (h, w) = (rng.random_range(24..72), rng.random_range(24..72));
        let img = blocky(h, w, &mut rng);
        let params = SlicParams {
            k: rng.random_range(1..80),
            compactness: rng.random_range(1.0..40.0),
            max_iters: rng.random_range(1..12),
            min_region_frac: rng.random_range(0.05..1.0),
        };
        let labels = slic(&img, &params).unwrap();
        assert!(is_dense_partition(&labels), "image {i}: {params:?}");
        assert!(four_connected(&labels), "image {i}: {params:?}");
        assert!(labels.regions_are_connected());
    }
}

#[test]
fn independent_of_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let img = blocky(120, 160, &mut rng);
    let params = SlicParams {
        k: 64,
        ..SlicParams::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| slic(&img, &params).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, slic(&img, &params).unwrap());
}

#[test]
fn label_png_limit() {
    let many = SuperpixelLabels::from_raw(1, 65_536, (0..65_536).collect()).unwrap();
    assert!(many.encode_png().is_err());
    let fits = SuperpixelLabels::from_raw(1, 65_535, (0..65_535).collect()).unwrap();
    assert!(fits.encode_png().is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_and_connectivity(
        seed in any::<u64>(),
        h in 8usize..40,
        w in 8usize..40,
        k in 1usize..50,
        m in 0.5f64..50.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = blocky(h, w, &mut rng);
        let k = k.min(h * w);
        let labels = slic(&img, &SlicParams { k, compactness: m, ..SlicParams::default() }).unwrap();
        prop_assert_eq!((labels.height(), labels.width()), (h, w));
        prop_assert!(is_dense_partition(&labels));
        prop_assert!(four_connected(&labels));
        prop_assert_eq!(&labels, &slic(&img, &SlicParams { k, compactness: m, ..SlicParams::default() }).unwrap());
    }
}
