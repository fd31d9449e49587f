use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use lowlight_core::losses::{loss_report, EnLossWeights, FeatureMap, VanLossWeights};
use lowlight_core::metrics::{evaluate_batch, EvalItem, EvalOptions, Metric, NiqeModel};
use lowlight_core::superpixel::{self, region_summaries};
use lowlight_core::synthesis::{
    crop_pairs, synthesize_from_spec, synthesize_global_random, synthesize_local,
    synthesize_quadtree, write_sample, Level, ManifestEntry, Mode, SamplePair,
};
use lowlight_core::{
    boundary_overlay, read_pfm, read_png, rgb_to_lab, write_png, BitDepth, Image, Raster,
    SlicParams,
};

use crate::inputs::{collect_inputs, image_seed, InputFile};
use crate::{usage, CommonArgs, EvalArgs, FitNiqeArgs, LossesArgs, SlicArgs, SynthArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some inputs or records failed; the rest were processed.
    PartialFailure,
}

fn require_out(common: &CommonArgs) -> Result<&Path> {
    common
        .out
        .as_deref()
        .ok_or_else(|| usage("--out is required"))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()?)
}

/// SLIC runs in Lab space, so gray frames are replicated to three channels.
fn as_rgb(image: &Image) -> Image {
    if image.channels() == 3 {
        return image.clone();
    }
    Image::from_fn(image.height(), image.width(), 3, |r, c, _| {
        image.at(r, c, 0)
    })
    .expect("dimensions come from a valid image")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Writes manifest lines in input order while jobs finish in any order.
struct OrderedManifest {
    inner: Mutex<ManifestState>,
}

struct ManifestState {
    file: File,
    next: usize,
    pending: BTreeMap<usize, Vec<ManifestEntry>>,
}

impl OrderedManifest {
    fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(OrderedManifest {
            inner: Mutex::new(ManifestState {
                file,
                next: 0,
                pending: BTreeMap::new(),
            }),
        })
    }

    /// Records the entries of job `index` (empty for a failed job) and
    /// flushes every job that is now next in line.
    fn submit(&self, index: usize, entries: Vec<ManifestEntry>) -> Result<()> {
        let mut state = self.inner.lock().expect("manifest lock poisoned");
        state.pending.insert(index, entries);
        loop {
            let next = state.next;
            let Some(ready) = state.pending.remove(&next) else {
                break;
            };
            for entry in ready {
                let mut line = serde_json::to_vec(&entry)?;
                line.push(b'\n');
                state.file.write_all(&line)?;
            }
            state.file.flush()?;
            state.next += 1;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct SynthRun<'a> {
    seed: u64,
    mode: Mode,
    slic: Option<SlicParams>,
    max_depth: Option<u32>,
    split_prob: Option<f64>,
    level: Option<f64>,
    patch: Option<usize>,
    patches_per_image: usize,
    inputs: Vec<&'a str>,
}

fn synth_pairs(
    input: &InputFile,
    args: &SynthArgs,
    params: &SlicParams,
    level: Option<Level>,
) -> Result<Vec<(String, SamplePair)>> {
    let image = read_png(&input.path)?;
    let seed = image_seed(args.common.seed, &input.rel);
    let mut pair = match args.mode {
        Mode::Superpixel => {
            let labels = superpixel::slic(&as_rgb(&image), params)?;
            synthesize_local(&image, &labels, seed)?
        }
        Mode::Quadtree => synthesize_quadtree(&image, seed, args.max_depth, args.split_prob)?,
        Mode::Global => synthesize_global_random(&image, seed)?,
    };
    if let Some(level) = level {
        let spec = pair.spec.clone().with_uniform_level(level);
        pair = synthesize_from_spec(&image, &spec)?;
    }
    let id = input.sample_id();
    if args.patches_per_image == 0 {
        return Ok(vec![(id, pair)]);
    }
    let patches = crop_pairs(&pair, args.patch, args.patches_per_image, seed)?;
    Ok(patches
        .into_iter()
        .enumerate()
        .map(|(i, p)| (format!("{id}_p{i:02}"), p))
        .collect())
}

fn check_unique_ids(inputs: &[InputFile]) -> Result<()> {
    let mut seen: HashMap<String, &str> = HashMap::new();
    for f in inputs {
        if let Some(prev) = seen.insert(f.sample_id(), &f.rel) {
            return Err(usage(format!(
                "inputs `{prev}` and `{}` map to the same sample id `{}`",
                f.rel,
                f.sample_id()
            )));
        }
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<Outcome> {
    let out = require_out(&args.common)?;
    let params = args.slic.params();
    if !(0.0..=1.0).contains(&args.split_prob) {
        return Err(usage("--split-prob must be in [0, 1]"));
    }
    let level = args.level.map(Level::from_weight).transpose()?;
    let inputs = collect_inputs(&args.common.inputs).map_err(|e| usage(e.to_string()))?;
    check_unique_ids(&inputs)?;
    if inputs.is_empty() {
        warn!("no input images found");
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let run = SynthRun {
        seed: args.common.seed,
        mode: args.mode,
        slic: (args.mode == Mode::Superpixel).then_some(params),
        max_depth: (args.mode == Mode::Quadtree).then_some(args.max_depth),
        split_prob: (args.mode == Mode::Quadtree).then_some(args.split_prob),
        level: args.level,
        patch: (args.patches_per_image > 0).then_some(args.patch),
        patches_per_image: args.patches_per_image,
        inputs: inputs.iter().map(|f| f.rel.as_str()).collect(),
    };
    write_json(&out.join("run.json"), &run)?;

    let manifest = OrderedManifest::create(&out.join("manifest.jsonl"))?;
    let pool = thread_pool(args.common.workers)?;
    let failures: usize = pool.install(|| {
        inputs
            .par_iter()
            .enumerate()
            .map(|(index, input)| {
                let written = synth_pairs(input, args, &params, level).and_then(|pairs| {
                    pairs
                        .iter()
                        .map(|(id, pair)| Ok(write_sample(out, id, &input.rel, pair)?))
                        .collect::<Result<Vec<_>>>()
                });
                let (entries, failed) = match written {
                    Ok(entries) => (entries, 0),
                    Err(e) => {
                        warn!("skipping {}: {e:#}", input.path.display());
                        (Vec::new(), 1)
                    }
                };
                if let Err(e) = manifest.submit(index, entries) {
                    warn!("manifest write failed: {e:#}");
                    return 1;
                }
                failed
            })
            .sum()
    });
    info!(
        "synthesized {} of {} inputs into {}",
        inputs.len() - failures,
        inputs.len(),
        out.display()
    );
    Ok(if failures == 0 {
        Outcome::Success
    } else {
        Outcome::PartialFailure
    })
}

fn eval_items(args: &EvalArgs) -> Result<Vec<EvalItem>> {
    let mut items = Vec::new();
    match (&args.original, &args.enhanced) {
        (Some(orig), Some(enh)) => {
            let originals =
                collect_inputs(std::slice::from_ref(orig)).map_err(|e| usage(e.to_string()))?;
            let enhanced =
                collect_inputs(std::slice::from_ref(enh)).map_err(|e| usage(e.to_string()))?;
            let mut by_rel: BTreeMap<&str, &PathBuf> = originals
                .iter()
                .map(|f| (f.rel.as_str(), &f.path))
                .collect();
            for f in &enhanced {
                items.push(match by_rel.remove(f.rel.as_str()) {
                    Some(o) => EvalItem::Pair {
                        original: o.clone(),
                        enhanced: f.path.clone(),
                    },
                    None => EvalItem::Unmatched {
                        path: f.path.clone(),
                        reason: format!("no original named `{}`", f.rel),
                    },
                });
            }
            items.extend(by_rel.into_iter().map(|(rel, path)| EvalItem::Unmatched {
                path: path.clone(),
                reason: format!("no enhanced image named `{rel}`"),
            }));
        }
        (None, None) => {}
        _ => return Err(usage("--original and --enhanced must be given together")),
    }
    let singles = collect_inputs(&args.common.inputs).map_err(|e| usage(e.to_string()))?;
    items.extend(singles.into_iter().map(|f| EvalItem::Single(f.path)));
    Ok(items)
}

pub fn eval(args: &EvalArgs) -> Result<Outcome> {
    let metrics = if args.metrics.is_empty() {
        vec![Metric::Niqe]
    } else {
        args.metrics.clone()
    };
    let niqe_model = match &args.niqe_model {
        Some(p) => {
            NiqeModel::load(p).with_context(|| format!("loading NIQE model {}", p.display()))?
        }
        None => NiqeModel::bundled(),
    };
    let items = eval_items(args)?;
    if items.is_empty() {
        warn!("no images to evaluate");
    }
    let opts = EvalOptions {
        loe_grid: args.loe_grid,
        niqe_model,
    };
    let pool = thread_pool(args.common.workers)?;
    let report = pool.install(|| evaluate_batch(&items, &metrics, &opts));
    for r in report.records.iter().filter(|r| r.error.is_some()) {
        warn!(
            "{} [{}]: {}",
            r.path,
            r.metric,
            r.error.as_deref().unwrap_or_default()
        );
    }
    match &args.common.out {
        Some(out) => {
            std::fs::create_dir_all(out)?;
            write_json(&out.join("report.json"), &report)?;
            std::fs::write(out.join("report.csv"), report.to_csv())?;
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(if report.error_count() == 0 {
        Outcome::Success
    } else {
        Outcome::PartialFailure
    })
}

#[derive(Serialize)]
struct RegionFile {
    height: usize,
    width: usize,
    k_actual: usize,
    params: SlicParams,
    regions: Vec<lowlight_core::superpixel::RegionSummary>,
}

pub fn slic(args: &SlicArgs) -> Result<Outcome> {
    let out = require_out(&args.common)?;
    let inputs = collect_inputs(&args.common.inputs).map_err(|e| usage(e.to_string()))?;
    let [input] = inputs.as_slice() else {
        return Err(usage(format!(
            "slic takes exactly one image, found {}",
            inputs.len()
        )));
    };
    let image = read_png(&input.path)?;
    let rgb = as_rgb(&image);
    let params = args.slic.params();
    let labels = superpixel::slic(&rgb, &params)?;
    let regions = region_summaries(&labels, &rgb_to_lab(&rgb)?)?;
    let overlay = boundary_overlay(&image, &labels)?;

    std::fs::create_dir_all(out)?;
    let stem = input.sample_id();
    std::fs::write(out.join(format!("{stem}_labels.png")), labels.encode_png()?)?;
    write_png(
        &overlay,
        BitDepth::Eight,
        out.join(format!("{stem}_overlay.png")),
    )?;
    write_json(
        &out.join(format!("{stem}_regions.json")),
        &RegionFile {
            height: labels.height(),
            width: labels.width(),
            k_actual: labels.count(),
            params,
            regions,
        },
    )?;
    info!("{}: {} regions", input.rel, labels.count());
    Ok(Outcome::Success)
}

pub fn losses(args: &LossesArgs) -> Result<Outcome> {
    let [target, output] = args.common.inputs.as_slice() else {
        return Err(usage("losses takes exactly two --input images"));
    };
    let target = read_png(target).with_context(|| format!("reading {}", target.display()))?;
    let output = read_png(output).with_context(|| format!("reading {}", output.display()))?;
    let features = match (&args.features_a, &args.features_b) {
        (Some(a), Some(b)) => Some((
            FeatureMap::from(&read_pfm(a)?),
            FeatureMap::from(&read_pfm(b)?),
        )),
        (None, None) => None,
        _ => {
            return Err(usage(
                "--features-a and --features-b must be given together",
            ))
        }
    };
    let mut van = VanLossWeights::default();
    let mut en = EnLossWeights::default();
    van.attention = args.lambda_attention.unwrap_or(van.attention);
    van.perceptual = args.lambda_van_perceptual.unwrap_or(van.perceptual);
    en.reconstruction = args.lambda_reconstruction.unwrap_or(en.reconstruction);
    en.perceptual = args.lambda_en_perceptual.unwrap_or(en.perceptual);
    en.total_variation = args.lambda_tv.unwrap_or(en.total_variation);
    let report = loss_report(
        &output,
        &target,
        features.as_ref().map(|(a, b)| (a, b)),
        van,
        en,
    )?;
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(out) = &args.common.out {
        std::fs::create_dir_all(out)?;
        write_json(&out.join("losses.json"), &report)?;
    }
    Ok(Outcome::Success)
}

pub fn fit_niqe(args: &FitNiqeArgs) -> Result<Outcome> {
    let out = require_out(&args.common)?;
    let inputs = collect_inputs(&args.common.inputs).map_err(|e| usage(e.to_string()))?;
    if inputs.is_empty() {
        return Err(usage("fit-niqe needs at least one --input image"));
    }
    let pool = thread_pool(args.common.workers)?;
    let images = pool.install(|| {
        inputs
            .par_iter()
            .map(|f| read_png(&f.path).with_context(|| format!("reading {}", f.path.display())))
            .collect::<Result<Vec<_>>>()
    })?;
    let model = NiqeModel::fit(&images)?;
    let mut provenance: Vec<String> = args.note.clone();
    provenance.push(format!(
        "fitted from {} images: {}",
        inputs.len(),
        inputs
            .iter()
            .map(|f| f.rel.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    ));
    let lines: Vec<&str> = provenance.iter().map(String::as_str).collect();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, model.to_text(&lines))
        .with_context(|| format!("writing {}", out.display()))?;
    info!("wrote NIQE model to {}", out.display());
    Ok(Outcome::Success)
}
