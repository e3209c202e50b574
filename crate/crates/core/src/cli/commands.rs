use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{EngineConfig, UPSAMPLE_FACTOR};
use crate::dataio::{
    load_weights, read_disparity, read_image_png, write_disp_png16, write_image_png, write_pfm, WeightBundle,
};
use crate::depth::{absent_depth, load_external_depth_file, perturb_depth, PerturbSpec, Rect, Region};
use crate::error::Error;
use crate::eval::{analyze_depth, compute_metrics, masked_epe};
use crate::mask::Mask;
use crate::model::seeded_weights;
use crate::scene::{quarter_res_truth, synth_scene, Layer, SceneSpec};
use crate::tensor::Tensor;
use crate::updater::{run_inference, Mode};

use super::manifest::path_string;
use super::{
    CliError, DepthAnalyzeArgs, EvalArgs, InferArgs, InputPaths, IterationRecord, OutputFormat, OutputStage,
    ReplayArgs, RunManifest, Stage, SynthArgs, WeightSource,
};

const MANIFEST_FILE: &str = "manifest.json";

struct PairJob {
    left: PathBuf,
    right: PathBuf,
    depth: Option<PathBuf>,
    gt: Option<PathBuf>,
    out: PathBuf,
}

struct RunSettings<'a> {
    cfg: &'a EngineConfig,
    mode: Mode,
    weights: &'a WeightBundle,
    source: &'a WeightSource,
    format: OutputFormat,
    save_iters: bool,
}

fn read_file(path: &Path, what: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::bad_input(format!("cannot read {what} `{}`: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).output(|| format!("writing `{}`", path.display()))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).output(|| format!("creating output directory `{}`", path.display()))
}

fn read_image(path: &Path, what: &str) -> Result<Tensor, CliError> {
    read_image_png(&read_file(path, what)?).stage(|| format!("decoding {what} `{}`", path.display()))
}

fn read_disp(path: &Path, what: &str) -> Result<(Tensor, Mask), CliError> {
    read_disparity(&read_file(path, what)?).stage(|| format!("decoding {what} `{}`", path.display()))
}

fn weight_source(
    mode: Mode,
    weights: Option<&Path>,
    seed: u64,
    cfg: &EngineConfig,
) -> Result<(WeightBundle, WeightSource), CliError> {
    match (mode, weights) {
        (Mode::Oracle, _) => Ok((WeightBundle::new(None), WeightSource::Unused)),
        (Mode::Learned, Some(path)) => {
            let bundle = load_weights(&read_file(path, "weights")?)
                .stage(|| format!("decoding weights `{}`", path.display()))?;
            Ok((
                bundle,
                WeightSource::File {
                    path: path_string(path),
                },
            ))
        }
        (Mode::Learned, None) => Ok((seeded_weights(cfg, seed), WeightSource::Seed { seed })),
    }
}

fn mean(t: &Tensor) -> f64 {
    t.data().iter().sum::<f64>() / t.len() as f64
}

/// Runs one pair, writes its outputs and manifest, and returns the manifest
/// with the per-iteration log lines.
fn run_pair(job: &PairJob, s: &RunSettings<'_>) -> Result<(RunManifest, Vec<String>), CliError> {
    let left = read_image(&job.left, "left image")?;
    let right = read_image(&job.right, "right image")?;
    let (_, h, w) = left.dims3().stage(|| "left image".to_string())?;
    let depth = match &job.depth {
        Some(p) => load_external_depth_file(p, (h, w)).stage(|| format!("loading depth `{}`", p.display()))?,
        None => absent_depth(h / UPSAMPLE_FACTOR, w / UPSAMPLE_FACTOR),
    };
    let gt = match &job.gt {
        Some(p) => Some(read_disp(p, "ground truth")?),
        None => None,
    };

    let out = run_inference(&left, &right, &depth, s.weights, s.cfg, s.mode).stage(|| "inference".to_string())?;

    create_dir(&job.out)?;
    let mut outputs = Vec::new();
    let final_map = out
        .final_full_res()
        .ok_or_else(|| CliError::bad_input("inference: zero iterations requested"))?;
    let mut emit = |name: String, bytes: Vec<u8>| -> Result<(), CliError> {
        write_file(&job.out.join(&name), &bytes)?;
        outputs.push(name);
        Ok(())
    };
    if s.format.pfm() {
        emit(
            "disparity.pfm".into(),
            write_pfm(final_map, None).output(|| "encoding PFM".into())?,
        )?;
    }
    if s.format.png16() {
        emit(
            "disparity.png".into(),
            write_disp_png16(final_map, None).output(|| "encoding PNG".into())?,
        )?;
    }
    if s.save_iters {
        create_dir(&job.out.join("iters"))?;
        for (n, map) in out.full_res.iter().enumerate() {
            emit(
                format!("iters/iter_{:02}.pfm", n + 1),
                write_pfm(map, None).output(|| "encoding PFM".into())?,
            )?;
        }
    }

    let mut iterations = Vec::with_capacity(out.steps.len());
    let mut log = Vec::with_capacity(out.steps.len());
    for (step, map) in out.steps.iter().zip(&out.full_res) {
        let epe = match &gt {
            Some((g, m)) => Some(masked_epe(map, g, m).stage(|| "scoring against ground truth".to_string())?),
            None => None,
        };
        let rec = IterationRecord {
            iteration: step.iteration + 1,
            phase: step.phase.name().to_string(),
            mean_disparity: mean(map),
            epe,
        };
        let mut line = format!(
            "iter={:02} phase={} mean_disparity={:.4}",
            rec.iteration, rec.phase, rec.mean_disparity
        );
        if let Some(e) = epe {
            line.push_str(&format!(" epe={e:.4}"));
        }
        log.push(line);
        iterations.push(rec);
    }

    outputs.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest {
        command: "infer".into(),
        config: s.cfg.clone(),
        mode: s.mode,
        inputs: InputPaths {
            left: path_string(&job.left),
            right: path_string(&job.right),
            depth: job.depth.as_deref().map(path_string),
            gt: job.gt.as_deref().map(path_string),
        },
        weights: s.source.clone(),
        format: s.format,
        save_iters: s.save_iters,
        outputs,
        iterations,
    };
    write_file(&job.out.join(MANIFEST_FILE), manifest.to_json().as_bytes())?;
    Ok((manifest, log))
}

fn optional_per_pair(paths: &[PathBuf], n: usize, flag: &str) -> Result<Vec<Option<PathBuf>>, CliError> {
    match paths.len() {
        0 => Ok(vec![None; n]),
        k if k == n => Ok(paths.iter().cloned().map(Some).collect()),
        k => Err(CliError::bad_input(format!("{k} {flag} paths given for {n} pairs"))),
    }
}

pub(crate) fn infer(a: &InferArgs) -> Result<(), CliError> {
    let cfg = a.engine.resolve()?;
    let n = a.left.len();
    if a.right.len() != n {
        return Err(CliError::bad_input(format!(
            "{n} left images but {} right images",
            a.right.len()
        )));
    }
    let depths = optional_per_pair(&a.depth, n, "--depth")?;
    let gts = optional_per_pair(&a.gt, n, "--gt")?;
    let (weights, source) = weight_source(a.mode, a.weights.as_deref(), a.seed, &cfg)?;
    let settings = RunSettings {
        cfg: &cfg,
        mode: a.mode,
        weights: &weights,
        source: &source,
        format: a.format,
        save_iters: a.save_iters,
    };
    let jobs: Vec<PairJob> = (0..n)
        .map(|k| PairJob {
            left: a.left[k].clone(),
            right: a.right[k].clone(),
            depth: depths[k].clone(),
            gt: gts[k].clone(),
            out: if n == 1 {
                a.out.clone()
            } else {
                a.out.join(format!("pair_{k:03}"))
            },
        })
        .collect();

    let run_all = || jobs.par_iter().map(|j| run_pair(j, &settings)).collect::<Vec<_>>();
    let results = match a.jobs {
        Some(0) => return Err(CliError::bad_input("--jobs must be at least 1")),
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .output(|| "starting worker pool".into())?
            .install(run_all),
        None => run_all(),
    };
    for (job, r) in jobs.iter().zip(results) {
        let (_, log) = r?;
        if n > 1 {
            println!("pair={}", job.out.display());
        }
        for line in log {
            println!("{line}");
        }
        println!("wrote {}", job.out.display());
    }
    Ok(())
}

pub(crate) fn replay(a: &ReplayArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.manifest)
        .map_err(|e| CliError::bad_input(format!("cannot read manifest `{}`: {e}", a.manifest.display())))?;
    let stored = RunManifest::from_json(&text)
        .map_err(|e| CliError::bad_input(format!("parsing manifest `{}`: {e}", a.manifest.display())))?;
    let cfg = &stored.config;
    cfg.validate().stage(|| "manifest configuration".to_string())?;
    let (weights, source) = match &stored.weights {
        WeightSource::Seed { seed } => weight_source(stored.mode, None, *seed, cfg)?,
        WeightSource::File { path } => weight_source(stored.mode, Some(Path::new(path)), 0, cfg)?,
        WeightSource::Unused => weight_source(Mode::Oracle, None, 0, cfg)?,
    };
    let job = PairJob {
        left: stored.inputs.left.clone().into(),
        right: stored.inputs.right.clone().into(),
        depth: stored.inputs.depth.clone().map(Into::into),
        gt: stored.inputs.gt.clone().map(Into::into),
        out: a.out.clone(),
    };
    let settings = RunSettings {
        cfg,
        mode: stored.mode,
        weights: &weights,
        source: &source,
        format: stored.format,
        save_iters: stored.save_iters,
    };
    let (fresh, log) = run_pair(&job, &settings)?;
    for line in log {
        println!("{line}");
    }
    if fresh.to_json() != text {
        return Err(CliError::internal("replayed run differs from its manifest"));
    }
    println!("replay matches manifest; wrote {}", a.out.display());
    Ok(())
}

pub(crate) fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let (pred, _) = read_disp(&a.pred, "prediction")?;
    let (gt, mask) = read_disp(&a.gt, "ground truth")?;
    let report = compute_metrics(&pred, &gt, &mask, &a.thresholds).stage(|| "evaluation".to_string())?;
    if a.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_key_value());
    }
    Ok(())
}

pub(crate) fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let layers = a
        .layer
        .iter()
        .enumerate()
        .map(|(k, &[x0, y0, x1, y1, d])| Layer {
            rect: Rect::new(y0, x0, y1, x1),
            disparity: d as u32,
            seed: a.seed.wrapping_add(1 + k as u64),
        })
        .collect();
    let spec = SceneSpec {
        height: a.height,
        width: a.width,
        background_disparity: a.background_disparity,
        background_seed: a.seed,
        layers,
    };
    let scene = synth_scene(&spec).stage(|| "scene".to_string())?;
    let (quarter, _) = quarter_res_truth(&scene.disparity, &scene.valid).stage(|| "scene".to_string())?;
    let (qh, qw) = quarter.dims2().stage(|| "scene".to_string())?;
    let perturb = if a.depth_region.is_empty() {
        PerturbSpec::uniform(qh, qw, 1.0)
    } else {
        PerturbSpec {
            regions: a
                .depth_region
                .iter()
                .map(|&(x0, y0, x1, y1, scale)| Region {
                    rect: Rect::new(y0, x0, y1, x1),
                    scale,
                })
                .collect(),
            shift: 0.0,
            normalization: 1.0,
        }
    };
    let perturb = PerturbSpec {
        shift: a.depth_shift,
        ..perturb
    };
    let depth = perturb_depth(&quarter, &perturb).stage(|| "depth perturbation".to_string())?;

    create_dir(&a.out)?;
    let enc = |r: crate::Result<Vec<u8>>| r.output(|| "encoding outputs".into());
    write_file(&a.out.join("left.png"), &enc(write_image_png(&scene.left))?)?;
    write_file(&a.out.join("right.png"), &enc(write_image_png(&scene.right))?)?;
    write_file(
        &a.out.join("disparity.pfm"),
        &enc(write_pfm(&scene.disparity, Some(&scene.valid)))?,
    )?;
    write_file(&a.out.join("depth.pfm"), &enc(write_pfm(&depth.z, None))?)?;
    let record = serde_json::json!({ "scene": spec, "depth": perturb });
    let mut text = serde_json::to_string_pretty(&record).output(|| "encoding scene description".into())?;
    text.push('\n');
    write_file(&a.out.join("scene.json"), text.as_bytes())?;
    println!(
        "wrote {} ({}x{}, {} valid pixels)",
        a.out.display(),
        a.height,
        a.width,
        scene.valid.count()
    );
    Ok(())
}

/// Repeats every pixel of a quarter-resolution map over a 4×4 block.
fn replicate(map: &Tensor, mask: &Mask) -> (Tensor, Mask) {
    let (h, w) = mask.dims();
    let f = UPSAMPLE_FACTOR;
    (
        Tensor::from_fn2(h * f, w * f, |y, x| map.at2(y / f, x / f)),
        Mask::from_fn(h * f, w * f, |y, x| mask.get(y / f, x / f)),
    )
}

pub(crate) fn depth_analyze(a: &DepthAnalyzeArgs) -> Result<(), CliError> {
    let (z, zmask) = read_disp(&a.depth, "depth")?;
    let (gt, gmask) = read_disp(&a.gt, "ground truth")?;
    let (zh, zw) = zmask.dims();
    let (z, zmask) = if (zh * UPSAMPLE_FACTOR, zw * UPSAMPLE_FACTOR) == gmask.dims() {
        replicate(&z, &zmask)
    } else {
        (z, zmask)
    };
    let mask = zmask.and(&gmask).stage(|| "depth vs ground truth".to_string())?;
    let analysis = analyze_depth(&z, &gt, &mask).map_err(|e| match e {
        Error::EmptyMask => CliError {
            code: super::EXIT_EMPTY_EVAL,
            message: "depth analysis: no pixel is valid in both maps".into(),
        },
        e => CliError::bad_input(format!("depth analysis: {e}")),
    })?;
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&analysis).output(|| "encoding analysis".into())?
        );
        return Ok(());
    }
    let name = a.name.clone().unwrap_or_else(|| {
        a.depth
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "depth".into())
    });
    println!("| Dataset | EPE | STD |");
    println!("|---|---:|---:|");
    println!("| {name} | {:.2} | {:.2} |", analysis.fit.epe, analysis.std);
    Ok(())
}
