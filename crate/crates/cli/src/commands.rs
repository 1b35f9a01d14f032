use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;
use slrr::affinity::heatmap_svg;
use slrr::dataset::{self, corrupt_entries, generate_union_of_subspaces, save_labels, save_matrix};
use slrr::eval::ClusteringResult;
use slrr::pipeline::{self, run_pipeline, run_trials, scaling_report, PipelineOutput, SweepCell};
use slrr::{DataMatrix, LabelVector, PipelineConfig, RankSpec, SynthSpec};

use crate::args::{BenchArgs, ClusterArgs, Command, ModelArgs, SweepArgs, SynthArgs};
use crate::config::{self, ConfigFile, InputSettings};
use crate::plot::{line_chart, Series};

const HEATMAP_CELLS: usize = 200;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Cluster(a) => cluster(a),
        Command::Sweep(a) => sweep(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => bench(a),
    }
}

fn load_config(model: &ModelArgs) -> Result<ConfigFile> {
    match &model.config {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| slrr::Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing json")?;
    text.push('\n');
    write(path, text)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| slrr::Error::Io { path: dir.to_path_buf(), source: e })?;
    Ok(())
}

struct Prepared {
    x: DataMatrix,
    truth: Option<LabelVector>,
}

/// Load the input, then optionally rescale and corrupt it with `seed`.
fn prepare(input: &InputSettings, seed: u64) -> Result<Prepared> {
    let mut x = dataset::load_matrix(&input.input, input.layout)?;
    let truth = input.labels.as_ref().map(dataset::load_labels).transpose()?;
    if let Some(t) = &truth {
        if t.len() != x.cols() {
            bail!(slrr::Error::DimensionMismatch(format!(
                "{} has {} labels but the data has {} samples (check --layout)",
                input.labels.as_ref().unwrap().display(),
                t.len(),
                x.cols()
            )));
        }
    }
    if input.unit_scale {
        x = x.scaled_to_unit_interval();
    }
    if let Some(ratio) = input.corrupt_ratio {
        x = corrupt_entries(&x, ratio, seed)?;
    }
    Ok(Prepared { x, truth })
}

/// Everything needed to rerun a command, written as config.json.
#[derive(Serialize)]
struct ResolvedConfig<'a> {
    command: &'a str,
    input: Option<&'a InputSettings>,
    pipeline: &'a PipelineConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<serde_json::Value>,
}

fn spectrum(out: &PipelineOutput) -> Result<Vec<f64>> {
    match &out.representation.cached_spectrum {
        Some(s) => Ok(s.clone()),
        None => Ok(slrr::slrr::eigen_spectrum(&out.representation)?),
    }
}

fn spectrum_csv(values: &[f64]) -> String {
    let mut s = String::from("index,eigenvalue\n");
    for (i, v) in values.iter().enumerate() {
        s.push_str(&format!("{},{v:.16e}\n", i + 1));
    }
    s
}

fn recovery_json(out: &PipelineOutput) -> serde_json::Value {
    let rec = &out.recovery;
    json!({
        "method": rec.method.name(),
        "rows": rec.a.rows(),
        "samples": rec.samples(),
        "target_rank": rec.target_rank,
        "rpca": rec.rpca,
    })
}

fn error_line(result: &ClusteringResult) -> String {
    match result.error {
        Some(e) => format!("clustering error {e:.4}"),
        None => "no ground truth; error not computed".to_string(),
    }
}

fn check_rpca(out: &PipelineOutput) -> Result<()> {
    if let Some(r) = &out.recovery.rpca {
        if !r.converged {
            bail!(slrr::Error::Numerical(format!(
                "rpca stopped after {} iterations without converging (residual {:.3e})",
                r.iterations, r.residual
            )));
        }
    }
    Ok(())
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let file = load_config(&args.model)?;
    let input = config::resolve_input(&args.input, &file)?;
    let trials = args.trials.or(file.get("trials")?).unwrap_or(1);
    if trials == 0 {
        bail!(config::usage("--trials must be positive"));
    }
    // The seed is needed before the data is prepared, so peek at it first.
    let seed = args.model.seed.or(file.get("seed")?).unwrap_or(0);
    let prepared = prepare(&input, seed)?;
    let k_hint = prepared.truth.as_ref().map(LabelVector::num_clusters);
    let cfg = config::resolve_model(&args.model, &file, k_hint)?;

    create_dir(&input.out_dir)?;
    let dir = &input.out_dir;
    write_json(
        &dir.join("config.json"),
        &ResolvedConfig {
            command: "cluster",
            input: Some(&input),
            pipeline: &cfg,
            trials: (trials > 1).then_some(trials),
            grid: None,
        },
    )?;

    let out = run_pipeline(&prepared.x, &cfg, prepared.truth.as_ref())?;
    save_labels(dir.join("labels.txt"), &out.result.predicted)?;
    write(&dir.join("affinity.svg"), heatmap_svg(&out.affinity.w, HEATMAP_CELLS))?;
    let spec = spectrum(&out)?;
    write(&dir.join("spectrum.csv"), spectrum_csv(&spec))?;
    if args.save_matrices {
        dataset::save_raw_matrix(dir.join("z.csv"), &out.representation.z)?;
        dataset::save_raw_matrix(dir.join("a.csv"), out.recovery.a.matrix())?;
        if let Some(e) = &out.recovery.error {
            dataset::save_raw_matrix(dir.join("e.csv"), e)?;
        }
        write_json(&dir.join("recovery.json"), &recovery_json(&out))?;
    }

    let trials_report = (trials > 1).then(|| {
        let seeds: Vec<u64> = (0..trials as u64).map(|i| seed.wrapping_add(i)).collect();
        run_trials(&seeds, |s| {
            let p = prepare(&input, s).map_err(|e| match e.downcast::<slrr::Error>() {
                Ok(e) => e,
                Err(e) => slrr::Error::InvalidArgument(e.to_string()),
            })?;
            let trial_cfg = PipelineConfig { seed: s, ..cfg.clone() };
            Ok(run_pipeline(&p.x, &trial_cfg, p.truth.as_ref())?.result)
        })
    });

    let results = json!({
        "samples": prepared.x.cols(),
        "features": prepared.x.rows(),
        "k": cfg.k,
        "error": out.result.error,
        "alignment": out.result.alignment,
        "representation_rank": out.representation.source_rank,
        "embedding_rank": out.factor.rank(),
        "psd_violation": out.factor.psd_violation,
        "recovery": recovery_json(&out),
        "stage_timings": out.result.stage_timings,
        "total_seconds": out.result.stage_timings.total(),
        "trials": trials_report,
    });
    write_json(&dir.join("results.json"), &results)?;

    println!("{} (n = {}, k = {})", error_line(&out.result), prepared.x.cols(), cfg.k);
    if let Some(r) = &trials_report {
        if let Some(s) = &r.summary {
            println!(
                "{} trials: mean {:.4}, median {:.4}, std {:.4}, max {:.4}, failures {}",
                trials, s.mean, s.median, s.std, s.max, r.failures
            );
        } else {
            println!("{} trials, {} failures", trials, r.failures);
        }
    }
    println!("wrote {}", dir.display());
    check_rpca(&out)
}

fn rank_name(r: Option<RankSpec>) -> String {
    r.map_or_else(|| "none".to_string(), |r| r.to_string())
}

fn sweep_csv(cells: &[SweepCell]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lambda", "alpha", "rank", "error", "seconds", "failure"])?;
    for c in cells {
        w.write_record([
            c.lambda.to_string(),
            c.alpha.to_string(),
            rank_name(c.rank),
            c.error.map_or_else(String::new, |e| e.to_string()),
            format!("{:.3}", c.seconds),
            c.failure.clone().unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn sweep_chart(rank: Option<RankSpec>, cells: &[SweepCell], alphas: &[u32]) -> String {
    let series: Vec<Series> = alphas
        .iter()
        .map(|&alpha| Series {
            name: format!("alpha = {alpha}"),
            points: cells
                .iter()
                .filter(|c| c.rank == rank && c.alpha == alpha)
                .map(|c| (c.lambda, c.error))
                .collect(),
        })
        .collect();
    line_chart(&format!("rank {}", rank_name(rank)), "lambda", &series)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let file = load_config(&args.model)?;
    let input = config::resolve_input(&args.input, &file)?;
    let seed = args.model.seed.or(file.get("seed")?).unwrap_or(0);
    let prepared = prepare(&input, seed)?;
    let k_hint = prepared.truth.as_ref().map(LabelVector::num_clusters);
    let base = config::resolve_model(&args.model, &file, k_hint)?;
    let grids = config::resolve_grids(
        args.lambda_grid.as_deref(),
        args.alpha_grid.as_deref(),
        args.rank_grid.as_deref(),
        &file,
        &base,
    )?;

    create_dir(&input.out_dir)?;
    let dir = &input.out_dir;
    let grid_json = json!({
        "lambda": grids.lambdas,
        "alpha": grids.alphas,
        "rank": grids.ranks.iter().map(|r| rank_name(*r)).collect::<Vec<_>>(),
    });
    write_json(
        &dir.join("config.json"),
        &ResolvedConfig {
            command: "sweep",
            input: Some(&input),
            pipeline: &base,
            trials: None,
            grid: Some(grid_json),
        },
    )?;

    let cells = pipeline::sweep(
        &prepared.x,
        &base,
        &grids.lambdas,
        &grids.alphas,
        &grids.ranks,
        prepared.truth.as_ref(),
    )?;
    write(&dir.join("sweep.csv"), sweep_csv(&cells)?)?;
    let mut charts = Vec::new();
    for &rank in &grids.ranks {
        let name = format!("sweep_rank_{}.svg", rank_name(rank));
        write(&dir.join(&name), sweep_chart(rank, &cells, &grids.alphas))?;
        charts.push(name);
    }
    write_json(&dir.join("results.json"), &json!({ "cells": cells, "charts": charts }))?;

    let failed = cells.iter().filter(|c| c.failure.is_some()).count();
    for c in cells.iter().filter(|c| c.failure.is_some()) {
        warn!(
            "cell lambda={} alpha={} rank={} failed: {}",
            c.lambda,
            c.alpha,
            rank_name(c.rank),
            c.failure.as_deref().unwrap_or("")
        );
    }
    let best = cells
        .iter()
        .filter_map(|c| c.error.map(|e| (e, c)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    println!("{} cells, {} failed", cells.len(), failed);
    if let Some((e, c)) = best {
        println!(
            "best error {e:.4} at lambda={} alpha={} rank={}",
            c.lambda,
            c.alpha,
            rank_name(c.rank)
        );
    }
    println!("wrote {}", dir.display());
    if failed == cells.len() {
        bail!(slrr::Error::Numerical(format!("all {failed} sweep cells failed")));
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        num_subspaces: args.k,
        subspace_dim: args.dim,
        ambient_dim: args.ambient,
        points_per_subspace: args.points,
        noise_sigma: args.noise,
        seed: args.seed,
        independent: args.independent,
    };
    let layout = config::parse_layout(&args.layout)?;
    let (mut x, labels) = generate_union_of_subspaces(&spec)?;
    if args.unit_scale {
        x = x.scaled_to_unit_interval();
    }
    let corrupted = match args.corrupt_ratio {
        Some(ratio) => {
            let seed = args.corrupt_seed.unwrap_or(args.seed.wrapping_add(1));
            Some((corrupt_entries(&x, ratio, seed)?, ratio, seed))
        }
        None => None,
    };

    let dir = &args.out_dir;
    create_dir(dir)?;
    save_matrix(dir.join("data.csv"), &x, layout)?;
    save_labels(dir.join("labels.txt"), &labels)?;
    let mut meta = json!({ "spec": spec, "layout": layout, "unit_scale": args.unit_scale });
    if let Some((c, ratio, seed)) = &corrupted {
        save_matrix(dir.join("data_corrupted.csv"), c, layout)?;
        let changed = x.matrix().iter().zip(c.matrix().iter()).filter(|(a, b)| a != b).count();
        meta["corruption"] = json!({ "ratio": ratio, "seed": seed, "entries_changed": changed });
        info!("corrupted {changed} of {} entries", x.matrix().len());
    }
    write_json(&dir.join("synth.json"), &meta)?;
    println!(
        "{} samples in {} dimensions from {} subspaces; wrote {}",
        x.cols(),
        x.rows(),
        spec.num_subspaces,
        dir.display()
    );
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let file = load_config(&args.model)?;
    let cfg = config::resolve_model(&args.model, &file, Some(4))?;
    cfg.validate()?;
    let sizes = config::parse_list(&args.sizes, |s| {
        s.parse::<usize>().map_err(|_| config::usage(format!("bad size {s:?}")))
    })?;
    let report = scaling_report(&sizes, args.m, &cfg, args.repeats)?;
    println!("m = {}, k = {}, lambda = {}, alpha = {}", report.m, cfg.k, cfg.lambda, cfg.alpha);
    for p in &report.points {
        println!("n = {:>6}  {:.4} s", p.n, p.seconds);
    }
    match report.slope {
        Some(s) => println!("log-log slope {s:.3}"),
        None => println!("log-log slope: n/a (single size)"),
    }
    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        write_json(&dir.join("bench.json"), &json!({ "report": report, "pipeline": cfg }))?;
        write_json(
            &dir.join("config.json"),
            &ResolvedConfig {
                command: "bench",
                input: None,
                pipeline: &cfg,
                trials: None,
                grid: Some(json!({ "sizes": sizes, "m": args.m, "repeats": args.repeats })),
            },
        )?;
    }
    Ok(())
}
