use std::fs;
use std::path::{Path, PathBuf};

use ensel::clpso::{optimize_in, Bounds};
use ensel::io::{read_mask, read_stack, write_mask, write_stack, PredictionRef, TestEntry, TrainEntry};
use ensel::pipeline::{
    build_prediction_matrix, evaluate_masks, evaluate_matrix, grid_oracle, random_masks, segment,
    synthesize_predictions, test_matrix, train, GridOracleSpec, SyntheticPredictorSpec,
};
use ensel::testfns::TestFunction;
use ensel::{DatasetManifest, LearningProbMode, SwarmConfig, ThresholdDocument, ThresholdVector};
use serde::Serialize;
use serde_json::json;

use crate::args::{BenchArgs, EvaluateArgs, FuseArgs, OptimizeArgs, OracleArgs, StackArgs, SynthArgs};
use crate::error::CliError;
use crate::settings::{pick, resolve_seed, FileConfig};

const DEFAULT_MODELS: [&str; 3] = ["strong:0.9:3", "medium:0.7:3", "weak:0.55:3"];

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::invalid(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn parse_model(text: &str, seed: u64) -> Result<SyntheticPredictorSpec, CliError> {
    let bad = || CliError::invalid(format!("model spec {text:?} is not NAME:ACCURACY:SHARPNESS[:BIAS]"));
    let parts: Vec<&str> = text.split(':').collect();
    if !(3..=4).contains(&parts.len()) || parts[0].is_empty() {
        return Err(bad());
    }
    let accuracy = parts[1].parse().map_err(|_| bad())?;
    let sharpness = parts[2].parse().map_err(|_| bad())?;
    let bias = parts.get(3).map_or(Ok(0), |b| b.parse()).map_err(|_| bad())?;
    Ok(SyntheticPredictorSpec::new(parts[0], accuracy, sharpness, bias, seed))
}

pub fn synth(a: SynthArgs, file: &FileConfig) -> Result<(), CliError> {
    let seed = resolve_seed(a.seed, file.seed);
    let train_n = pick(a.train, file.train, 20);
    let test_n = pick(a.test, file.test, 5);
    let height = pick(a.height, file.height, 32);
    let width = pick(a.width, file.width, 32);
    let classes = pick(a.classes, file.classes, 2);
    let folds = pick(a.folds, file.folds, 5);
    let texts: Vec<String> = match (a.models.is_empty(), &file.models) {
        (false, _) => a.models,
        (true, Some(m)) => m.clone(),
        (true, None) => DEFAULT_MODELS.iter().map(|s| s.to_string()).collect(),
    };
    let specs = texts
        .iter()
        .enumerate()
        .map(|(k, t)| parse_model(t, seed.wrapping_add(k as u64 + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    if height == 0 || width == 0 {
        return Err(CliError::invalid("image height and width must be positive"));
    }
    if classes > 256 {
        return Err(CliError::invalid("at most 256 classes fit in an 8-bit mask"));
    }

    let train_masks = random_masks(train_n, height, width, classes, seed);
    let test_masks = random_masks(test_n, height, width, classes, seed ^ 0x7e57);
    let manifest = synthesize_predictions(&train_masks, &test_masks, &specs, classes, folds, &a.out)?;
    write_json(
        &a.out.join("synth.json"),
        &json!({
            "seed": seed,
            "train": train_n,
            "test": test_n,
            "height": height,
            "width": width,
            "classes": classes,
            "folds": folds,
            "models": specs,
        }),
    )?;
    println!(
        "wrote {} training and {} test images for {} models to {} (seed {seed})",
        manifest.entries.len(),
        manifest.test.len(),
        specs.len(),
        a.out.join("manifest.json").display()
    );
    Ok(())
}

fn absolute(manifest: &DatasetManifest, p: &Path) -> Result<PathBuf, CliError> {
    let path = manifest.resolve(p);
    fs::canonicalize(&path).map_err(|e| CliError::io(&path, e))
}

pub fn stack(a: StackArgs) -> Result<(), CliError> {
    let manifest = DatasetManifest::load(&a.manifest)?;
    let pm = build_prediction_matrix(&manifest)?;
    for t in &manifest.test {
        let s = read_stack(manifest.resolve(&t.stack))?;
        if s.models() != manifest.model_names.len() || s.classes() != manifest.class_count {
            return Err(CliError::invalid(format!(
                "test stack {} has K={}, M={}; manifest expects K={}, M={}",
                t.stack.display(),
                s.models(),
                s.classes(),
                manifest.model_names.len(),
                manifest.class_count
            )));
        }
    }
    let mut per_fold = vec![0usize; manifest.folds];
    for img in pm.images() {
        if let Some(f) = img.fold {
            per_fold[f] += 1;
        }
    }
    print!("{}", evaluate_matrix(&pm, None).render_table());
    println!("folds: {per_fold:?}  test images: {}", manifest.test.len());

    if let Some(out) = a.out {
        create_dir(&out.join("oof"))?;
        let mut assembled = DatasetManifest::new(manifest.model_names.clone(), manifest.class_count, manifest.folds);
        for (img, entry) in pm.images().iter().zip(&manifest.entries) {
            let rel = PathBuf::from(format!("oof/{}.pten", img.id));
            write_stack(&img.stack, out.join(&rel))?;
            let fold = img.fold.expect("training images carry a fold");
            assembled.entries.push(TrainEntry {
                id: img.id.clone(),
                fold: Some(fold),
                mask: absolute(&manifest, &entry.mask)?,
                predictions: vec![PredictionRef { path: rel, model: None, held_out_fold: fold }],
            });
        }
        for t in &manifest.test {
            assembled.test.push(TestEntry {
                id: t.id.clone(),
                stack: absolute(&manifest, &t.stack)?,
                mask: t.mask.as_ref().map(|m| absolute(&manifest, m)).transpose()?,
            });
        }
        assembled.save(out.join("manifest.json"))?;
        println!("assembled manifest: {}", out.join("manifest.json").display());
    }
    Ok(())
}

pub fn swarm_config(a: &OptimizeArgs, file: &FileConfig) -> SwarmConfig {
    let d = SwarmConfig::default();
    SwarmConfig {
        pop_size: pick(a.pop, file.pop, d.pop_size),
        max_iter: pick(a.iters, file.iters, d.max_iter),
        c: pick(a.c, file.c, d.c),
        a0: pick(a.a0, file.a0, d.a0),
        a1: pick(a.a1, file.a1, d.a1),
        refresh_gap: pick(a.refresh_gap, file.refresh_gap, d.refresh_gap),
        v_max_fraction: pick(a.vmax_frac, file.vmax_frac, d.v_max_fraction),
        seed: resolve_seed(a.seed, file.seed),
        learning_prob_mode: pick(a.pc_mode, file.pc_mode, d.learning_prob_mode),
        inertia_literal: a.inertia_literal || file.inertia_literal.unwrap_or(false),
    }
}

fn mode_name(m: LearningProbMode) -> &'static str {
    match m {
        LearningProbMode::Ramped => "ramped",
        LearningProbMode::Uniform => "uniform",
        LearningProbMode::PaperLiteral => "paper-literal",
    }
}

pub fn optimize(a: OptimizeArgs, file: &FileConfig) -> Result<(), CliError> {
    let cfg = swarm_config(&a, file);
    cfg.validate()?;
    eprintln!(
        "config: pop={} iters={} c={} a0={} a1={} refresh-gap={} vmax-frac={} pc-mode={} inertia-literal={} seed={}",
        cfg.pop_size,
        cfg.max_iter,
        cfg.c,
        cfg.a0,
        cfg.a1,
        cfg.refresh_gap,
        cfg.v_max_fraction,
        mode_name(cfg.learning_prob_mode),
        cfg.inertia_literal,
        cfg.seed
    );
    let manifest = DatasetManifest::load(&a.manifest)?;
    let (doc, trace) = train(&manifest, &cfg)?;
    let out = a.out.unwrap_or_else(|| PathBuf::from("thresholds.json"));
    doc.save(&out)?;
    if let Some(t) = &a.trace {
        trace.write_csv(t)?;
    }
    println!("dice {:.6} after {} evaluations", doc.achieved_dice, doc.evaluations);
    for (name, t) in doc.model_names.iter().zip(&doc.thresholds) {
        println!("  {name}: {t:.6}");
    }
    println!("thresholds: {}", out.display());
    Ok(())
}

fn load_thresholds(path: &Path, names: &[String], classes: usize) -> Result<(ThresholdDocument, ThresholdVector), CliError> {
    let doc = ThresholdDocument::load(path)?;
    if doc.model_names != names || doc.class_count != classes {
        return Err(CliError::invalid(format!(
            "{}: thresholds fitted for models {:?} with {} classes, manifest has {:?} with {}",
            path.display(),
            doc.model_names,
            doc.class_count,
            names,
            classes
        )));
    }
    let t = ThresholdVector::new(doc.thresholds.clone(), classes)?;
    Ok((doc, t))
}

pub fn fuse(a: FuseArgs) -> Result<(), CliError> {
    let manifest = DatasetManifest::load(&a.manifest)?;
    let (doc, _) = load_thresholds(&a.thresholds, &manifest.model_names, manifest.class_count)?;
    if manifest.test.is_empty() {
        return Err(CliError::invalid(format!("{}: no test images", a.manifest.display())));
    }
    create_dir(&a.out)?;
    let mut masks = Vec::new();
    for t in &manifest.test {
        let stack = read_stack(manifest.resolve(&t.stack))?;
        let mask = segment(&stack, &doc).map_err(|e| CliError::invalid(format!("image {:?}: {e}", t.id)))?;
        let name = format!("{}.pgm", t.id);
        write_mask(&mask, a.out.join(&name))?;
        masks.push(json!({ "id": t.id, "mask": name }));
    }
    write_json(&a.out.join("fuse.json"), &json!({ "thresholds": doc, "masks": masks }))?;
    println!("wrote {} masks to {}", masks.len(), a.out.display());
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let manifest = DatasetManifest::load(&a.manifest)?;
    let pm = if a.train { build_prediction_matrix(&manifest)? } else { test_matrix(&manifest)? };
    if pm.images().is_empty() {
        return Err(CliError::invalid(format!(
            "{}: no {} images with ground truth",
            a.manifest.display(),
            if a.train { "training" } else { "test" }
        )));
    }
    let loaded = a
        .thresholds
        .as_deref()
        .map(|p| load_thresholds(p, pm.model_names(), pm.classes()))
        .transpose()?;
    let mut report = evaluate_matrix(&pm, loaded.as_ref().map(|(_, t)| t));
    if let Some(dir) = &a.masks {
        let preds = pm
            .images()
            .iter()
            .map(|img| read_mask(dir.join(format!("{}.pgm", img.id))))
            .collect::<Result<Vec<_>, _>>()?;
        report.predicted_masks = Some(evaluate_masks(&pm, &preds)?);
    }
    print!("{}", report.render_table());
    if let Some(out) = &a.out {
        let doc = loaded.map(|(d, _)| d);
        write_json(
            out,
            &json!({ "split": if a.train { "train" } else { "test" }, "thresholds": doc, "report": report }),
        )?;
    }
    Ok(())
}

pub fn oracle(a: OracleArgs, file: &FileConfig) -> Result<(), CliError> {
    let delta = pick(a.delta, file.delta, 0.0693);
    let manifest = DatasetManifest::load(&a.manifest)?;
    let pm = build_prediction_matrix(&manifest)?;
    let result = grid_oracle(&pm, &GridOracleSpec { delta })?;
    println!("grid dice {:.6} after {} evaluations (delta {delta})", result.dice, result.evaluations);
    for (name, t) in pm.model_names().iter().zip(&result.thresholds) {
        println!("  {name}: {t:.6}");
    }
    if let Some(out) = &a.out {
        write_json(out, &json!({ "delta": delta, "model_names": pm.model_names(), "result": result }))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FunctionSummary {
    function: &'static str,
    best: f64,
    median: f64,
    worst: f64,
    evaluations: u64,
    finals: Vec<f64>,
}

pub fn bench_clpso(a: BenchArgs, file: &FileConfig) -> Result<(), CliError> {
    let names = match (a.functions.is_empty(), &file.functions) {
        (false, _) => a.functions.clone(),
        (true, Some(f)) => f.clone(),
        (true, None) => TestFunction::ALL.iter().map(|f| f.name().to_string()).collect(),
    };
    let functions = names
        .iter()
        .map(|n| TestFunction::from_name(n).ok_or_else(|| CliError::invalid(format!("unknown test function {n:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let dim = pick(a.dim, file.dim, 10);
    let runs = pick(a.runs, file.runs, 10);
    if dim == 0 || runs == 0 {
        return Err(CliError::invalid("dim and runs must be positive"));
    }
    let base = SwarmConfig {
        pop_size: pick(a.pop, file.pop, 10),
        max_iter: pick(a.iters, file.iters, 499),
        learning_prob_mode: pick(a.pc_mode, file.pc_mode, LearningProbMode::Ramped),
        seed: resolve_seed(a.seed, file.seed),
        ..SwarmConfig::default()
    };
    base.validate()?;
    if let Some(dir) = &a.trace_dir {
        create_dir(dir)?;
    }

    let mut summaries = Vec::new();
    println!("{:<10}  {:>12}  {:>12}  {:>12}  {:>11}", "function", "best", "median", "worst", "evaluations");
    for func in functions {
        let r = func.range();
        let objective = |x: &[f64]| -func.eval(x);
        let mut finals = Vec::with_capacity(runs);
        let mut evaluations = 0;
        for run in 0..runs {
            let cfg = SwarmConfig { seed: base.seed.wrapping_add(run as u64), ..base.clone() };
            let out = optimize_in(&cfg, &objective, Bounds::cube(dim, -r, r)?)?;
            if let Some(dir) = &a.trace_dir {
                out.trace.write_csv(dir.join(format!("{}-{run}.csv", func.name())))?;
            }
            evaluations = out.evaluations;
            finals.push(-out.best_fitness);
        }
        let mut sorted = finals.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
        println!(
            "{:<10}  {:>12.4e}  {median:>12.4e}  {:>12.4e}  {evaluations:>11}",
            func.name(),
            sorted[0],
            sorted[n - 1]
        );
        summaries.push(FunctionSummary {
            function: func.name(),
            best: sorted[0],
            median,
            worst: sorted[n - 1],
            evaluations,
            finals,
        });
    }
    if let Some(out) = &a.out {
        write_json(out, &json!({ "dim": dim, "runs": runs, "config": base, "functions": summaries }))?;
    }
    Ok(())
}
