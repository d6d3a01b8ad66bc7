use std::fs;
use std::path::{Path, PathBuf};

use lapreg::data::{load_split_pairs, make_two_moons, write_standard_splits, RatingMatrix, SplitPair};
use lapreg::eval::{
    build_model, kb_sweep, predict_points, run_benchmark, run_point_benchmark, speedup_table, synthetic_split,
    write_sweep_csv, AbsErrorSum, BenchmarkReport, PointTask,
};
use lapreg::features::{build_features, Axis};
use lapreg::solvers::{precompute, predict_matrix, Method};
use serde::Serialize;
use serde_json::json;

use crate::config::{DatasetKind, RunConfig};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn out_dir(config: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&config.out_dir).map_err(|e| io_err(&config.out_dir, e))?;
    Ok(&config.out_dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json output serializes");
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Writes `config.toml` (loadable with `--config`) and `config.json`, both
/// listing the heat-kernel bandwidth each graph actually used.
fn echo(config: &RunConfig, epsilons: &[(String, f64)]) -> Result<()> {
    let dir = out_dir(config)?;
    let mut text = String::new();
    for (split, eps) in epsilons {
        text.push_str(&format!("# effective epsilon [{split}] = {eps:e}\n"));
    }
    text.push_str(&toml::to_string(config).expect("config serializes"));
    let path = dir.join("config.toml");
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    let effective: Vec<_> = epsilons
        .iter()
        .map(|(split, eps)| json!({ "split": split, "epsilon": eps }))
        .collect();
    write_json(
        &dir.join("config.json"),
        &json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "effective_epsilon": effective,
        }),
    )
}

fn rating_splits(config: &RunConfig) -> Result<Vec<SplitPair>> {
    let mut pairs = match config.dataset {
        DatasetKind::Movielens => load_split_pairs(&config.data_dir, config.scheme).map_err(|e| match e {
            lapreg::Error::Io { .. } => CliError::Io(format!("{e} (create the split files with `lapreg make-splits`)")),
            other => other.into(),
        })?,
        DatasetKind::Synthetic => vec![synthetic_split(&config.synthetic())?],
        DatasetKind::TwoMoons => unreachable!("point datasets are handled separately"),
    };
    if let Some(name) = &config.split {
        pairs.retain(|p| &p.name == name);
        if pairs.is_empty() {
            return Err(CliError::Validation(format!(
                "split: {name:?} is not part of scheme {:?}",
                config.scheme.names()
            )));
        }
    }
    Ok(pairs)
}

fn moons_task(config: &RunConfig) -> Result<PointTask> {
    Ok(PointTask::two_moons(
        config.n_points,
        config.noise,
        config.labels_per_class,
        config.seed,
    )?)
}

fn single_method(config: &RunConfig) -> Result<Method> {
    match config.methods.as_slice() {
        [m] => Ok(*m),
        _ => Err(CliError::Validation(format!(
            "methods: predict takes exactly one method, got {}",
            config.methods.len()
        ))),
    }
}

fn oriented(split: &SplitPair, axis: Axis) -> (RatingMatrix, RatingMatrix) {
    match axis {
        Axis::UserBased => (split.train.clone(), split.test.clone()),
        Axis::ItemBased => (split.train.transpose(), split.test.transpose()),
    }
}

pub fn predict(config: &RunConfig) -> Result<()> {
    let method = single_method(config)?;
    if config.dataset == DatasetKind::TwoMoons {
        return predict_moons(config, method);
    }
    let pipeline = config.pipeline();
    let split = rating_splits(config)?.swap_remove(0);
    let features = build_features(&split.train, &pipeline.features)?;
    let model = build_model(&pipeline, &features)?;
    let state = precompute(method, &model.grams, &model.graph)?;
    let (train, _) = oriented(&split, config.axis);
    let clip = config.clip.then_some(pipeline.range);
    let predicted = predict_matrix(&state, &train, clip)?;
    let value = |user: usize, item: usize| match config.axis {
        Axis::UserBased => predicted.get(user, item),
        Axis::ItemBased => predicted.get(item, user),
    };

    let dir = out_dir(config)?;
    let path = dir.join("predictions.csv");
    let mut out = String::from("user,item,prediction\n");
    let mut raw = AbsErrorSum::default();
    let mut clipped = AbsErrorSum::default();
    let mut rounded = AbsErrorSum::default();
    for t in split.test.iter() {
        let p = value(t.user, t.item);
        out.push_str(&format!("{},{},{}\n", t.user + 1, t.item + 1, p));
        raw.add(p, t.value);
        clipped.add(pipeline.range.clamp(p), t.value);
        rounded.add(pipeline.range.clamp(p.round()), t.value);
    }
    fs::write(&path, out).map_err(|e| io_err(&path, e))?;
    let summary = json!({
        "dataset": config.dataset,
        "split": split.name,
        "method": method,
        "axis": config.axis,
        "n_test": raw.count,
        "mae": raw.mae(),
        "mae_clipped": clipped.mae(),
        "mae_rounded": rounded.mae(),
        "precompute_seconds": state.precompute_seconds(),
        "item_seconds": predicted.total_item_seconds(),
        "epsilon": model.graph.epsilon(),
        "relation_residual": model.grams.relation_residual(),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    echo(config, &[(split.name.clone(), model.graph.epsilon())])?;
    println!(
        "{method} on {} ({:?}): MAE {:.5} over {} test ratings",
        split.name,
        config.axis,
        raw.mae().unwrap_or(f64::NAN),
        raw.count
    );
    Ok(())
}

fn predict_moons(config: &RunConfig, method: Method) -> Result<()> {
    let pipeline = config.pipeline();
    let cloud = make_two_moons(config.n_points, config.noise, config.seed)?;
    let task = PointTask::from_cloud(&cloud, config.labels_per_class, config.seed)?;
    let (f, epsilon) = predict_points(&pipeline, &task, method)?;
    let mut labeled = vec![false; cloud.len()];
    for &i in &task.item.label_idx {
        labeled[i] = true;
    }
    let dir = out_dir(config)?;
    let path = dir.join("labels.csv");
    let mut out = String::from("x,y,label,labeled,f_star,predicted\n");
    let (mut err, mut wrong) = (AbsErrorSum::default(), 0usize);
    for (i, p) in cloud.points.iter().enumerate() {
        let sign = if f[i] >= 0.0 { 1 } else { -1 };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p[0], p[1], cloud.labels[i], labeled[i] as u8, f[i], sign
        ));
        if !labeled[i] {
            err.add(f[i], cloud.labels[i]);
            wrong += (sign as f64 != cloud.labels[i]) as usize;
        }
    }
    fs::write(&path, out).map_err(|e| io_err(&path, e))?;
    let misclassification = wrong as f64 / err.count.max(1) as f64;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "dataset": config.dataset,
            "method": method,
            "n_scored": err.count,
            "mae": err.mae(),
            "misclassification": misclassification,
            "epsilon": epsilon,
        }),
    )?;
    echo(config, &[("two_moons".into(), epsilon)])?;
    println!(
        "{method} on two moons: MAE {:.5}, misclassified {:.2}% of {} unlabeled points",
        err.mae().unwrap_or(f64::NAN),
        100.0 * misclassification,
        err.count
    );
    Ok(())
}

fn print_report(report: &BenchmarkReport) {
    println!("{:<8} {:>10} {:>12} {:>14} {:>10}", "method", "MAE", "precompute s", "per-item s", "speedup");
    for s in &report.summary {
        if s.failed {
            let why = report
                .runs
                .iter()
                .find(|r| r.method == s.method && r.failure.is_some())
                .and_then(|r| r.failure.clone())
                .unwrap_or_default();
            println!("{:<8} failed: {why}", s.method.to_string());
            continue;
        }
        println!(
            "{:<8} {:>10.5} {:>12.4} {:>14.6} {:>10}",
            s.method.to_string(),
            s.global_mae.unwrap_or(f64::NAN),
            s.precompute_seconds,
            s.item_seconds,
            s.speedup_vs_prop.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
        );
    }
}

fn write_speedups(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    if speedup_table(report).is_ok() {
        report.write_speedup_csv(&dir.join("table3.csv"))?;
    } else {
        eprintln!("note: no successful Prop run, table3.csv not written");
    }
    Ok(())
}

pub fn bench(config: &RunConfig) -> Result<()> {
    let pipeline = config.pipeline();
    let report = if config.dataset == DatasetKind::TwoMoons {
        let task = moons_task(config)?;
        run_point_benchmark(&pipeline, &task, &config.methods, Some(config.seed))?
    } else {
        run_benchmark(&pipeline, &rating_splits(config)?, &config.methods)?
    };
    let dir = out_dir(config)?;
    report.write_json(&dir.join("report.json"))?;
    match config.dataset {
        DatasetKind::TwoMoons => report.write_method_mae_row(&dir.join("fig1h.csv"))?,
        DatasetKind::Movielens => report.write_mae_csv(&dir.join("movielens_mae.csv"))?,
        DatasetKind::Synthetic => report.write_mae_csv(&dir.join("synthetic_mae.csv"))?,
    }
    write_speedups(&report, dir)?;
    let eps: Vec<_> = report.setups.iter().map(|s| (s.split.clone(), s.epsilon)).collect();
    echo(config, &eps)?;
    print_report(&report);
    Ok(())
}

pub fn sweep_kb(config: &RunConfig) -> Result<()> {
    if config.dataset != DatasetKind::TwoMoons {
        return Err(CliError::Validation("dataset: sweep-kb runs on two_moons".into()));
    }
    let task = moons_task(config)?;
    let table = kb_sweep(&config.pipeline(), &task, &config.kb)?;
    let dir = out_dir(config)?;
    write_sweep_csv(&table.rows, &dir.join("fig1h.csv"))?;
    write_json(&dir.join("sweep.json"), &table)?;
    let eps: Vec<_> = table.epsilon.map(|e| ("two_moons".to_string(), e)).into_iter().collect();
    echo(config, &eps)?;
    println!("{:>6} {:>10} {:>10}", "k_b", "GBa MAE", "Prop MAE");
    for r in &table.rows {
        println!("{:>6} {:>10.5} {:>10.5}", r.kb, r.gba_mae, r.prop_mae);
    }
    Ok(())
}

pub fn gen_twomoons(config: &RunConfig) -> Result<()> {
    let cloud = make_two_moons(config.n_points, config.noise, config.seed)?;
    let dir = out_dir(config)?;
    let path = dir.join("twomoons.csv");
    let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    cloud.write_csv(file).map_err(|e| io_err(&path, e))?;
    echo(config, &[])?;
    println!("wrote {} points to {}", cloud.len(), path.display());
    Ok(())
}

pub fn make_splits(config: &RunConfig, ratings: Option<PathBuf>) -> Result<()> {
    let ratings = ratings.unwrap_or_else(|| config.data_dir.join("u.data"));
    write_standard_splits(&ratings, &config.data_dir)?;
    echo(config, &[])?;
    println!("wrote u1..u5 and ua/ub splits to {}", config.data_dir.display());
    Ok(())
}
