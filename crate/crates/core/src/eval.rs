//! Metrics, benchmark orchestration, bandwidth sweeps and speedup tables.
//!
//! Timing follows one protocol everywhere: feature, graph and gram
//! construction are timed separately and excluded from method comparisons;
//! each method's own precompute is timed once; the per-item phase is the
//! median over `timing_runs` repetitions of the whole-matrix prediction.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{make_two_moons, PointCloud, Rating, RatingMatrix, RatingRange, SplitPair};
use crate::error::{Error, Result};
use crate::features::{build_features, Axis, FeatureOptions, FeatureSet};
use crate::graph::{knn_heat_graph, GraphModel};
use crate::kernel::KernelGrams;
use crate::solvers::{
    precompute, precompute_gba_with, predict_item, predict_matrix, LabeledItem, LaplacianEigen, Method,
    SolverState,
};

/// Mean absolute error.
pub fn mae(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::arg(format!(
            "{} predictions for {} true values",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::arg("MAE of an empty set"));
    }
    let sum: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / predicted.len() as f64)
}

/// Running sum of absolute errors, for MAE pooled over several test sets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AbsErrorSum {
    pub sum: f64,
    pub count: usize,
}

impl AbsErrorSum {
    pub fn add(&mut self, predicted: f64, truth: f64) {
        self.sum += (predicted - truth).abs();
        self.count += 1;
    }

    pub fn merge(&mut self, other: AbsErrorSum) {
        self.sum += other.sum;
        self.count += other.count;
    }

    /// `None` when nothing was added.
    pub fn mae(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Parameters shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Neighbors per node in the k-NN graph.
    pub k: usize,
    /// Gaussian kernel width.
    pub sigma: f64,
    /// Weight of the kernel norm.
    pub lambda: f64,
    /// Weight of the Laplacian smoothness term.
    pub gamma: f64,
    /// Heat-kernel bandwidth; the mean squared k-th-neighbor distance when unset.
    pub epsilon: Option<f64>,
    /// Feature recipe for rating data.
    pub features: FeatureOptions,
    /// Range used for the clipped and rounded MAE columns and range checks.
    pub range: RatingRange,
    /// Clamp predictions written to the output matrix.
    pub clip: bool,
    /// Repetitions of the per-item phase; the median is reported.
    pub timing_runs: usize,
}

impl PipelineConfig {
    /// `k = 20, σ = 4, λ = 0.022, γ = 0.05`.
    pub fn movielens() -> Self {
        Self {
            k: 20,
            sigma: 4.0,
            lambda: 0.022,
            gamma: 0.05,
            epsilon: None,
            features: FeatureOptions::default(),
            range: RatingRange::default(),
            clip: false,
            timing_runs: 3,
        }
    }

    /// `k = 30, σ = 0.1, λ = 1e-4, γ = 0.005`.
    pub fn two_moons() -> Self {
        Self {
            k: 30,
            sigma: 0.1,
            lambda: 1e-4,
            gamma: 0.005,
            range: RatingRange { min: -1.0, max: 1.0 },
            ..Self::movielens()
        }
    }

    /// Checks parameter domains, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str, v: f64| {
            Err(Error::invalid(format!("{field} must be {why}, got {v}")))
        };
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda", "> 0", self.lambda);
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma", ">= 0", self.gamma);
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma", "> 0", self.sigma);
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be >= 1, got 0"));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return bad("epsilon", "> 0", e);
            }
        }
        if self.timing_runs == 0 {
            return Err(Error::invalid("timing_runs must be >= 1, got 0"));
        }
        if self.range.min.is_nan() || self.range.max.is_nan() || self.range.min >= self.range.max {
            return Err(Error::invalid(format!(
                "range must have min < max, got [{}, {}]",
                self.range.min, self.range.max
            )));
        }
        Ok(())
    }

    fn clip_range(&self) -> Option<RatingRange> {
        self.clip.then_some(self.range)
    }
}

/// Graph and grams for one node set, with their construction times.
pub struct Model {
    pub graph: GraphModel,
    pub grams: KernelGrams,
    pub setup: SetupTimes,
}

/// Construction cost excluded from method comparisons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SetupTimes {
    pub features_seconds: f64,
    pub graph_seconds: f64,
    pub grams_seconds: f64,
}

/// Builds the graph and grams over `features`.
pub fn build_model(config: &PipelineConfig, features: &FeatureSet) -> Result<Model> {
    config.validate()?;
    let t = Instant::now();
    let graph = knn_heat_graph(features, config.k, config.epsilon)?;
    let graph_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let grams = KernelGrams::build(features, &graph, config.sigma, config.lambda, config.gamma)?;
    Ok(Model {
        graph,
        grams,
        setup: SetupTimes {
            features_seconds: 0.0,
            graph_seconds,
            grams_seconds: t.elapsed().as_secs_f64(),
        },
    })
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Precomputes `method`, sharing one Laplacian eigensystem across GBa
/// bandwidths. The eigensystem time is charged to every GBa method.
struct EigenCache {
    eigen: Option<(LaplacianEigen, f64)>,
}

impl EigenCache {
    fn new() -> Self {
        Self { eigen: None }
    }

    fn state<'a>(&mut self, method: Method, model: &'a Model) -> Result<(SolverState<'a>, f64)> {
        match method {
            Method::GBa { kb } => {
                if self.eigen.is_none() {
                    let t = Instant::now();
                    let e = LaplacianEigen::compute(&model.graph)?;
                    self.eigen = Some((e, t.elapsed().as_secs_f64()));
                }
                let (e, secs) = self.eigen.as_ref().unwrap();
                let st = precompute_gba_with(kb, &model.grams, &model.graph, e)?;
                let total = secs + st.precompute_seconds();
                Ok((st, total))
            }
            _ => {
                let st = precompute(method, &model.grams, &model.graph)?;
                let secs = st.precompute_seconds();
                Ok((st, secs))
            }
        }
    }
}

/// One method on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub split: String,
    /// Number of scored test entries.
    pub n_test: usize,
    pub abs_error: AbsErrorSum,
    pub abs_error_clipped: AbsErrorSum,
    pub abs_error_rounded: AbsErrorSum,
    /// Fraction of scored points whose sign differs from the truth, for
    /// ±1-labeled tasks.
    pub misclassification: Option<f64>,
    pub precompute_seconds: f64,
    /// Median total of the per-item solves.
    pub item_seconds: f64,
    /// Every repetition's per-item total.
    pub item_seconds_runs: Vec<f64>,
    /// Items solved per repetition.
    pub items: usize,
    pub failure: Option<String>,
}

impl MethodRun {
    fn failed(method: Method, split: &str, err: &Error) -> Self {
        Self {
            method,
            split: split.to_string(),
            n_test: 0,
            abs_error: AbsErrorSum::default(),
            abs_error_clipped: AbsErrorSum::default(),
            abs_error_rounded: AbsErrorSum::default(),
            misclassification: None,
            precompute_seconds: 0.0,
            item_seconds: 0.0,
            item_seconds_runs: Vec::new(),
            items: 0,
            failure: Some(err.to_string()),
        }
    }

    pub fn mae(&self) -> Option<f64> {
        self.abs_error.mae()
    }

    pub fn total_seconds(&self) -> f64 {
        self.precompute_seconds + self.item_seconds
    }
}

/// Per-split construction record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSetup {
    pub split: String,
    pub n_nodes: usize,
    pub n_items: usize,
    /// Heat-kernel bandwidth actually used.
    pub epsilon: f64,
    /// `‖λR + γKLR − K‖_F / ‖K‖_F`.
    pub relation_residual: f64,
    pub times: SetupTimes,
}

/// One method pooled over all splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub n_test: usize,
    pub global_mae: Option<f64>,
    pub global_mae_clipped: Option<f64>,
    pub global_mae_rounded: Option<f64>,
    pub precompute_seconds: f64,
    pub item_seconds: f64,
    pub items: usize,
    /// `item_seconds / Prop item_seconds`, when Prop ran.
    pub speedup_vs_prop: Option<f64>,
    pub failed: bool,
}

impl MethodSummary {
    pub fn total_seconds(&self) -> f64 {
        self.precompute_seconds + self.item_seconds
    }

    pub fn mean_item_seconds(&self) -> f64 {
        if self.items == 0 {
            0.0
        } else {
            self.item_seconds / self.items as f64
        }
    }
}

/// Result of [`run_benchmark`] or [`run_point_benchmark`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: PipelineConfig,
    pub axis: Axis,
    pub seed: Option<u64>,
    pub setups: Vec<SplitSetup>,
    pub runs: Vec<MethodRun>,
    pub summary: Vec<MethodSummary>,
}

impl BenchmarkReport {
    fn new(config: &PipelineConfig, axis: Axis, seed: Option<u64>) -> Self {
        Self {
            config: config.clone(),
            axis,
            seed,
            setups: Vec::new(),
            runs: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    fn summarize(&mut self, methods: &[Method]) {
        let mut summary: Vec<MethodSummary> = methods
            .iter()
            .map(|&method| {
                let runs: Vec<&MethodRun> = self.runs.iter().filter(|r| r.method == method).collect();
                let mut e = AbsErrorSum::default();
                let mut ec = AbsErrorSum::default();
                let mut er = AbsErrorSum::default();
                for r in &runs {
                    e.merge(r.abs_error);
                    ec.merge(r.abs_error_clipped);
                    er.merge(r.abs_error_rounded);
                }
                let failed = runs.iter().any(|r| r.failure.is_some());
                MethodSummary {
                    method,
                    n_test: e.count,
                    global_mae: if failed { None } else { e.mae() },
                    global_mae_clipped: if failed { None } else { ec.mae() },
                    global_mae_rounded: if failed { None } else { er.mae() },
                    precompute_seconds: runs.iter().map(|r| r.precompute_seconds).sum(),
                    item_seconds: runs.iter().map(|r| r.item_seconds).sum(),
                    items: runs.iter().map(|r| r.items).sum(),
                    speedup_vs_prop: None,
                    failed,
                }
            })
            .collect();
        let prop = summary
            .iter()
            .find(|s| s.method == Method::Prop && !s.failed)
            .map(|s| s.item_seconds);
        for s in &mut summary {
            if !s.failed {
                s.speedup_vs_prop = prop.map(|p| {
                    if s.method == Method::Prop {
                        1.0
                    } else {
                        s.item_seconds / p
                    }
                });
            }
        }
        self.summary = summary;
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// `movielens_mae.csv`: one row per (method, split) plus a pooled
    /// `global` row per method.
    pub fn write_mae_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        let rec = |w: &mut csv::Writer<fs::File>, row: Vec<String>| {
            w.write_record(row).map_err(|e| csv_err(path, e))
        };
        rec(
            &mut w,
            ["method", "split", "n_test", "mae", "mae_clipped", "mae_rounded", "failure"]
                .map(String::from)
                .to_vec(),
        )?;
        for r in &self.runs {
            rec(
                &mut w,
                vec![
                    r.method.to_string(),
                    r.split.clone(),
                    r.n_test.to_string(),
                    opt(r.abs_error.mae()),
                    opt(r.abs_error_clipped.mae()),
                    opt(r.abs_error_rounded.mae()),
                    r.failure.clone().unwrap_or_default(),
                ],
            )?;
        }
        for s in &self.summary {
            rec(
                &mut w,
                vec![
                    s.method.to_string(),
                    "global".into(),
                    s.n_test.to_string(),
                    opt(s.global_mae),
                    opt(s.global_mae_clipped),
                    opt(s.global_mae_rounded),
                    if s.failed { "failed".into() } else { String::new() },
                ],
            )?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// `table3.csv`: [`speedup_table`] rows.
    pub fn write_speedup_csv(&self, path: &Path) -> Result<()> {
        let rows = speedup_table(self)?;
        let mut w = csv_writer(path)?;
        w.write_record([
            "method",
            "precompute_seconds",
            "item_seconds",
            "mean_item_seconds",
            "total_seconds",
            "speedup_per_item",
            "speedup_total",
        ])
        .map_err(|e| csv_err(path, e))?;
        for r in rows {
            w.write_record([
                r.method.to_string(),
                r.precompute_seconds.to_string(),
                r.item_seconds.to_string(),
                r.mean_item_seconds.to_string(),
                r.total_seconds.to_string(),
                r.speedup_per_item.to_string(),
                r.speedup_total.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// `fig1h.csv`: one column per method, one row of pooled MAE.
    pub fn write_method_mae_row(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(self.summary.iter().map(|s| s.method.to_string()))
            .map_err(|e| csv_err(path, e))?;
        w.write_record(self.summary.iter().map(|s| opt(s.global_mae)))
            .map_err(|e| csv_err(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn check_methods(methods: &[Method]) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::invalid("methods must not be empty"));
    }
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(Error::invalid(format!("method {m} listed twice")));
        }
    }
    Ok(())
}

/// Runs every method on every split of a rating benchmark.
///
/// Features, graph and grams are built once per split. MAE is scored on the
/// test entries only and pooled across splits. A method that fails on a
/// split is recorded with its error; the others still run.
pub fn run_benchmark(
    config: &PipelineConfig,
    splits: &[SplitPair],
    methods: &[Method],
) -> Result<BenchmarkReport> {
    config.validate()?;
    check_methods(methods)?;
    let axis = config.features.axis;
    let mut report = BenchmarkReport::new(config, axis, None);
    for split in splits {
        let t = Instant::now();
        let features = build_features(&split.train, &config.features)?;
        let features_seconds = t.elapsed().as_secs_f64();
        let mut model = build_model(config, &features)?;
        model.setup.features_seconds = features_seconds;
        let (train, test) = match axis {
            Axis::UserBased => (split.train.clone(), split.test.clone()),
            Axis::ItemBased => (split.train.transpose(), split.test.transpose()),
        };
        report.setups.push(SplitSetup {
            split: split.name.clone(),
            n_nodes: model.graph.n(),
            n_items: train.n_items(),
            epsilon: model.graph.epsilon(),
            relation_residual: model.grams.relation_residual(),
            times: model.setup,
        });
        let mut eigen = EigenCache::new();
        for &method in methods {
            let run = rating_run(config, &model, &mut eigen, method, &split.name, &train, &test)
                .unwrap_or_else(|e| MethodRun::failed(method, &split.name, &e));
            report.runs.push(run);
        }
    }
    report.summarize(methods);
    Ok(report)
}

fn rating_run(
    config: &PipelineConfig,
    model: &Model,
    eigen: &mut EigenCache,
    method: Method,
    split: &str,
    train: &RatingMatrix,
    test: &RatingMatrix,
) -> Result<MethodRun> {
    let (state, precompute_seconds) = eigen.state(method, model)?;
    let mut predicted = None;
    let mut runs = Vec::with_capacity(config.timing_runs);
    for _ in 0..config.timing_runs {
        let p = predict_matrix(&state, train, config.clip_range())?;
        runs.push(p.total_item_seconds());
        predicted.get_or_insert(p);
    }
    let predicted = predicted.expect("timing_runs >= 1");
    let range = config.range;
    let mut run = MethodRun::failed(method, split, &Error::arg(""));
    run.failure = None;
    for r in test.iter() {
        let p = predicted.get(r.user, r.item);
        run.abs_error.add(p, r.value);
        run.abs_error_clipped.add(range.clamp(p), r.value);
        run.abs_error_rounded.add(range.clamp(p.round()), r.value);
    }
    run.n_test = test.len();
    run.precompute_seconds = precompute_seconds;
    run.item_seconds = median(runs.clone());
    run.item_seconds_runs = runs;
    run.items = train.n_items() - predicted.unlabeled_items.len();
    Ok(run)
}

/// A single signal over a point set: labels on a few nodes, truth on all.
#[derive(Debug, Clone)]
pub struct PointTask {
    pub features: FeatureSet,
    pub item: LabeledItem,
    /// True value at every node.
    pub truth: Vec<f64>,
    /// Nodes that are scored (the unlabeled ones).
    pub eval_idx: Vec<usize>,
}

impl PointTask {
    /// Labels `per_class` points of each ±1 class drawn with `seed`; the
    /// rest are scored.
    pub fn from_cloud(cloud: &PointCloud, per_class: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labeled = Vec::new();
        for class in [1.0, -1.0] {
            let members: Vec<usize> = (0..cloud.len()).filter(|&i| cloud.labels[i] == class).collect();
            if members.len() < per_class {
                return Err(Error::arg(format!(
                    "class {class} has {} points, fewer than {per_class}",
                    members.len()
                )));
            }
            let mut picked: Vec<usize> = sample(&mut rng, members.len(), per_class)
                .into_iter()
                .map(|k| members[k])
                .collect();
            picked.sort_unstable();
            labeled.extend(picked);
        }
        let y = labeled.iter().map(|&i| cloud.labels[i]).collect();
        let mut is_labeled = vec![false; cloud.len()];
        for &i in &labeled {
            is_labeled[i] = true;
        }
        Ok(Self {
            features: FeatureSet::from_points(cloud)?,
            item: LabeledItem::new(0, labeled, y)?,
            truth: cloud.labels.clone(),
            eval_idx: (0..cloud.len()).filter(|&i| !is_labeled[i]).collect(),
        })
    }

    /// Two-moons cloud with `per_class` labeled points per moon.
    pub fn two_moons(n_points: usize, noise: f64, per_class: usize, seed: u64) -> Result<Self> {
        let cloud = make_two_moons(n_points, noise, seed)?;
        Self::from_cloud(&cloud, per_class, seed)
    }

    fn score(&self, f: &[f64], run: &mut MethodRun, range: RatingRange) {
        let mut wrong = 0usize;
        for &i in &self.eval_idx {
            let (p, t) = (f[i], self.truth[i]);
            run.abs_error.add(p, t);
            run.abs_error_clipped.add(range.clamp(p), t);
            run.abs_error_rounded.add(range.clamp(p.round()), t);
            if p.signum() != t.signum() || p == 0.0 {
                wrong += 1;
            }
        }
        run.n_test = self.eval_idx.len();
        run.misclassification = (!self.eval_idx.is_empty()).then(|| wrong as f64 / self.eval_idx.len() as f64);
    }
}

/// Every method on one [`PointTask`], scored on its unlabeled nodes.
pub fn run_point_benchmark(
    config: &PipelineConfig,
    task: &PointTask,
    methods: &[Method],
    seed: Option<u64>,
) -> Result<BenchmarkReport> {
    config.validate()?;
    check_methods(methods)?;
    let model = build_model(config, &task.features)?;
    let mut report = BenchmarkReport::new(config, task.features.axis(), seed);
    report.setups.push(SplitSetup {
        split: "points".into(),
        n_nodes: model.graph.n(),
        n_items: 1,
        epsilon: model.graph.epsilon(),
        relation_residual: model.grams.relation_residual(),
        times: model.setup,
    });
    let mut eigen = EigenCache::new();
    for &method in methods {
        let run = point_run(config, &model, &mut eigen, method, task)
            .unwrap_or_else(|e| MethodRun::failed(method, "points", &e));
        report.runs.push(run);
    }
    report.summarize(methods);
    Ok(report)
}

/// Prediction over all nodes of a point task, for export.
pub fn predict_points(config: &PipelineConfig, task: &PointTask, method: Method) -> Result<(Vec<f64>, f64)> {
    let model = build_model(config, &task.features)?;
    let st = precompute(method, &model.grams, &model.graph)?;
    let p = predict_item(&st, &task.item)?;
    Ok((p.f_star, model.graph.epsilon()))
}

fn point_run(
    config: &PipelineConfig,
    model: &Model,
    eigen: &mut EigenCache,
    method: Method,
    task: &PointTask,
) -> Result<MethodRun> {
    let (state, precompute_seconds) = eigen.state(method, model)?;
    let mut f = None;
    let mut runs = Vec::new();
    for _ in 0..config.timing_runs {
        let p = predict_item(&state, &task.item)?;
        runs.push(p.seconds);
        f.get_or_insert(p.f_star);
    }
    let mut run = MethodRun::failed(method, "points", &Error::arg(""));
    run.failure = None;
    task.score(&f.expect("timing_runs >= 1"), &mut run, config.range);
    run.precompute_seconds = precompute_seconds;
    run.item_seconds = median(runs.clone());
    run.item_seconds_runs = runs;
    run.items = 1;
    Ok(run)
}

/// One row of a bandwidth sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kb: usize,
    pub gba_mae: f64,
    pub gba_seconds: f64,
    /// Prop's MAE, the same in every row.
    pub prop_mae: f64,
    pub prop_seconds: f64,
}

/// Result of [`kb_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// Heat-kernel bandwidth of the graph, `None` when nothing was built.
    pub epsilon: Option<f64>,
    pub rows: Vec<SweepRow>,
}

/// GBa MAE and per-item time over `kb_values`, from one eigensystem, with
/// Prop as the bandwidth-independent reference.
pub fn kb_sweep(config: &PipelineConfig, task: &PointTask, kb_values: &[usize]) -> Result<SweepTable> {
    config.validate()?;
    if kb_values.is_empty() {
        return Ok(SweepTable {
            epsilon: None,
            rows: Vec::new(),
        });
    }
    let n = task.features.len();
    if let Some(&kb) = kb_values.iter().find(|&&kb| kb == 0 || kb > n) {
        return Err(Error::arg(format!("k_b must be in 1..={n}, got {kb}")));
    }
    let model = build_model(config, &task.features)?;
    let score = |f: &[f64]| -> Result<f64> {
        let p: Vec<f64> = task.eval_idx.iter().map(|&i| f[i]).collect();
        let t: Vec<f64> = task.eval_idx.iter().map(|&i| task.truth[i]).collect();
        mae(&p, &t)
    };
    let prop = precompute(Method::Prop, &model.grams, &model.graph)?;
    let pp = predict_item(&prop, &task.item)?;
    let prop_mae = score(&pp.f_star)?;
    let eigen = LaplacianEigen::compute(&model.graph)?;
    let rows = kb_values
        .iter()
        .map(|&kb| {
            let st = precompute_gba_with(kb, &model.grams, &model.graph, &eigen)?;
            let p = predict_item(&st, &task.item)?;
            Ok(SweepRow {
                kb,
                gba_mae: score(&p.f_star)?,
                gba_seconds: p.seconds,
                prop_mae,
                prop_seconds: pp.seconds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        epsilon: Some(model.graph.epsilon()),
        rows,
    })
}

/// Writes sweep rows as `kb,gba_mae,prop_mae,gba_seconds,prop_seconds`.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["kb", "gba_mae", "prop_mae", "gba_seconds", "prop_seconds"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.kb.to_string(),
            r.gba_mae.to_string(),
            r.prop_mae.to_string(),
            r.gba_seconds.to_string(),
            r.prop_seconds.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `alternative / proposed`.
pub fn speedup_factor(alternative_seconds: f64, proposed_seconds: f64) -> f64 {
    alternative_seconds / proposed_seconds
}

/// One row of [`speedup_table`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub method: Method,
    pub precompute_seconds: f64,
    pub item_seconds: f64,
    pub mean_item_seconds: f64,
    pub total_seconds: f64,
    /// Per-item phase relative to Prop.
    pub speedup_per_item: f64,
    /// Precompute plus per-item phase relative to Prop.
    pub speedup_total: f64,
}

/// Speedup of Prop over every method that ran, Prop's own row being 1.
pub fn speedup_table(report: &BenchmarkReport) -> Result<Vec<SpeedupRow>> {
    let prop = report
        .summary_for(Method::Prop)
        .filter(|s| !s.failed)
        .ok_or_else(|| Error::arg("speedup table needs a successful Prop row"))?;
    Ok(report
        .summary
        .iter()
        .filter(|s| !s.failed)
        .map(|s| {
            let own = s.method == Method::Prop;
            SpeedupRow {
                method: s.method,
                precompute_seconds: s.precompute_seconds,
                item_seconds: s.item_seconds,
                mean_item_seconds: s.mean_item_seconds(),
                total_seconds: s.total_seconds(),
                speedup_per_item: if own { 1.0 } else { speedup_factor(s.item_seconds, prop.item_seconds) },
                speedup_total: if own {
                    1.0
                } else {
                    speedup_factor(s.total_seconds(), prop.total_seconds())
                },
            }
        })
        .collect())
}

/// Shape of a synthetic rating benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    /// Training ratings per item.
    pub labels_per_item: usize,
    /// Test ratings per item.
    pub test_per_item: usize,
    /// Latent dimension of the generating low-rank model.
    pub rank: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_users: 1000,
            n_items: 500,
            labels_per_item: 10,
            test_per_item: 2,
            rank: 4,
            seed: 7,
        }
    }
}

/// Integer ratings in `[1, 5]` from a noisy low-rank model; every user is
/// given at least one training rating so no feature row is empty.
pub fn synthetic_split(spec: &SyntheticSpec) -> Result<SplitPair> {
    let SyntheticSpec {
        n_users,
        n_items,
        labels_per_item,
        test_per_item,
        rank,
        seed,
    } = *spec;
    if n_users == 0 || n_items == 0 || rank == 0 {
        return Err(Error::arg("synthetic sizes must be positive"));
    }
    if labels_per_item == 0 || labels_per_item + test_per_item > n_users {
        return Err(Error::arg(format!(
            "{labels_per_item} train + {test_per_item} test ratings per item exceed {n_users} users"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let scale = 1.0 / (rank as f64).sqrt();
    let users: Vec<Vec<f64>> = (0..n_users)
        .map(|_| (0..rank).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let items: Vec<Vec<f64>> = (0..n_items)
        .map(|_| (0..rank).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let rate = |u: usize, i: usize, rng: &mut ChaCha8Rng| {
        let dot: f64 = users[u].iter().zip(&items[i]).map(|(a, b)| a * b).sum();
        (3.0 + dot * scale + 0.3 * normal.sample(rng)).round().clamp(1.0, 5.0)
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut covered = vec![false; n_users];
    for i in 0..n_items {
        let picked = sample(&mut rng, n_users, labels_per_item + test_per_item).into_vec();
        for (k, &u) in picked.iter().enumerate() {
            let r = Rating::new(u, i, rate(u, i, &mut rng));
            if k < labels_per_item {
                covered[u] = true;
                train.push(r);
            } else {
                test.push(r);
            }
        }
    }
    let taken: std::collections::HashSet<(usize, usize)> =
        train.iter().chain(&test).map(|r| (r.user, r.item)).collect();
    for (u, _) in covered.iter().enumerate().filter(|(_, &c)| !c) {
        loop {
            let i = rng.random_range(0..n_items);
            if !taken.contains(&(u, i)) {
                train.push(Rating::new(u, i, rate(u, i, &mut rng)));
                break;
            }
        }
    }
    let range = RatingRange::default();
    SplitPair::new(
        "synthetic",
        RatingMatrix::new(n_users, n_items, train, range)?,
        RatingMatrix::new(n_users, n_items, test, range)?,
    )
}
