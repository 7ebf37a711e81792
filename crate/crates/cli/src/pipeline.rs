//! Pipeline stages shared by the subcommands and the experiment driver.
//! Every artifact lands at a path derived from the output root, and every
//! random stream is derived from the master seed, so reruns are byte-stable.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use posepatch::attack::{optimize_patch, Patch, TransformDistribution};
use posepatch::data::{rank_target_classes, Ranking, RankingConfig, SceneBank, Tier};
use posepatch::eval::{mast, run_grid, run_sweep, trapezoid_mean, BasePose, GridResult, GridSpec, ParamKind, SweepResult, SweepSpec};
use posepatch::io::{load_patch, quantize, save_patch, PatchMeta};
use posepatch::model::{train_classifier, TinyConvNet, TrainReport};
use posepatch::render::Image;
use posepatch::seeds::{derive_seed, stage_seed};
use serde::{Deserialize, Serialize};

use crate::config::{support_key, support_label, ExperimentConfig, Family, Targets};
use crate::csvio::{grid_rows, sweep_rows, write_rows, MastRow};
use crate::svg::{Heatmap, LinePlot, Series};

/// Output layout under one root directory.
#[derive(Debug, Clone)]
pub struct Paths {
    pub root: PathBuf,
}

impl Paths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Paths { root: root.into() }
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model").join("model.bin")
    }
    pub fn metrics(&self) -> PathBuf {
        self.root.join("model").join("metrics.json")
    }
    pub fn ranking(&self) -> PathBuf {
        self.root.join("ranking.json")
    }
    pub fn patch(&self, d: &TransformDistribution, class: usize) -> PathBuf {
        self.root.join("patches").join(support_key(d)).join(format!("class_{class:02}.png"))
    }
    pub fn family(&self, f: Family) -> PathBuf {
        self.root.join(f.name())
    }
    pub fn result_csv(&self, f: Family, d: &TransformDistribution, class: usize) -> PathBuf {
        self.family(f).join("results").join(format!("{}_class_{class:02}.csv", support_key(d)))
    }
    pub fn mast_csv(&self, f: Family) -> PathBuf {
        self.family(f).join("mast.csv")
    }
    pub fn table(&self, f: Family) -> PathBuf {
        self.family(f).join("table.md")
    }
    pub fn plots(&self, f: Family) -> PathBuf {
        self.family(f).join("plots")
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).with_context(|| format!("cannot create {}", p.display()))?;
    }
    Ok(())
}

pub fn data_seed(cfg: &ExperimentConfig) -> u64 {
    stage_seed(cfg.seed, "data")
}

pub fn train_seed(cfg: &ExperimentConfig) -> u64 {
    stage_seed(cfg.seed, "train")
}

pub fn ranking_seed(cfg: &ExperimentConfig) -> u64 {
    stage_seed(cfg.seed, "rank")
}

/// Keyed by the support itself rather than the family, so a support shared
/// between families (e.g. the fixed reference pose) yields one patch.
pub fn patch_seed(cfg: &ExperimentConfig, d: &TransformDistribution, class: usize) -> u64 {
    derive_seed(
        stage_seed(cfg.seed, "patch"),
        &[
            d.yaw_max_deg.to_bits(),
            d.roll_max_deg.to_bits(),
            d.depth_min.to_bits(),
            d.depth_max.to_bits(),
            d.side.to_bits(),
            d.randomize_location as u64,
            class as u64,
        ],
    )
}

/// Sweeps and grids of one class share scenes and locations.
pub fn eval_seed(cfg: &ExperimentConfig, class: usize) -> u64 {
    derive_seed(stage_seed(cfg.seed, "eval"), &[class as u64])
}

pub fn scene_bank(cfg: &ExperimentConfig) -> Result<SceneBank> {
    Ok(SceneBank::generate(&cfg.data, data_seed(cfg))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub val_accuracy: f64,
    pub accuracy_gate: f64,
    pub passed: bool,
    pub epoch_loss: Vec<f64>,
    pub seed: u64,
    pub param_count: usize,
}

pub fn train_model(cfg: &ExperimentConfig, bank: &SceneBank, paths: &Paths) -> Result<(TinyConvNet, TrainMetrics)> {
    let seed = train_seed(cfg);
    let (net, TrainReport { epoch_loss, val_accuracy }) =
        train_classifier(&bank.train, &bank.val, cfg.data.num_classes, &cfg.train_config(seed))?;
    let metrics = TrainMetrics {
        val_accuracy,
        accuracy_gate: cfg.train.accuracy_gate,
        passed: val_accuracy >= cfg.train.accuracy_gate,
        epoch_loss,
        seed,
        param_count: net.params().len(),
    };
    ensure_parent(&paths.model())?;
    net.save(&paths.model())?;
    fs::write(paths.metrics(), serde_json::to_string_pretty(&metrics)? + "\n")?;
    Ok((net, metrics))
}

pub fn load_model(cfg: &ExperimentConfig, path: &Path) -> Result<TinyConvNet> {
    if !path.exists() {
        bail!("no trained model at {}; run `posepatch train-model` first (or pass --model)", path.display());
    }
    let net = TinyConvNet::load(path).with_context(|| format!("cannot load model {}", path.display()))?;
    if net.num_classes() != cfg.data.num_classes || net.input_size() != cfg.data.image_size {
        bail!(
            "model {} has {} classes at {}px, config expects {} at {}px",
            path.display(),
            net.num_classes(),
            net.input_size(),
            cfg.data.num_classes,
            cfg.data.image_size
        );
    }
    Ok(net)
}

pub fn rank_targets(cfg: &ExperimentConfig, net: &TinyConvNet, bank: &SceneBank, paths: &Paths) -> Result<Ranking> {
    let r = &cfg.ranking;
    let rc = RankingConfig {
        n_batches: r.n_batches,
        batch_size: r.batch_size,
        eval_images: r.eval_images,
        tier_size: r.tier_size,
        seed: ranking_seed(cfg),
    };
    let ranking = rank_target_classes(net, bank, &cfg.camera(), &cfg.reference_support(), &cfg.attack_config(0), &rc)?;
    ensure_parent(&paths.ranking())?;
    fs::write(paths.ranking(), serde_json::to_string_pretty(&ranking)? + "\n")?;
    Ok(ranking)
}

pub fn load_ranking(path: &Path) -> Result<Ranking> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read ranking {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

/// Named groups of target classes, in table-row order.
pub fn target_groups(cfg: &ExperimentConfig, ranking: Option<&Ranking>) -> Result<Vec<(String, Vec<usize>)>> {
    match &cfg.targets {
        Targets::Classes(c) => Ok(vec![("custom".to_string(), c.clone())]),
        Targets::Tiers(tiers) => {
            let Some(r) = ranking else { bail!("targets are tiers but no ranking is available; run `posepatch rank-targets`") };
            if r.tiers.high.len() != cfg.ranking.tier_size {
                bail!("ranking tier size {} differs from config {}", r.tiers.high.len(), cfg.ranking.tier_size);
            }
            Ok(tiers.iter().map(|&t: &Tier| (t.name().to_string(), r.tiers.get(t).to_vec())).collect())
        }
    }
}

/// Quantizes in memory exactly as the PNG export does, so a freshly trained
/// patch and one reloaded from disk evaluate identically.
fn quantized(mut texture: Image) -> Image {
    for v in &mut texture.data {
        *v = quantize(*v) as f64 / 255.0;
    }
    texture
}

/// Trains (or reuses a matching on-disk) patch for `class` under `support`.
/// Returns the patch and whether it was freshly optimized.
pub fn ensure_patch(
    cfg: &ExperimentConfig,
    net: &TinyConvNet,
    bank: &SceneBank,
    paths: &Paths,
    support: &TransformDistribution,
    class: usize,
) -> Result<(Patch, bool)> {
    let path = paths.patch(support, class);
    let config = cfg.attack_config(patch_seed(cfg, support, class));
    let k = cfg.camera();
    if path.exists() {
        if let Ok(p) = load_patch(&path) {
            if p.target == class && p.support == *support && p.config == config && p.camera == k {
                return Ok((p, false));
            }
        }
    }
    let run = optimize_patch(net, &bank.attack.images(), class, support, &config, &k)?;
    let mut patch = run.patch;
    patch.texture = quantized(patch.texture);
    ensure_parent(&path)?;
    save_patch(&patch, &path)?;
    Ok((patch, true))
}

pub fn base_pose(cfg: &ExperimentConfig) -> BasePose {
    BasePose { yaw_deg: 0.0, roll_deg: 0.0, depth: cfg.patch.depth, side: cfg.patch.side, randomize_location: cfg.patch.randomize_location }
}

pub fn sweep_spec(cfg: &ExperimentConfig, kind: ParamKind, class: usize) -> SweepSpec {
    let r = cfg.sweep_range(kind);
    SweepSpec {
        kind,
        start: r.start,
        end: r.end,
        n_intervals: r.n_intervals,
        images_per_point: cfg.sweeps.images_per_point,
        base: base_pose(cfg),
        seed: eval_seed(cfg, class),
    }
}

pub fn grid_spec(cfg: &ExperimentConfig, class: usize) -> GridSpec {
    let g = &cfg.grid;
    GridSpec {
        yaw_range: (g.yaw.start, g.yaw.end),
        roll_range: (g.roll.start, g.roll.end),
        yaw_intervals: g.yaw.n_intervals,
        roll_intervals: g.roll.n_intervals,
        images_per_cell: g.images_per_cell,
        depth: cfg.patch.depth,
        side: cfg.patch.side,
        randomize_location: cfg.patch.randomize_location,
        seed: eval_seed(cfg, class),
    }
}

pub fn sweep_patch(cfg: &ExperimentConfig, net: &TinyConvNet, bank: &SceneBank, patch: &Patch, kind: ParamKind) -> Result<SweepResult> {
    let spec = sweep_spec(cfg, kind, patch.target);
    Ok(run_sweep(&patch.texture, patch.target, net, &bank.test.images(), &spec, &cfg.camera())?)
}

pub fn grid_patch(cfg: &ExperimentConfig, net: &TinyConvNet, bank: &SceneBank, patch: &Patch) -> Result<GridResult> {
    Ok(run_grid(&patch.texture, patch.target, net, &bank.test.images(), &grid_spec(cfg, patch.target), &cfg.camera())?)
}

/// Work an experiment will do, computable without running it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub optimizations: usize,
    pub optimization_steps: usize,
    pub scenes_per_step: usize,
    pub points_per_patch: usize,
    pub images_per_point: usize,
    pub classifier_evaluations: usize,
}

pub fn plan(cfg: &ExperimentConfig, family: Family) -> Plan {
    let optimizations = cfg.supports_of(family).len() * cfg.target_count();
    let (points_per_patch, images_per_point) = match family.sweep_kind() {
        Some(kind) => (cfg.sweep_range(kind).n_intervals + 1, cfg.sweeps.images_per_point),
        None => ((cfg.grid.yaw.n_intervals + 1) * (cfg.grid.roll.n_intervals + 1), cfg.grid.images_per_cell),
    };
    Plan {
        optimizations,
        optimization_steps: cfg.attack.n_batches,
        scenes_per_step: cfg.attack.batch_size,
        points_per_patch,
        images_per_point,
        classifier_evaluations: optimizations * points_per_patch * images_per_point,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub optimizations: usize,
    pub fresh_optimizations: usize,
    pub classifier_evaluations: usize,
}

/// Pose results for one patch.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Sweep(SweepResult),
    Grid(GridResult),
}

impl Outcome {
    /// Trapezoidal mean over the sweep range, or over both grid axes.
    pub fn mean_success(&self) -> f64 {
        match self {
            Outcome::Sweep(s) => trapezoid_mean(&s.rates),
            Outcome::Grid(g) => {
                let rows: Vec<f64> = g.rates.iter().map(|r| trapezoid_mean(r)).collect();
                trapezoid_mean(&rows)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub support: TransformDistribution,
    pub column: usize,
    pub group: usize,
    pub class: usize,
    pub outcome: Outcome,
}

/// Everything one family run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub family: Family,
    pub columns: Vec<String>,
    pub groups: Vec<(String, Vec<usize>)>,
    /// `table[group][column]`: tier-mean mAST.
    pub table: Vec<Vec<f64>>,
    pub jobs: Vec<Job>,
    pub counters: Counters,
}

impl ExperimentSummary {
    pub fn value(&self, group: &str, column: usize) -> Option<f64> {
        self.groups.iter().position(|(g, _)| g == group).map(|i| self.table[i][column])
    }

    /// Tier-mean sweep curve `(phis, rates)` for one column.
    pub fn mean_curve(&self, group: usize, column: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        let sweeps: Vec<&SweepResult> = self
            .jobs
            .iter()
            .filter(|j| j.group == group && j.column == column)
            .filter_map(|j| match &j.outcome {
                Outcome::Sweep(s) => Some(s),
                Outcome::Grid(_) => None,
            })
            .collect();
        let first = sweeps.first()?;
        let n = sweeps.len() as f64;
        let rates = (0..first.phis.len()).map(|i| sweeps.iter().map(|s| s.rates[i]).sum::<f64>() / n).collect();
        Some((first.phis.clone(), rates))
    }

    /// Tier-mean grid for one column.
    pub fn mean_grid(&self, group: usize, column: usize) -> Option<GridResult> {
        let grids: Vec<&GridResult> = self
            .jobs
            .iter()
            .filter(|j| j.group == group && j.column == column)
            .filter_map(|j| match &j.outcome {
                Outcome::Grid(g) => Some(g),
                Outcome::Sweep(_) => None,
            })
            .collect();
        let first = *grids.first()?;
        let n = grids.len() as f64;
        let mut mean = first.clone();
        for (r, row) in mean.rates.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = grids.iter().map(|g| g.rates[r][c]).sum::<f64>() / n;
            }
        }
        Some(mean)
    }

    /// Markdown table: rows are target groups, columns training supports.
    pub fn markdown(&self) -> String {
        render_table(self.family, &self.columns, &self.groups.iter().map(|g| g.0.clone()).zip(self.table.clone()).collect::<Vec<_>>())
    }
}

pub fn render_table(family: Family, columns: &[String], rows: &[(String, Vec<f64>)]) -> String {
    let metric = match family {
        Family::Yaw => "mAST_ψ",
        Family::Roll => "mAST_θ",
        Family::Loom => "mAST_z",
        Family::Grid => "mean success over the yaw × roll grid",
    };
    let mut out = format!("{metric} by training support ({} experiment)\n\n| Targets |", family.name());
    for c in columns {
        out.push_str(&format!(" {c} |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(columns.len()));
    out.push('\n');
    for (name, vals) in rows {
        out.push_str(&format!("| {name} |"));
        for v in vals {
            out.push_str(&format!(" {v:.2} |"));
        }
        out.push('\n');
    }
    out
}

/// Optimizes one patch per (support, target), evaluates it, and writes
/// per-patch CSVs, the mAST table (CSV + markdown) and SVG plots.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    family: Family,
    net: &TinyConvNet,
    bank: &SceneBank,
    ranking: Option<&Ranking>,
    paths: &Paths,
) -> Result<ExperimentSummary> {
    let supports = cfg.supports_of(family);
    let columns: Vec<String> = supports.iter().map(|d| support_label(family, d)).collect();
    let groups = target_groups(cfg, ranking)?;
    let mut counters = Counters::default();
    let mut jobs = Vec::new();
    for (column, support) in supports.iter().enumerate() {
        for (group, (_, classes)) in groups.iter().enumerate() {
            for &class in classes {
                let (patch, fresh) = ensure_patch(cfg, net, bank, paths, support, class)?;
                counters.optimizations += 1;
                counters.fresh_optimizations += fresh as usize;
                let csv = paths.result_csv(family, support, class);
                ensure_parent(&csv)?;
                let outcome = match family.sweep_kind() {
                    Some(kind) => {
                        let s = sweep_patch(cfg, net, bank, &patch, kind)?;
                        write_rows(&csv, &sweep_rows(&s))?;
                        counters.classifier_evaluations += s.phis.len() * s.n_images;
                        Outcome::Sweep(s)
                    }
                    None => {
                        let g = grid_patch(cfg, net, bank, &patch)?;
                        write_rows(&csv, &grid_rows(&g))?;
                        counters.classifier_evaluations += g.yaws.len() * g.rolls.len() * g.n_images;
                        Outcome::Grid(g)
                    }
                };
                jobs.push(Job { support: *support, column, group, class, outcome });
            }
        }
    }

    let mut table = vec![vec![0.0; supports.len()]; groups.len()];
    let mut rows = Vec::new();
    for (gi, (gname, classes)) in groups.iter().enumerate() {
        for (ci, col) in columns.iter().enumerate() {
            let here: Vec<&Job> = jobs.iter().filter(|j| j.group == gi && j.column == ci).collect();
            let value = match family.sweep_kind() {
                Some(_) => {
                    let sweeps: Vec<SweepResult> = here
                        .iter()
                        .filter_map(|j| match &j.outcome {
                            Outcome::Sweep(s) => Some(s.clone()),
                            Outcome::Grid(_) => None,
                        })
                        .collect();
                    mast(&sweeps)?.mast
                }
                None => {
                    let mut sorted: Vec<&&Job> = here.iter().collect();
                    sorted.sort_by_key(|j| j.class);
                    sorted.iter().map(|j| j.outcome.mean_success()).sum::<f64>() / sorted.len() as f64
                }
            };
            table[gi][ci] = value;
            for &class in classes {
                let j = here.iter().find(|j| j.class == class).expect("job per class");
                rows.push(MastRow { target_class: Some(class), tier: gname.clone(), train_support: col.clone(), mast: j.outcome.mean_success() });
            }
            rows.push(MastRow { target_class: None, tier: gname.clone(), train_support: col.clone(), mast: value });
        }
    }
    let summary = ExperimentSummary { family, columns, groups, table, jobs, counters };
    write_rows(&paths.mast_csv(family), &rows)?;
    fs::write(paths.table(family), summary.markdown())?;
    write_plots(cfg, &summary, paths)?;
    Ok(summary)
}

fn support_interval(family: Family, d: &TransformDistribution) -> Option<(f64, f64)> {
    match family {
        Family::Yaw => Some((-d.yaw_max_deg, d.yaw_max_deg)),
        Family::Roll => Some((-d.roll_max_deg, d.roll_max_deg)),
        Family::Loom => Some((d.depth_min, d.depth_max)),
        Family::Grid => None,
    }
}

fn axis_label(kind: ParamKind) -> &'static str {
    match kind {
        ParamKind::Yaw => "yaw ψ (degrees)",
        ParamKind::Roll => "roll θ (degrees)",
        ParamKind::Loom => "depth z (world units)",
    }
}

fn write_plots(cfg: &ExperimentConfig, s: &ExperimentSummary, paths: &Paths) -> Result<()> {
    let dir = paths.plots(s.family);
    fs::create_dir_all(&dir)?;
    let supports = cfg.supports_of(s.family);
    for (gi, (gname, _)) in s.groups.iter().enumerate() {
        match s.family.sweep_kind() {
            Some(kind) => {
                let series = supports
                    .iter()
                    .enumerate()
                    .filter_map(|(ci, d)| {
                        s.mean_curve(gi, ci).map(|(xs, ys)| Series {
                            label: s.columns[ci].clone(),
                            xs,
                            ys,
                            support: support_interval(s.family, d),
                        })
                    })
                    .collect();
                let plot = LinePlot {
                    title: format!("{} sweep, {gname} targets", s.family.name()),
                    x_label: axis_label(kind).to_string(),
                    y_label: "attack success rate".to_string(),
                    series,
                };
                fs::write(dir.join(format!("{gname}.svg")), plot.render())?;
            }
            None => {
                for (ci, d) in supports.iter().enumerate() {
                    let Some(g) = s.mean_grid(gi, ci) else { continue };
                    let map = Heatmap {
                        title: format!("{gname} targets, trained on {}", s.columns[ci]),
                        x_label: "yaw ψ (degrees)".to_string(),
                        y_label: "roll θ (degrees)".to_string(),
                        xs: g.yaws,
                        ys: g.rolls,
                        values: g.rates,
                    };
                    fs::write(dir.join(format!("heatmap_{}_{gname}.svg", support_key(d))), map.render())?;
                }
            }
        }
    }
    Ok(())
}

/// Sidecar of the patch at `path`, for commands that take patch files.
pub fn patch_meta(path: &Path) -> Result<PatchMeta> {
    Ok(PatchMeta::of(&load_patch(path).with_context(|| format!("cannot load patch {}", path.display()))?))
}
