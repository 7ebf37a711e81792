//! Versioned JSON experiment configuration with desk and full presets.

use std::path::{Path, PathBuf};

use posepatch::attack::{AttackConfig, TransformDistribution};
use posepatch::data::{max_classes, DataConfig, Tier};
use posepatch::eval::ParamKind;
use posepatch::geometry::{intrinsics_from_fov, CameraIntrinsics};
use posepatch::model::TrainConfig;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSettings {
    pub fov_deg: f64,
    pub image_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// `train-model` fails when validation accuracy ends below this.
    pub accuracy_gate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingSettings {
    pub n_batches: usize,
    pub batch_size: usize,
    pub eval_images: usize,
    pub tier_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSettings {
    pub n_batches: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub texture_size: usize,
}

/// Reference pose shared by training supports and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSettings {
    pub side: f64,
    pub depth: f64,
    pub randomize_location: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub end: f64,
    pub n_intervals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub yaw: Range,
    pub roll: Range,
    pub loom: Range,
    pub images_per_point: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub yaw: Range,
    pub roll: Range,
    pub images_per_cell: usize,
}

/// Training supports per family. Yaw and roll entries are half-ranges in
/// degrees; loom entries are depth intervals; grid entries pair a yaw and a
/// roll half-range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Supports {
    pub yaw: Vec<f64>,
    pub roll: Vec<f64>,
    pub loom: Vec<[f64; 2]>,
    pub grid: Vec<[f64; 2]>,
}

/// Which classes get patches: ranked tiers, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Targets {
    Tiers(Vec<Tier>),
    Classes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub camera: CameraSettings,
    pub data: DataConfig,
    pub train: TrainSettings,
    pub ranking: RankingSettings,
    pub targets: Targets,
    pub attack: AttackSettings,
    pub patch: PatchSettings,
    pub sweeps: SweepSettings,
    pub grid: GridSettings,
    pub supports: Supports,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Yaw,
    Roll,
    Loom,
    Grid,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Yaw, Family::Roll, Family::Loom, Family::Grid];

    pub fn name(self) -> &'static str {
        match self {
            Family::Yaw => "yaw",
            Family::Roll => "roll",
            Family::Loom => "loom",
            Family::Grid => "grid",
        }
    }

    pub fn sweep_kind(self) -> Option<ParamKind> {
        match self {
            Family::Yaw => Some(ParamKind::Yaw),
            Family::Roll => Some(ParamKind::Roll),
            Family::Loom => Some(ParamKind::Loom),
            Family::Grid => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Halved budgets: 100x32 optimization batches, 128 images per point.
    Desk,
    /// 200x32 batches, 320 images per point.
    Full,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let desk = ExperimentConfig {
            version: CONFIG_VERSION,
            seed: 0,
            out_dir: PathBuf::from("runs/desk"),
            camera: CameraSettings { fov_deg: 60.0, image_size: 64 },
            data: DataConfig::default(),
            train: {
                let t = TrainConfig::default();
                TrainSettings { epochs: t.epochs, lr: t.lr, momentum: t.momentum, batch_size: t.batch_size, accuracy_gate: 0.9 }
            },
            ranking: RankingSettings { n_batches: 25, batch_size: 32, eval_images: 128, tier_size: 3 },
            targets: Targets::Tiers(vec![Tier::High, Tier::Mid, Tier::Low]),
            attack: {
                let a = AttackConfig::default();
                AttackSettings {
                    n_batches: 100,
                    batch_size: 32,
                    // the halved step budget gets a larger step
                    step_size: 3e-2,
                    beta1: a.beta1,
                    beta2: a.beta2,
                    epsilon: a.epsilon,
                    texture_size: a.texture_size,
                }
            },
            patch: PatchSettings { side: 2.0, depth: 7.0, randomize_location: true },
            sweeps: SweepSettings {
                yaw: Range { start: -90.0, end: 90.0, n_intervals: 60 },
                roll: Range { start: -180.0, end: 180.0, n_intervals: 60 },
                loom: Range { start: 2.0, end: 12.0, n_intervals: 60 },
                images_per_point: 128,
            },
            grid: GridSettings {
                yaw: Range { start: -90.0, end: 90.0, n_intervals: 20 },
                roll: Range { start: -180.0, end: 180.0, n_intervals: 20 },
                images_per_cell: 128,
            },
            supports: Supports {
                yaw: vec![0.0, 20.0, 40.0, 60.0],
                roll: vec![0.0, 45.0, 90.0, 180.0],
                loom: vec![[7.0, 7.0], [6.0, 8.0], [5.0, 9.0], [4.0, 10.0]],
                grid: vec![[0.0, 0.0], [20.0, 45.0], [40.0, 90.0], [60.0, 180.0]],
            },
        };
        match preset {
            Preset::Desk => desk,
            Preset::Full => ExperimentConfig {
                out_dir: PathBuf::from("runs/full"),
                attack: AttackSettings { n_batches: 200, step_size: 1e-2, ..desk.attack },
                sweeps: SweepSettings { images_per_point: 320, ..desk.sweeps },
                grid: GridSettings { images_per_cell: 320, ..desk.grid },
                ..desk
            },
        }
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version)));
        }
        if !(self.camera.fov_deg > 0.0 && self.camera.fov_deg < 180.0) {
            return Err(bad("camera.fov_deg must lie in (0, 180)"));
        }
        if self.camera.image_size != self.data.image_size {
            return Err(bad("camera.image_size must equal data.image_size"));
        }
        if self.data.image_size == 0 || self.data.image_size % 4 != 0 {
            return Err(bad("data.image_size must be a positive multiple of 4"));
        }
        let k = self.data.num_classes;
        if k < 2 || k > max_classes() {
            return Err(bad(format!("data.num_classes must be in 2..={}", max_classes())));
        }
        let d = &self.data;
        if [d.train_per_class, d.val_per_class, d.attack_per_class, d.test_per_class].contains(&0) {
            return Err(bad("every data split needs at least one scene per class"));
        }
        let t = &self.train;
        if t.batch_size == 0 || !(t.lr >= 0.0) || !(0.0..1.0).contains(&t.momentum) || !(0.0..=1.0).contains(&t.accuracy_gate) {
            return Err(bad("train settings out of range"));
        }
        let r = &self.ranking;
        if r.n_batches == 0 || r.batch_size == 0 || r.eval_images == 0 || r.tier_size == 0 || 3 * r.tier_size > k {
            return Err(bad("ranking needs positive budgets and 3 * tier_size <= num_classes"));
        }
        match &self.targets {
            Targets::Tiers(t) if t.is_empty() => return Err(bad("targets.tiers is empty")),
            Targets::Classes(c) if c.is_empty() => return Err(bad("targets.classes is empty")),
            Targets::Classes(c) => {
                if let Some(bad_class) = c.iter().find(|&&c| c >= k) {
                    return Err(bad(format!("target class {bad_class} >= num_classes {k}")));
                }
            }
            _ => {}
        }
        self.attack_config(0).validate().map_err(|e| bad(e.to_string()))?;
        let p = &self.patch;
        if !(p.side > 0.0 && p.depth > 0.0) {
            return Err(bad("patch side and depth must be positive"));
        }
        for (name, range) in [
            ("sweeps.yaw", self.sweeps.yaw),
            ("sweeps.roll", self.sweeps.roll),
            ("sweeps.loom", self.sweeps.loom),
            ("grid.yaw", self.grid.yaw),
            ("grid.roll", self.grid.roll),
        ] {
            if !(range.start < range.end) || range.n_intervals == 0 {
                return Err(bad(format!("{name} needs start < end and n_intervals >= 1")));
            }
        }
        if self.sweeps.loom.start <= 0.0 {
            return Err(bad("sweeps.loom must stay at positive depth"));
        }
        if self.sweeps.images_per_point == 0 || self.grid.images_per_cell == 0 {
            return Err(bad("evaluation needs at least one image per point"));
        }
        let s = &self.supports;
        if s.yaw.iter().chain(&s.roll).any(|v| !(*v >= 0.0)) {
            return Err(bad("yaw/roll supports are non-negative half-ranges"));
        }
        if s.yaw.iter().any(|&v| v >= 90.0) {
            return Err(bad("yaw supports must stay below 90 degrees"));
        }
        if s.loom.iter().any(|[lo, hi]| !(*lo > 0.0 && lo <= hi)) {
            return Err(bad("loom supports need 0 < lo <= hi"));
        }
        if s.grid.iter().any(|[y, r]| !(*y >= 0.0 && *y < 90.0 && *r >= 0.0)) {
            return Err(bad("grid supports are [yaw, roll] half-ranges with yaw < 90"));
        }
        if [s.yaw.len(), s.roll.len(), s.loom.len(), s.grid.len()].contains(&0) {
            return Err(bad("every family needs at least one training support"));
        }
        Ok(())
    }

    pub fn camera(&self) -> CameraIntrinsics {
        intrinsics_from_fov(self.camera.fov_deg, self.camera.image_size, self.camera.image_size)
            .expect("validated camera")
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig { epochs: t.epochs, lr: t.lr, momentum: t.momentum, batch_size: t.batch_size, seed }
    }

    pub fn attack_config(&self, seed: u64) -> AttackConfig {
        let a = &self.attack;
        AttackConfig {
            n_batches: a.n_batches,
            batch_size: a.batch_size,
            step_size: a.step_size,
            beta1: a.beta1,
            beta2: a.beta2,
            epsilon: a.epsilon,
            texture_size: a.texture_size,
            seed,
        }
    }

    /// The fronto-parallel, fixed-depth support.
    pub fn reference_support(&self) -> TransformDistribution {
        TransformDistribution::fixed(self.patch.depth, self.patch.side, self.patch.randomize_location)
    }

    /// Training supports of `family`, in column order.
    pub fn supports_of(&self, family: Family) -> Vec<TransformDistribution> {
        let base = self.reference_support();
        let s = &self.supports;
        match family {
            Family::Yaw => s.yaw.iter().map(|&y| TransformDistribution { yaw_max_deg: y, ..base }).collect(),
            Family::Roll => s.roll.iter().map(|&r| TransformDistribution { roll_max_deg: r, ..base }).collect(),
            Family::Loom => s
                .loom
                .iter()
                .map(|&[lo, hi]| TransformDistribution { depth_min: lo, depth_max: hi, ..base })
                .collect(),
            Family::Grid => s
                .grid
                .iter()
                .map(|&[y, r]| TransformDistribution { yaw_max_deg: y, roll_max_deg: r, ..base })
                .collect(),
        }
    }

    pub fn sweep_range(&self, kind: ParamKind) -> Range {
        match kind {
            ParamKind::Yaw => self.sweeps.yaw,
            ParamKind::Roll => self.sweeps.roll,
            ParamKind::Loom => self.sweeps.loom,
        }
    }

    /// Number of target classes the config asks for.
    pub fn target_count(&self) -> usize {
        match &self.targets {
            Targets::Tiers(t) => t.len() * self.ranking.tier_size,
            Targets::Classes(c) => c.len(),
        }
    }
}

/// Column header for a training support, e.g. `±20°` or `[6, 8]`.
pub fn support_label(family: Family, d: &TransformDistribution) -> String {
    match family {
        Family::Yaw => format!("±{}°", d.yaw_max_deg),
        Family::Roll => format!("±{}°", d.roll_max_deg),
        Family::Loom => format!("[{}, {}]", d.depth_min, d.depth_max),
        Family::Grid => format!("ψ ±{}°, θ ±{}°", d.yaw_max_deg, d.roll_max_deg),
    }
}

/// Filesystem-safe key identifying a support independently of family, so the
/// same support trained for two families is trained once.
pub fn support_key(d: &TransformDistribution) -> String {
    format!("yaw{}_roll{}_z{}-{}", d.yaw_max_deg, d.roll_max_deg, d.depth_min, d.depth_max)
}
