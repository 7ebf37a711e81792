//! Procedural scene images standing in for a natural-image corpus.
//!
//! Each scene is a smooth random background with one foreground glyph.
//! The glyph's shape and color encode the class: `class % 4` picks the
//! shape (disc, square, triangle, cross) and `class / 4` the hue. Position,
//! size and the background all come from the scene seed, so two classes
//! rendered with the same seed differ only inside the glyph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{optimize_patch, AttackConfig, TransformDistribution};
use crate::error::{invalid, Error, Result};
use crate::eval::success_rate;
use crate::geometry::{CameraIntrinsics, PatchPlacement};
use crate::model::TinyConvNet;
use crate::render::{Image, CHANNELS};
use crate::seeds::derive_seed;

pub const SHAPES: usize = 4;
pub const DEFAULT_CLASSES: usize = 12;

const HUES: [[f64; 3]; 6] = [
    [0.85, 0.15, 0.15],
    [0.15, 0.75, 0.2],
    [0.15, 0.25, 0.9],
    [0.9, 0.8, 0.1],
    [0.75, 0.2, 0.8],
    [0.1, 0.8, 0.8],
];

pub fn max_classes() -> usize {
    SHAPES * HUES.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub class: usize,
    pub seed: u64,
    pub size: usize,
}

fn inside_glyph(shape: usize, u: f64, v: f64) -> bool {
    match shape {
        0 => u * u + v * v < 1.0,
        1 => u.abs() < 0.82 && v.abs() < 0.82,
        2 => {
            // apex up, base at v = 0.75
            let w = 0.95 * (v + 1.0) / 1.75;
            v > -1.0 && v < 0.75 && u.abs() < w
        }
        _ => (u.abs() < 0.32 && v.abs() < 1.0) || (v.abs() < 0.32 && u.abs() < 1.0),
    }
}

/// Deterministic scene for `spec`.
pub fn render_scene(spec: &SceneSpec) -> Result<Image> {
    if spec.class >= max_classes() {
        return Err(invalid(format!("class {} exceeds the {} renderable classes", spec.class, max_classes())));
    }
    if spec.size == 0 {
        return Err(invalid("scene size must be positive"));
    }
    let n = spec.size;
    let nf = n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let base: [f64; 3] = {
        let gray = rng.gen_range(0.35..0.65);
        [0, 1, 2].map(|_| gray + rng.gen_range(-0.08..0.08))
    };
    // a few low-frequency plane waves per channel
    let waves: Vec<(usize, f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let c = rng.gen_range(0..CHANNELS);
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            let freq = rng.gen_range(0.5..2.0) * std::f64::consts::TAU / nf;
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp = rng.gen_range(0.03..0.1);
            (c, ang, freq, phase, amp)
        })
        .collect();

    let cx = nf * (0.5 + rng.gen_range(-0.2..0.2));
    let cy = nf * (0.5 + rng.gen_range(-0.2..0.2));
    let radius = nf * rng.gen_range(0.11..0.17);
    let hue = HUES[spec.class / SHAPES];
    let color = hue.map(|h| (h + rng.gen_range(-0.07..0.07)).clamp(0.0, 1.0));
    let shape = spec.class % SHAPES;

    let mut img = Image::zeros(n, n);
    for y in 0..n {
        for x in 0..n {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let glyph = inside_glyph(shape, (px - cx) / radius, (py - cy) / radius);
            for c in 0..CHANNELS {
                let v = if glyph {
                    color[c]
                } else {
                    let mut v = base[c];
                    for &(wc, ang, freq, phase, amp) in &waves {
                        if wc == c {
                            v += amp * (freq * (px * ang.cos() + py * ang.sin()) + phase).sin();
                        }
                    }
                    v
                };
                img.set(c, y, x, v.clamp(0.0, 1.0));
            }
        }
    }
    for v in &mut img.data {
        *v = (*v + rng.gen_range(-0.02..0.02)).clamp(0.0, 1.0);
    }
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Classifier training.
    Train,
    /// Classifier validation.
    Val,
    /// Scenes patches are optimized on.
    AttackTrain,
    /// Scenes attack success is measured on.
    Test,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Val, Split::AttackTrain, Split::Test];

    fn tag(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::AttackTrain => 3,
            Split::Test => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::AttackTrain => "attack_train",
            Split::Test => "test",
        }
    }
}

/// Scene seed for item `index` of `split`. The split tag occupies the top
/// byte, so seed ranges of different splits never overlap.
pub fn scene_seed(split: Split, seed: u64, index: u64) -> u64 {
    assert!(index < 1 << 32, "dataset index out of range");
    (split.tag() << 56) | ((seed & 0xff_ffff) << 32) | index
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub split: Split,
    pub items: Vec<(Image, usize)>,
    pub specs: Vec<SceneSpec>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn images(&self) -> Vec<&Image> {
        self.items.iter().map(|(im, _)| im).collect()
    }

    pub fn from_specs(split: Split, specs: Vec<SceneSpec>) -> Result<Self> {
        let items = specs
            .par_iter()
            .map(|s| render_scene(s).map(|im| (im, s.class)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { split, items, specs })
    }
}

/// `num_classes * n_per_class` scenes, classes interleaved.
pub fn make_dataset(
    n_per_class: usize,
    split: Split,
    seed: u64,
    num_classes: usize,
    size: usize,
) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(invalid("n_per_class must be positive"));
    }
    if num_classes == 0 || num_classes > max_classes() {
        return Err(invalid(format!("num_classes must be in 1..={}", max_classes())));
    }
    let specs = (0..n_per_class)
        .flat_map(|i| (0..num_classes).map(move |c| (i, c)))
        .map(|(i, c)| SceneSpec {
            class: c,
            seed: scene_seed(split, seed, (i * num_classes + c) as u64),
            size,
        })
        .collect();
    Dataset::from_specs(split, specs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub num_classes: usize,
    pub image_size: usize,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub attack_per_class: usize,
    pub test_per_class: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            num_classes: DEFAULT_CLASSES,
            image_size: 64,
            train_per_class: 100,
            val_per_class: 25,
            attack_per_class: 40,
            test_per_class: 40,
        }
    }
}

/// All four splits, generated from one seed.
#[derive(Debug, Clone)]
pub struct SceneBank {
    pub train: Dataset,
    pub val: Dataset,
    pub attack: Dataset,
    pub test: Dataset,
}

impl SceneBank {
    pub fn generate(cfg: &DataConfig, seed: u64) -> Result<Self> {
        let mk = |n, split| make_dataset(n, split, seed, cfg.num_classes, cfg.image_size);
        Ok(SceneBank {
            train: mk(cfg.train_per_class, Split::Train)?,
            val: mk(cfg.val_per_class, Split::Val)?,
            attack: mk(cfg.attack_per_class, Split::AttackTrain)?,
            test: mk(cfg.test_per_class, Split::Test)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetTiers {
    pub high: Vec<usize>,
    pub mid: Vec<usize>,
    pub low: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    High,
    Mid,
    Low,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::High, Tier::Mid, Tier::Low];

    pub fn name(self) -> &'static str {
        match self {
            Tier::High => "high",
            Tier::Mid => "mid",
            Tier::Low => "low",
        }
    }
}

impl TargetTiers {
    pub fn get(&self, tier: Tier) -> &[usize] {
        match tier {
            Tier::High => &self.high,
            Tier::Mid => &self.mid,
            Tier::Low => &self.low,
        }
    }

    pub fn tier_of(&self, class: usize) -> Option<Tier> {
        Tier::ALL.into_iter().find(|&t| self.get(t).contains(&class))
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let all: Vec<usize> = Tier::ALL.iter().flat_map(|&t| self.get(t).iter().copied()).collect();
        if let Some(c) = all.iter().find(|&&c| c >= num_classes) {
            return Err(invalid(format!("tier class {c} out of range 0..{num_classes}")));
        }
        let mut sorted = all.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(invalid("tiers must be disjoint"));
        }
        Ok(())
    }

    /// Buckets classes already sorted by decreasing quick-attack success:
    /// the first `tier_size`, the central `tier_size`, and the last `tier_size`.
    pub fn from_ranking(sorted: &[usize], tier_size: usize) -> Result<Self> {
        let n = sorted.len();
        if tier_size == 0 || 3 * tier_size > n {
            return Err(invalid(format!("cannot form three tiers of {tier_size} from {n} classes")));
        }
        let mid_start = (n - tier_size) / 2;
        Ok(TargetTiers {
            high: sorted[..tier_size].to_vec(),
            mid: sorted[mid_start..mid_start + tier_size].to_vec(),
            low: sorted[n - tier_size..].to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub n_batches: usize,
    pub batch_size: usize,
    pub eval_images: usize,
    pub tier_size: usize,
    pub seed: u64,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig { n_batches: 25, batch_size: 32, eval_images: 128, tier_size: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub tiers: TargetTiers,
    /// `(class, quick-attack success)`, best first.
    pub scores: Vec<(usize, f64)>,
}

/// Quick fronto-parallel attack on every class, then bucket by success.
#[allow(clippy::too_many_arguments)]
pub fn rank_target_classes(
    net: &TinyConvNet,
    bank: &SceneBank,
    camera: &CameraIntrinsics,
    reference: &TransformDistribution,
    attack_template: &AttackConfig,
    cfg: &RankingConfig,
) -> Result<Ranking> {
    let acc = net.accuracy(&bank.val)?;
    if acc < 0.5 {
        return Err(Error::UntrainedModel { accuracy: acc });
    }
    let quick = AttackConfig {
        n_batches: cfg.n_batches,
        batch_size: cfg.batch_size,
        ..*attack_template
    };
    let attack_scenes = bank.attack.images();
    let test_scenes = bank.test.images();
    let n_eval = cfg.eval_images.min(test_scenes.len());
    let mut scores = Vec::with_capacity(net.num_classes());
    for class in 0..net.num_classes() {
        let cfg_c = AttackConfig { seed: derive_seed(cfg.seed, &[class as u64]), ..quick };
        let run = optimize_patch(net, &attack_scenes, class, reference, &cfg_c, camera)?;
        let placement = PatchPlacement::centered(0.0, 0.0, reference.depth_min, reference.side);
        let s = success_rate(
            &run.patch.texture,
            class,
            net,
            &test_scenes[..n_eval],
            &placement,
            reference.randomize_location,
            camera,
            derive_seed(cfg.seed, &[class as u64, 1]),
        )?;
        scores.push((class, s));
    }
    // stable: equal scores keep class order
    scores.sort_by(|a, b| b.1.total_cmp(&a.1));
    let order: Vec<usize> = scores.iter().map(|s| s.0).collect();
    Ok(Ranking { tiers: TargetTiers::from_ranking(&order, cfg.tier_size)?, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic() {
        let spec = SceneSpec { class: 5, seed: 42, size: 64 };
        assert_eq!(render_scene(&spec).unwrap(), render_scene(&spec).unwrap());
    }

    #[test]
    fn classes_differ_only_in_glyph() {
        let a = render_scene(&SceneSpec { class: 0, seed: 7, size: 64 }).unwrap();
        let b = render_scene(&SceneSpec { class: 6, seed: 7, size: 64 }).unwrap();
        let differing = (0..64 * 64)
            .filter(|&p| (0..3).any(|c| a.data[c * 4096 + p] != b.data[c * 4096 + p]))
            .count();
        assert!(differing > 100, "only {differing} pixels differ");
        // background corners agree
        for (y, x) in [(0, 0), (0, 63), (63, 0), (63, 63)] {
            for c in 0..3 {
                assert_eq!(a.get(c, y, x), b.get(c, y, x));
            }
        }
    }

    #[test]
    fn scenes_are_not_saturated() {
        for i in 0..1000u64 {
            let spec = SceneSpec { class: (i % 12) as usize, seed: i * 7919, size: 32 };
            let m = render_scene(&spec).unwrap().mean();
            assert!((0.1..=0.9).contains(&m), "scene {i} mean {m}");
        }
    }

    #[test]
    fn dataset_counts_and_split_disjointness() {
        let train = make_dataset(100, Split::Train, 7, 12, 16).unwrap();
        assert_eq!(train.len(), 1200);
        let val = make_dataset(10, Split::Val, 7, 12, 16).unwrap();
        for s in &val.specs {
            assert!(train.specs.iter().all(|t| t.seed != s.seed));
        }
        for (im, _) in &val.items {
            assert!(train.items.iter().all(|(t, _)| t != im));
        }
        assert!(make_dataset(0, Split::Train, 7, 12, 16).is_err());
    }

    #[test]
    fn tier_bucketing() {
        let sorted: Vec<usize> = (0..12).rev().collect();
        let t = TargetTiers::from_ranking(&sorted, 3).unwrap();
        assert_eq!(t.high, vec![11, 10, 9]);
        assert_eq!(t.mid, vec![7, 6, 5]);
        assert_eq!(t.low, vec![2, 1, 0]);
        let assigned: usize = Tier::ALL.iter().map(|&x| t.get(x).len()).sum();
        assert_eq!(assigned, 9);
        t.validate(12).unwrap();
        assert!(TargetTiers::from_ranking(&sorted, 5).is_err());
    }
}
