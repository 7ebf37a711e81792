//! Attack-success measurement over pose sweeps, and the mAST summary.
//!
//! A sweep samples its parameter at the `N + 1` endpoints of `N` equal
//! intervals. mAST integrates each class's success curve with the
//! trapezoidal rule, divides by the range length, and averages over classes.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::sample_location;
use crate::error::{invalid, Result};
use crate::geometry::{CameraIntrinsics, PatchPlacement};
use crate::model::TinyConvNet;
use crate::render::{apply_patch, Image, PatchTexture};
use crate::seeds::derive_seed;

/// Whether the targeted label is predicted on one composited scene.
#[allow(clippy::too_many_arguments)]
fn hit(
    texture: &PatchTexture,
    target: usize,
    net: &TinyConvNet,
    scene: &Image,
    placement: &PatchPlacement,
    randomize_location: bool,
    k: &CameraIntrinsics,
    seed: u64,
) -> Result<bool> {
    let placement = if randomize_location {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_location(placement, k, &mut rng)
    } else {
        *placement
    };
    let (composite, _) = apply_patch(texture, &placement, k, scene)?;
    Ok(net.predict(&composite)? == target)
}

/// Fraction of `scenes` classified as `target` once the patch is inserted at
/// `placement`. Scenes of the target class count like any other.
#[allow(clippy::too_many_arguments)]
pub fn success_rate(
    texture: &PatchTexture,
    target: usize,
    net: &TinyConvNet,
    scenes: &[&Image],
    placement: &PatchPlacement,
    randomize_location: bool,
    k: &CameraIntrinsics,
    seed: u64,
) -> Result<f64> {
    if scenes.is_empty() {
        return Err(invalid("no scenes to evaluate"));
    }
    let hits = scenes
        .par_iter()
        .enumerate()
        .map(|(j, s)| hit(texture, target, net, s, placement, randomize_location, k, derive_seed(seed, &[j as u64])))
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Yaw,
    Roll,
    Loom,
}

impl ParamKind {
    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Yaw => "yaw",
            ParamKind::Roll => "roll",
            ParamKind::Loom => "loom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "yaw" => Some(ParamKind::Yaw),
            "roll" => Some(ParamKind::Roll),
            "loom" => Some(ParamKind::Loom),
            _ => None,
        }
    }
}

/// Pose used for the parameters a sweep holds fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePose {
    pub yaw_deg: f64,
    pub roll_deg: f64,
    pub depth: f64,
    pub side: f64,
    pub randomize_location: bool,
}

impl BasePose {
    pub fn placement_with(&self, kind: ParamKind, phi: f64) -> PatchPlacement {
        let mut p = PatchPlacement::centered(self.yaw_deg, self.roll_deg, self.depth, self.side);
        match kind {
            ParamKind::Yaw => p.yaw_deg = phi,
            ParamKind::Roll => p.roll_deg = phi,
            ParamKind::Loom => p.depth = phi,
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: ParamKind,
    pub start: f64,
    pub end: f64,
    pub n_intervals: usize,
    pub images_per_point: usize,
    pub base: BasePose,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.start < self.end) {
            return Err(invalid(format!("sweep range [{}, {}] is empty", self.start, self.end)));
        }
        if self.n_intervals == 0 || self.images_per_point == 0 {
            return Err(invalid("sweep needs at least one interval and one image per point"));
        }
        if self.kind == ParamKind::Loom && self.start <= 0.0 {
            return Err(invalid("loom sweep must stay at positive depth"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        grid_points(self.start, self.end, self.n_intervals)
    }
}

/// `n + 1` uniformly spaced points from `start` to `end` inclusive.
pub fn grid_points(start: f64, end: f64, n: usize) -> Vec<f64> {
    let step = (end - start) / n as f64;
    (0..=n).map(|i| if i == n { end } else { start + step * i as f64 }).collect()
}

/// Indices of the evaluation scenes used at one sample point.
fn point_scenes(n_available: usize, n_wanted: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n_wanted <= n_available {
        sample(&mut rng, n_available, n_wanted).into_vec()
    } else {
        (0..n_wanted).map(|_| rng.gen_range(0..n_available)).collect()
    }
}

/// Success rate at one pose with scenes and locations drawn from `seed`.
#[allow(clippy::too_many_arguments)]
fn rate_at(
    texture: &PatchTexture,
    target: usize,
    net: &TinyConvNet,
    scenes: &[&Image],
    placement: &PatchPlacement,
    randomize_location: bool,
    n_images: usize,
    k: &CameraIntrinsics,
    seed: u64,
) -> Result<f64> {
    let chosen: Vec<&Image> = point_scenes(scenes.len(), n_images, derive_seed(seed, &[0]))
        .into_iter()
        .map(|i| scenes[i])
        .collect();
    success_rate(texture, target, net, &chosen, placement, randomize_location, k, derive_seed(seed, &[1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: ParamKind,
    pub target: usize,
    pub start: f64,
    pub end: f64,
    pub phis: Vec<f64>,
    pub rates: Vec<f64>,
    pub n_images: usize,
    pub seed: u64,
}

/// Success curve over the sweep's sample points. Every point reuses the same
/// scenes and location stream (common random numbers), so differences along
/// the curve come from the pose alone.
pub fn run_sweep(
    texture: &PatchTexture,
    target: usize,
    net: &TinyConvNet,
    scenes: &[&Image],
    spec: &SweepSpec,
    k: &CameraIntrinsics,
) -> Result<SweepResult> {
    spec.validate()?;
    if scenes.is_empty() {
        return Err(invalid("no evaluation scenes"));
    }
    let phis = spec.points();
    let rates = phis
        .iter()
        .map(|&phi| {
            let placement = spec.base.placement_with(spec.kind, phi);
            rate_at(
                texture,
                target,
                net,
                scenes,
                &placement,
                spec.base.randomize_location,
                spec.images_per_point,
                k,
                spec.seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kind: spec.kind,
        target,
        start: spec.start,
        end: spec.end,
        phis,
        rates,
        n_images: spec.images_per_point,
        seed: spec.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub yaw_range: (f64, f64),
    pub roll_range: (f64, f64),
    pub yaw_intervals: usize,
    pub roll_intervals: usize,
    pub images_per_cell: usize,
    pub depth: f64,
    pub side: f64,
    pub randomize_location: bool,
    pub seed: u64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.yaw_range.0 < self.yaw_range.1 && self.roll_range.0 < self.roll_range.1) {
            return Err(invalid("grid ranges must be non-empty"));
        }
        if self.yaw_intervals == 0 || self.roll_intervals == 0 || self.images_per_cell == 0 {
            return Err(invalid("grid needs at least one interval per axis and one image per cell"));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        (self.yaw_intervals + 1) * (self.roll_intervals + 1)
    }
}

/// Success over the (roll, yaw) endpoint lattice. `rates[r][y]`: rows index
/// roll, and yaw varies along each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub target: usize,
    pub yaws: Vec<f64>,
    pub rolls: Vec<f64>,
    pub rates: Vec<Vec<f64>>,
    pub n_images: usize,
    pub seed: u64,
}

impl GridResult {
    /// Row at the roll sample closest to `roll`.
    pub fn row_at_roll(&self, roll: f64) -> (f64, &[f64]) {
        let r = self
            .rolls
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - roll).abs().total_cmp(&(b.1 - roll).abs()))
            .map(|(i, _)| i)
            .expect("grid has rows");
        (self.rolls[r], &self.rates[r])
    }
}

/// Cells share scenes and locations the same way sweep points do, so a grid
/// row and a sweep with equal seeds sample identical scenes.
pub fn run_grid(
    texture: &PatchTexture,
    target: usize,
    net: &TinyConvNet,
    scenes: &[&Image],
    spec: &GridSpec,
    k: &CameraIntrinsics,
) -> Result<GridResult> {
    spec.validate()?;
    if scenes.is_empty() {
        return Err(invalid("no evaluation scenes"));
    }
    let yaws = grid_points(spec.yaw_range.0, spec.yaw_range.1, spec.yaw_intervals);
    let rolls = grid_points(spec.roll_range.0, spec.roll_range.1, spec.roll_intervals);
    let mut rates = Vec::with_capacity(rolls.len());
    for &roll in &rolls {
        let row = yaws
            .iter()
            .map(|&yaw| {
                let placement = PatchPlacement::centered(yaw, roll, spec.depth, spec.side);
                rate_at(
                    texture,
                    target,
                    net,
                    scenes,
                    &placement,
                    spec.randomize_location,
                    spec.images_per_cell,
                    k,
                    spec.seed,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        rates.push(row);
    }
    Ok(GridResult { target, yaws, rolls, rates, n_images: spec.images_per_cell, seed: spec.seed })
}

/// Trapezoidal average of uniformly spaced samples: endpoints weigh 1/2.
pub fn trapezoid_mean(values: &[f64]) -> f64 {
    match values.len() {
        0 => f64::NAN,
        1 => values[0],
        n => {
            let interior: f64 = values[1..n - 1].iter().sum();
            (interior + 0.5 * (values[0] + values[n - 1])) / (n - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MastReport {
    pub kind: ParamKind,
    pub start: f64,
    pub end: f64,
    pub n_intervals: usize,
    /// `(target class, range-normalized integral of its success curve)`.
    pub per_class: Vec<(usize, f64)>,
    /// Unweighted mean over classes.
    pub mast: f64,
}

impl MastReport {
    pub fn class_value(&self, class: usize) -> Option<f64> {
        self.per_class.iter().find(|(c, _)| *c == class).map(|(_, v)| *v)
    }

    /// Mean of the per-class values over `classes` (those present).
    pub fn mean_over(&self, classes: &[usize]) -> Option<f64> {
        let vals: Vec<f64> = classes.iter().filter_map(|&c| self.class_value(c)).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// mAST over one sweep result per target class.
pub fn mast(results: &[SweepResult]) -> Result<MastReport> {
    let first = results.first().ok_or_else(|| invalid("no sweep results"))?;
    for r in results {
        if r.kind != first.kind || r.start != first.start || r.end != first.end || r.phis.len() != first.phis.len() {
            return Err(invalid("sweep results do not share the same specification"));
        }
        if r.rates.len() != r.phis.len() {
            return Err(invalid("sweep result has mismatched point and rate counts"));
        }
    }
    let mut per_class: Vec<(usize, f64)> = results.iter().map(|r| (r.target, trapezoid_mean(&r.rates))).collect();
    // canonical summation order makes the mean exactly permutation invariant
    per_class.sort_by_key(|(c, _)| *c);
    let mean = per_class.iter().map(|(_, v)| v).sum::<f64>() / per_class.len() as f64;
    Ok(MastReport {
        kind: first.kind,
        start: first.start,
        end: first.end,
        n_intervals: first.phis.len() - 1,
        per_class,
        mast: mean,
    })
}
