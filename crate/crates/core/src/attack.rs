//! Patch optimization in expectation over scenes and patch poses.
//!
//! Each step samples a pose per scene, composites the patch, takes the
//! white-box gradient of `log p(target)` through the classifier and the
//! compositor, averages over the batch, and takes an Adam ascent step
//! followed by projection onto `[0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{project_patch, CameraIntrinsics, PatchPlacement};
use crate::model::TinyConvNet;
use crate::render::{apply_patch, backprop_to_texture, Image, PatchTexture};
use crate::seeds::derive_seed;

/// Uniform train-time support over patch poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformDistribution {
    /// Yaw drawn from `[-yaw_max_deg, yaw_max_deg]`.
    pub yaw_max_deg: f64,
    /// Roll drawn from `[-roll_max_deg, roll_max_deg]`.
    pub roll_max_deg: f64,
    pub depth_min: f64,
    pub depth_max: f64,
    pub randomize_location: bool,
    pub side: f64,
}

impl TransformDistribution {
    /// A single fixed pose: fronto-parallel, at `depth`.
    pub fn fixed(depth: f64, side: f64, randomize_location: bool) -> Self {
        TransformDistribution {
            yaw_max_deg: 0.0,
            roll_max_deg: 0.0,
            depth_min: depth,
            depth_max: depth,
            randomize_location,
            side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.yaw_max_deg, self.roll_max_deg, self.depth_min, self.depth_max, self.side];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("transform distribution has non-finite bounds"));
        }
        if self.yaw_max_deg < 0.0 || self.roll_max_deg < 0.0 {
            return Err(invalid("angle half-ranges must be non-negative"));
        }
        if !(self.depth_min > 0.0 && self.depth_min <= self.depth_max) {
            return Err(invalid(format!(
                "depth range [{}, {}] must satisfy 0 < min <= max",
                self.depth_min, self.depth_max
            )));
        }
        if self.side <= 0.0 {
            return Err(invalid("patch side must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub n_batches: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub texture_size: usize,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            n_batches: 200,
            batch_size: 32,
            step_size: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            texture_size: 64,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.texture_size == 0 {
            return Err(invalid("batch size and texture size must be positive"));
        }
        if !(self.step_size > 0.0) {
            return Err(invalid("step size must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("moment decay rates must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// An optimized patch and everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub texture: PatchTexture,
    pub target: usize,
    pub support: TransformDistribution,
    pub config: AttackConfig,
    pub camera: CameraIntrinsics,
    /// Mean objective of the first and last optimization step.
    pub objective_start: Option<f64>,
    pub objective_end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRun {
    pub patch: Patch,
    /// Batch-mean `log p(target)` per step.
    pub objectives: Vec<f64>,
}

/// Moves the patch center to a uniformly random lateral position that keeps
/// the projected patch inside the image. Falls back to the centered pose
/// after 100 rejected draws.
pub fn sample_location(
    placement: &PatchPlacement,
    k: &CameraIntrinsics,
    rng: &mut impl Rng,
) -> PatchPlacement {
    let centered = placement.with_offset([0.0, 0.0]);
    if project_patch(&centered, k).is_err() {
        return centered;
    }
    let (hx, hy) = k.half_extent_at(placement.depth);
    for _ in 0..100 {
        let cand = placement.with_offset([rng.gen_range(-hx..=hx), rng.gen_range(-hy..=hy)]);
        if let Ok(q) = project_patch(&cand, k) {
            if q.inside_image(k.width, k.height) {
                return cand;
            }
        }
    }
    centered
}

/// One pose from the train-time support.
pub fn sample_transform(
    dist: &TransformDistribution,
    k: &CameraIntrinsics,
    rng: &mut impl Rng,
) -> PatchPlacement {
    let yaw = rng.gen_range(-dist.yaw_max_deg..=dist.yaw_max_deg);
    let roll = rng.gen_range(-dist.roll_max_deg..=dist.roll_max_deg);
    let depth = rng.gen_range(dist.depth_min..=dist.depth_max);
    let placement = PatchPlacement::centered(yaw, roll, depth, dist.side);
    if dist.randomize_location {
        sample_location(&placement, k, rng)
    } else {
        placement
    }
}

/// First and second moment estimates for the ascent step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Ascent step on `x` along `grad`, then clamp to `[0, 1]`.
    pub fn ascend(&mut self, x: &mut [f64], grad: &[f64], cfg: &AttackConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..x.len() {
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            x[i] = (x[i] + cfg.step_size * mhat / (vhat.sqrt() + cfg.epsilon)).clamp(0.0, 1.0);
        }
    }
}

/// Objective and texel gradient for one scene under one sampled pose.
/// Unrenderable poses contribute the clean-scene objective and no gradient.
pub fn scene_objective_gradient(
    texture: &PatchTexture,
    target: usize,
    net: &TinyConvNet,
    scene: &Image,
    placement: &PatchPlacement,
    k: &CameraIntrinsics,
) -> Result<(f64, Option<PatchTexture>)> {
    let (composite, rec) = apply_patch(texture, placement, k, scene)?;
    match rec {
        Some(rec) => {
            let (obj, g_img) = net.objective_and_input_gradient(&composite, target)?;
            Ok((obj, Some(backprop_to_texture(&rec, &g_img)?)))
        }
        None => Ok((net.target_log_prob(scene, target)?, None)),
    }
}

/// Mean objective and mean texel gradient over a batch of scenes, one pose
/// per scene drawn from the stream `derive_seed(step_seed, [i])`.
#[allow(clippy::too_many_arguments)]
pub fn batch_gradient(
    texture: &PatchTexture,
    target: usize,
    net: &TinyConvNet,
    scenes: &[&Image],
    dist: &TransformDistribution,
    k: &CameraIntrinsics,
    step_seed: u64,
) -> Result<(f64, PatchTexture)> {
    if scenes.is_empty() {
        return Err(invalid("empty scene batch"));
    }
    let per_scene: Vec<(f64, Option<PatchTexture>)> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(step_seed, &[i as u64]));
            let placement = sample_transform(dist, k, &mut rng);
            scene_objective_gradient(texture, target, net, scene, &placement, k)
        })
        .collect::<Result<_>>()?;
    let mut grad = Image::zeros(texture.height, texture.width);
    let mut total = 0.0;
    for (obj, g) in &per_scene {
        total += obj;
        if let Some(g) = g {
            grad.data.iter_mut().zip(&g.data).for_each(|(a, b)| *a += b);
        }
    }
    let n = scenes.len() as f64;
    grad.data.iter_mut().for_each(|v| *v /= n);
    Ok((total / n, grad))
}

/// One expectation-over-transformations ascent step; returns the batch-mean objective.
#[allow(clippy::too_many_arguments)]
pub fn eot_step(
    texture: &mut PatchTexture,
    target: usize,
    net: &TinyConvNet,
    scenes: &[&Image],
    dist: &TransformDistribution,
    k: &CameraIntrinsics,
    state: &mut AdamState,
    config: &AttackConfig,
    step_seed: u64,
) -> Result<f64> {
    let (objective, grad) = batch_gradient(texture, target, net, scenes, dist, k, step_seed)?;
    state.ascend(&mut texture.data, &grad.data, config);
    Ok(objective)
}

/// Gray-initialized patch optimized for `config.n_batches` steps on batches
/// drawn with replacement from `scenes`.
pub fn optimize_patch(
    net: &TinyConvNet,
    scenes: &[&Image],
    target: usize,
    dist: &TransformDistribution,
    config: &AttackConfig,
    k: &CameraIntrinsics,
) -> Result<PatchRun> {
    if target >= net.num_classes() {
        return Err(invalid(format!("target class {target} out of range 0..{}", net.num_classes())));
    }
    if scenes.is_empty() {
        return Err(invalid("no scenes to optimize over"));
    }
    dist.validate()?;
    config.validate()?;
    let ts = config.texture_size;
    let mut texture = Image::filled(ts, ts, 0.5);
    let mut state = AdamState::new(texture.data.len());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[0]));
    let mut objectives = Vec::with_capacity(config.n_batches);
    for step in 0..config.n_batches {
        let batch: Vec<&Image> = (0..config.batch_size).map(|_| scenes[rng.gen_range(0..scenes.len())]).collect();
        let step_seed = derive_seed(config.seed, &[1, step as u64]);
        objectives.push(eot_step(&mut texture, target, net, &batch, dist, k, &mut state, config, step_seed)?);
    }
    let patch = Patch {
        texture,
        target,
        support: *dist,
        config: *config,
        camera: *k,
        objective_start: objectives.first().copied(),
        objective_end: objectives.last().copied(),
    };
    Ok(PatchRun { patch, objectives })
}
