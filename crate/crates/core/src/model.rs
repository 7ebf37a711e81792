//! The white-box target classifier.
//!
//! Fixed architecture, for an `S x S` RGB input (S divisible by 4):
//!
//! | layer  | op                          | output        |
//! |--------|-----------------------------|---------------|
//! | conv1  | 3x3, 3 -> 16, pad 1, ReLU   | 16 x S x S    |
//! | pool1  | max 2x2, stride 2           | 16 x S/2 x S/2|
//! | conv2  | 3x3, 16 -> 32, pad 1, ReLU  | 32 x S/2 x S/2|
//! | pool2  | max 2x2, stride 2           | 32 x S/4 x S/4|
//! | conv3  | 3x3, 32 -> 64, pad 1, ReLU  | 64 x S/4 x S/4|
//! | gap    | global average pool         | 64            |
//! | fc     | 64 -> K                     | K             |
//!
//! Parameters are stored flat in the order conv1.w, conv1.b, conv2.w,
//! conv2.b, conv3.w, conv3.b, fc.w, fc.b; conv weights are
//! `[out][in][ky][kx]`, fc weights `[class][feature]`. Inputs are centered
//! by subtracting 0.5 before conv1.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::render::{Image, CHANNELS};

const CONV_CHANNELS: [usize; 4] = [CHANNELS, 16, 32, 64];
pub const FEATURES: usize = 64;
pub const MAGIC: &[u8; 6] = b"PPNET1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    conv_w: [usize; 3],
    conv_b: [usize; 3],
    fc_w: usize,
    fc_b: usize,
    total: usize,
}

impl Layout {
    fn new(num_classes: usize) -> Self {
        let mut off = 0;
        let mut conv_w = [0; 3];
        let mut conv_b = [0; 3];
        for l in 0..3 {
            conv_w[l] = off;
            off += CONV_CHANNELS[l + 1] * CONV_CHANNELS[l] * 9;
            conv_b[l] = off;
            off += CONV_CHANNELS[l + 1];
        }
        let fc_w = off;
        off += num_classes * FEATURES;
        let fc_b = off;
        off += num_classes;
        Layout { conv_w, conv_b, fc_w, fc_b, total: off }
    }
}

pub fn param_count(num_classes: usize) -> usize {
    Layout::new(num_classes).total
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyConvNet {
    num_classes: usize,
    input_size: usize,
    seed: u64,
    layout: Layout,
    params: Vec<f64>,
}

/// Pre-softmax class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits(pub Vec<f64>);

impl Logits {
    pub fn log_softmax(&self) -> Vec<f64> {
        let max = self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + self.0.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        self.0.iter().map(|z| z - lse).collect()
    }

    pub fn softmax(&self) -> Vec<f64> {
        self.log_softmax().into_iter().map(f64::exp).collect()
    }

    /// Index of the largest score; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &z) in self.0.iter().enumerate() {
            if z > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Activations kept from the forward pass for the reverse pass.
struct Trace {
    cols: [Vec<f64>; 3],
    relu: [Vec<f64>; 3],
    pool_argmax: [Vec<usize>; 2],
    gap: Vec<f64>,
    logits: Logits,
}

fn im2col(input: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut col = vec![0.0; c * 9 * hw];
    for ch in 0..c {
        let plane = &input[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((ch * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    match kx {
                        0 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..w - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
    col
}

fn col2im(col: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut out = vec![0.0; c * hw];
    for ch in 0..c {
        let plane = &mut out[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((ch * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    match kx {
                        0 => dst[..w - 1].iter_mut().zip(&src[1..]).for_each(|(d, s)| *d += s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d += s),
                        _ => dst[1..].iter_mut().zip(&src[..w - 1]).for_each(|(d, s)| *d += s),
                    }
                }
            }
        }
    }
    out
}

/// `c (m x n) = beta * c + a (m x k, row-major or transposed) * b`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: the strides describe matrices that lie inside the given slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn max_pool(input: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; c * oh * ow];
    let mut arg = vec![0; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = ch * h * w + (2 * y) * w + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = ch * h * w + (2 * y + dy) * w + 2 * x + dx;
                    if input[i] > input[best] {
                        best = i;
                    }
                }
                let o = (ch * oh + y) * ow + x;
                out[o] = input[best];
                arg[o] = best;
            }
        }
    }
    (out, arg)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Header {
    num_classes: usize,
    input_size: usize,
    seed: u64,
    param_count: usize,
}

impl TinyConvNet {
    /// He-normal conv/fc weights, zero biases.
    pub fn new(num_classes: usize, input_size: usize, seed: u64) -> Result<Self> {
        if num_classes < 2 {
            return Err(invalid("need at least two classes"));
        }
        if input_size < 4 || input_size % 4 != 0 {
            return Err(invalid(format!("input size {input_size} must be a positive multiple of 4")));
        }
        let layout = Layout::new(num_classes);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..3 {
            let fan_in = CONV_CHANNELS[l] * 9;
            let n = CONV_CHANNELS[l + 1] * fan_in;
            let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
            for p in &mut params[layout.conv_w[l]..layout.conv_w[l] + n] {
                *p = dist.sample(&mut rng);
            }
        }
        let dist = Normal::new(0.0, (1.0 / FEATURES as f64).sqrt()).expect("valid std");
        for p in &mut params[layout.fc_w..layout.fc_b] {
            *p = dist.sample(&mut rng);
        }
        Ok(TinyConvNet { num_classes, input_size, seed, layout, params })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Mutable view of the final layer as `(weights [K x 64], bias [K])`.
    pub fn fc_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        let (w, b) = self.params[self.layout.fc_w..].split_at_mut(self.layout.fc_b - self.layout.fc_w);
        (w, b)
    }

    fn check_input(&self, image: &Image) -> Result<()> {
        if image.height != self.input_size || image.width != self.input_size {
            return Err(invalid(format!(
                "expected a {0}x{0} image, got {1}x{2}",
                self.input_size, image.height, image.width
            )));
        }
        Ok(())
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.num_classes {
            return Err(invalid(format!("class {class} out of range 0..{}", self.num_classes)));
        }
        Ok(())
    }

    fn forward_trace(&self, image: &Image) -> Trace {
        let p = &self.params;
        let ly = &self.layout;
        let mut act: Vec<f64> = image.data.iter().map(|v| v - 0.5).collect();
        let mut size = self.input_size;
        let mut cols: [Vec<f64>; 3] = Default::default();
        let mut relu: [Vec<f64>; 3] = Default::default();
        let mut pool_argmax: [Vec<usize>; 2] = Default::default();

        for l in 0..3 {
            let (cin, cout) = (CONV_CHANNELS[l], CONV_CHANNELS[l + 1]);
            let hw = size * size;
            let col = im2col(&act, cin, size, size);
            let mut out = vec![0.0; cout * hw];
            for (o, chunk) in out.chunks_mut(hw).enumerate() {
                chunk.fill(p[ly.conv_b[l] + o]);
            }
            let kdim = cin * 9;
            gemm(
                cout,
                kdim,
                hw,
                &p[ly.conv_w[l]..],
                (kdim as isize, 1),
                &col,
                (hw as isize, 1),
                1.0,
                &mut out,
            );
            for v in &mut out {
                *v = v.max(0.0);
            }
            cols[l] = col;
            if l < 2 {
                let (pooled, arg) = max_pool(&out, cout, size, size);
                relu[l] = out;
                pool_argmax[l] = arg;
                act = pooled;
                size /= 2;
            } else {
                relu[l] = out.clone();
                act = out;
            }
        }

        let hw = size * size;
        let gap: Vec<f64> = act.chunks(hw).map(|c| c.iter().sum::<f64>() / hw as f64).collect();
        let logits = (0..self.num_classes)
            .map(|k| {
                let w = &p[ly.fc_w + k * FEATURES..][..FEATURES];
                p[ly.fc_b + k] + w.iter().zip(&gap).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        Trace { cols, relu, pool_argmax, gap, logits: Logits(logits) }
    }

    /// Reverse pass from `dlogits`. Returns the input gradient (empty unless
    /// `want_input`) and, when `param_grad` is given, accumulates parameter
    /// gradients into it.
    fn backward(
        &self,
        trace: &Trace,
        dlogits: &[f64],
        mut param_grad: Option<&mut [f64]>,
        want_input: bool,
    ) -> Vec<f64> {
        let p = &self.params;
        let ly = &self.layout;
        let k = self.num_classes;
        let mut size = self.input_size / 4;
        let hw = size * size;

        if let Some(g) = param_grad.as_deref_mut() {
            for c in 0..k {
                let d = dlogits[c];
                g[ly.fc_b + c] += d;
                for f in 0..FEATURES {
                    g[ly.fc_w + c * FEATURES + f] += d * trace.gap[f];
                }
            }
        }
        let mut dgap = vec![0.0; FEATURES];
        for c in 0..k {
            let w = &p[ly.fc_w + c * FEATURES..][..FEATURES];
            for f in 0..FEATURES {
                dgap[f] += dlogits[c] * w[f];
            }
        }
        // d(relu3 output)
        let mut dact: Vec<f64> = dgap
            .iter()
            .flat_map(|&d| std::iter::repeat(d / hw as f64).take(hw))
            .collect();

        for l in (0..3).rev() {
            let (cin, cout) = (CONV_CHANNELS[l], CONV_CHANNELS[l + 1]);
            if l < 2 {
                // unpool into the pre-pool (post-ReLU) map
                let full = size * 2;
                let mut up = vec![0.0; cout * full * full];
                for (o, &src) in trace.pool_argmax[l].iter().enumerate() {
                    up[src] += dact[o];
                }
                dact = up;
                size = full;
            }
            let hw = size * size;
            for (d, &a) in dact.iter_mut().zip(&trace.relu[l]) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            let kdim = cin * 9;
            if let Some(g) = param_grad.as_deref_mut() {
                for o in 0..cout {
                    g[ly.conv_b[l] + o] += dact[o * hw..(o + 1) * hw].iter().sum::<f64>();
                }
                // dW (cout x kdim) += dact (cout x hw) * col^T (hw x kdim)
                gemm(
                    cout,
                    hw,
                    kdim,
                    &dact,
                    (hw as isize, 1),
                    &trace.cols[l],
                    (1, hw as isize),
                    1.0,
                    &mut g[ly.conv_w[l]..ly.conv_w[l] + cout * kdim],
                );
            }
            if l > 0 || want_input {
                // dcol (kdim x hw) = W^T (kdim x cout) * dact (cout x hw)
                let mut dcol = vec![0.0; kdim * hw];
                gemm(
                    kdim,
                    cout,
                    hw,
                    &p[ly.conv_w[l]..],
                    (1, kdim as isize),
                    &dact,
                    (hw as isize, 1),
                    0.0,
                    &mut dcol,
                );
                dact = col2im(&dcol, cin, size, size);
            } else {
                dact.clear();
            }
        }
        dact
    }

    pub fn forward(&self, image: &Image) -> Result<Logits> {
        self.check_input(image)?;
        Ok(self.forward_trace(image).logits)
    }

    pub fn forward_batch(&self, images: &[Image]) -> Result<Vec<Logits>> {
        images.par_iter().map(|im| self.forward(im)).collect()
    }

    pub fn predict(&self, image: &Image) -> Result<usize> {
        Ok(self.forward(image)?.argmax())
    }

    /// `log softmax(logits)[target]`.
    pub fn target_log_prob(&self, image: &Image, target: usize) -> Result<f64> {
        self.check_class(target)?;
        Ok(self.forward(image)?.log_softmax()[target])
    }

    /// Gradient of `target_log_prob` with respect to the input pixels.
    pub fn input_gradient(&self, image: &Image, target: usize) -> Result<Image> {
        Ok(self.objective_and_input_gradient(image, target)?.1)
    }

    /// `(target_log_prob, its input gradient)` from a single forward pass.
    pub fn objective_and_input_gradient(&self, image: &Image, target: usize) -> Result<(f64, Image)> {
        self.check_input(image)?;
        self.check_class(target)?;
        let trace = self.forward_trace(image);
        let logp = trace.logits.log_softmax();
        let dlogits: Vec<f64> = logp
            .iter()
            .enumerate()
            .map(|(c, lp)| f64::from(c == target) - lp.exp())
            .collect();
        let g = self.backward(&trace, &dlogits, None, true);
        Ok((logp[target], Image { height: image.height, width: image.width, data: g }))
    }

    /// Vector-Jacobian product of the logits with an arbitrary seed.
    pub fn input_gradient_seeded(&self, image: &Image, dlogits: &[f64]) -> Result<Image> {
        self.check_input(image)?;
        if dlogits.len() != self.num_classes {
            return Err(invalid("seed length must equal the number of classes"));
        }
        let trace = self.forward_trace(image);
        let g = self.backward(&trace, dlogits, None, true);
        Ok(Image { height: image.height, width: image.width, data: g })
    }

    /// Cross-entropy loss and its parameter gradient for one labelled image.
    pub fn loss_and_param_grad(&self, image: &Image, label: usize) -> Result<(f64, Vec<f64>)> {
        self.check_input(image)?;
        self.check_class(label)?;
        let trace = self.forward_trace(image);
        let logp = trace.logits.log_softmax();
        let dlogits: Vec<f64> = logp
            .iter()
            .enumerate()
            .map(|(c, lp)| lp.exp() - f64::from(c == label))
            .collect();
        let mut g = vec![0.0; self.layout.total];
        self.backward(&trace, &dlogits, Some(&mut g), false);
        Ok((-logp[label], g))
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(invalid("empty dataset"));
        }
        let hits: Vec<bool> = data
            .items
            .par_iter()
            .map(|(im, y)| self.predict(im).map(|p| p == *y))
            .collect::<Result<_>>()?;
        Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&Header {
            num_classes: self.num_classes,
            input_size: self.input_size,
            seed: self.seed,
            param_count: self.params.len(),
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(MAGIC.len() + 4 + header.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated model file".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic bytes, not a model file".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len).map_err(|_| Error::Format("truncated model header".into()))?;
        let len = u32::from_le_bytes(len) as usize;
        if r.len() < len {
            return Err(Error::Format("truncated model header".into()));
        }
        let header: Header = serde_json::from_slice(&r[..len])?;
        r = &r[len..];
        let mut net = TinyConvNet::new(header.num_classes, header.input_size, header.seed)?;
        let expected = net.layout.total;
        if header.param_count != expected || r.len() != 8 * expected {
            return Err(Error::Format(format!(
                "expected {expected} parameters, header says {} and body holds {} bytes",
                header.param_count,
                r.len()
            )));
        }
        for (p, chunk) in net.params.iter_mut().zip(r.chunks_exact(8)) {
            *p = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 20, lr: 0.05, momentum: 0.9, batch_size: 8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
    pub val_accuracy: f64,
}

/// Mini-batch SGD with momentum on the cross-entropy loss.
pub fn train_classifier(
    train: &Dataset,
    val: &Dataset,
    num_classes: usize,
    config: &TrainConfig,
) -> Result<(TinyConvNet, TrainReport)> {
    if train.is_empty() || val.is_empty() {
        return Err(invalid("training and validation sets must be nonempty"));
    }
    if config.batch_size == 0 {
        return Err(invalid("batch size must be positive"));
    }
    let size = train.items[0].0.height;
    let mut net = TinyConvNet::new(num_classes, size, config.seed)?;
    let mut velocity = vec![0.0; net.layout.total];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7261_696e);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_loss = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let per_item: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| {
                    let (im, y) = &train.items[i];
                    net.loss_and_param_grad(im, *y)
                })
                .collect::<Result<_>>()?;
            // fixed-order reduction keeps training bit-reproducible
            let mut grad = vec![0.0; net.layout.total];
            for (loss, g) in &per_item {
                total += loss;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            let scale = 1.0 / batch.len() as f64;
            for ((w, v), g) in net.params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = config.momentum * *v + g * scale;
                *w -= config.lr * *v;
            }
        }
        epoch_loss.push(total / train.len() as f64);
    }
    let val_accuracy = net.accuracy(val)?;
    Ok((net, TrainReport { epoch_loss, val_accuracy }))
}
