//! Texture warping, digital insertion, and the reverse pass back to texels.
//!
//! Images are planar RGB (`[channel][row][col]`) with values in `[0, 1]`.
//! Warping is inverse-mapped: each destination pixel center is pulled
//! through `H^-1` into texture space and bilinearly sampled, so the
//! composite is linear in the texel values and its gradient is exact.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    homography_from_correspondences, project_patch, CameraIntrinsics, Homography, PatchPlacement,
    Point2, Quad,
};

pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    /// Planar layout, `data[(c * height + y) * width + x]`.
    pub data: Vec<f64>,
}

/// Patch textures share the image layout.
pub type PatchTexture = Image;

impl Image {
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Image {
            height,
            width,
            data: vec![value; CHANNELS * height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_data(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != CHANNELS * height * width {
            return Err(invalid(format!(
                "expected {} values for a {height}x{width} image, got {}",
                CHANNELS * height * width,
                data.len()
            )));
        }
        Ok(Image { height, width, data })
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        let i = self.idx(c, y, x);
        self.data[i] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Mask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Mask {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Mask {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn coverage(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Bilinear footprint of one destination pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelSample {
    /// Destination pixel index within one plane.
    pub pixel: usize,
    /// Texel indices within one texture plane.
    pub texels: [usize; 4],
    pub weights: [f64; 4],
}

/// Forward-pass bookkeeping needed by [`backprop_to_texture`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeRecord {
    pub homography: Homography,
    pub mask: Mask,
    pub texture_height: usize,
    pub texture_width: usize,
    pub samples: Vec<PixelSample>,
}

impl CompositeRecord {
    pub fn output_shape(&self) -> (usize, usize) {
        (self.mask.height, self.mask.width)
    }
}

/// Texture corners in texel coordinates, texture-corner order.
pub fn texture_corners(th: usize, tw: usize) -> [Point2; 4] {
    let (w, h) = (tw as f64, th as f64);
    [
        Point2::new(0.0, 0.0),
        Point2::new(w, 0.0),
        Point2::new(w, h),
        Point2::new(0.0, h),
    ]
}

#[inline]
fn bilinear(u: f64, v: f64, th: usize, tw: usize) -> ([usize; 4], [f64; 4]) {
    // texel (i, j) is centered at (i + 0.5, j + 0.5)
    let su = u - 0.5;
    let sv = v - 0.5;
    let i0 = su.floor();
    let j0 = sv.floor();
    let fu = su - i0;
    let fv = sv - j0;
    let clamp_x = |i: f64| (i.max(0.0) as usize).min(tw - 1);
    let clamp_y = |j: f64| (j.max(0.0) as usize).min(th - 1);
    let (x0, x1) = (clamp_x(i0), clamp_x(i0 + 1.0));
    let (y0, y1) = (clamp_y(j0), clamp_y(j0 + 1.0));
    (
        [y0 * tw + x0, y0 * tw + x1, y1 * tw + x0, y1 * tw + x1],
        [
            (1.0 - fu) * (1.0 - fv),
            fu * (1.0 - fv),
            (1.0 - fu) * fv,
            fu * fv,
        ],
    )
}

/// Warps `q` into an `out_h x out_w` canvas; `h` maps texel coordinates to pixels.
pub fn warp_patch(
    q: &PatchTexture,
    h: &Homography,
    out_w: usize,
    out_h: usize,
    quad: &Quad,
) -> Result<(Image, Mask, CompositeRecord)> {
    if q.height == 0 || q.width == 0 {
        return Err(invalid("empty patch texture"));
    }
    let inv = h.inverse()?;
    let (th, tw) = (q.height, q.width);
    let mut warped = Image::zeros(out_h, out_w);
    let mut mask = Mask::zeros(out_h, out_w);
    let mut samples = Vec::new();

    let (x0, y0, x1, y1) = quad.bounds();
    let col_lo = x0.floor().max(0.0) as usize;
    let row_lo = y0.floor().max(0.0) as usize;
    let col_hi = (x1.ceil().max(0.0) as usize).min(out_w);
    let row_hi = (y1.ceil().max(0.0) as usize).min(out_h);
    let tex_plane = th * tw;

    for row in row_lo..row_hi {
        for col in col_lo..col_hi {
            let center = Point2::new(col as f64 + 0.5, row as f64 + 0.5);
            if !quad.contains(&center) {
                continue;
            }
            let Some(src) = inv.apply(&center) else { continue };
            if !(src.x >= 0.0 && src.x <= tw as f64 && src.y >= 0.0 && src.y <= th as f64) {
                continue;
            }
            let (texels, weights) = bilinear(src.x, src.y, th, tw);
            let pixel = row * out_w + col;
            mask.data[pixel] = 1.0;
            for c in 0..CHANNELS {
                let base = c * tex_plane;
                let vals = texels.map(|t| q.data[base + t]);
                let v: f64 = vals.iter().zip(weights.iter()).map(|(x, w)| w * x).sum();
                // rounding can push a convex combination one ulp outside its inputs
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                warped.data[c * out_h * out_w + pixel] = v.clamp(lo, hi);
            }
            samples.push(PixelSample { pixel, texels, weights });
        }
    }

    let record = CompositeRecord {
        homography: *h,
        mask: mask.clone(),
        texture_height: th,
        texture_width: tw,
        samples,
    };
    Ok((warped, mask, record))
}

/// `mask * warped + (1 - mask) * scene`.
pub fn insert_patch(warped: &Image, mask: &Mask, scene: &Image) -> Result<Image> {
    if !warped.same_shape(scene) || mask.height != scene.height || mask.width != scene.width {
        return Err(invalid("warped patch, mask and scene must share dimensions"));
    }
    let plane = scene.plane_len();
    let mut out = scene.clone();
    for c in 0..CHANNELS {
        for p in 0..plane {
            let m = mask.data[p];
            if m != 0.0 {
                let i = c * plane + p;
                out.data[i] = m * warped.data[i] + (1.0 - m) * scene.data[i];
            }
        }
    }
    Ok(out)
}

/// Full applicator: project, fit the homography, warp, insert.
///
/// Returns the scene unchanged and no record when the placement cannot be
/// rendered (edge-on, back-facing, behind the camera, sub-pixel).
pub fn apply_patch(
    q: &PatchTexture,
    placement: &PatchPlacement,
    k: &CameraIntrinsics,
    scene: &Image,
) -> Result<(Image, Option<CompositeRecord>)> {
    placement.validate()?;
    if scene.height != k.height || scene.width != k.width {
        return Err(invalid(format!(
            "scene is {}x{} but camera is {}x{}",
            scene.height, scene.width, k.height, k.width
        )));
    }
    let Ok(quad) = project_patch(placement, k) else {
        return Ok((scene.clone(), None));
    };
    let h = match homography_from_correspondences(&texture_corners(q.height, q.width), &quad) {
        Ok(h) => h,
        Err(Error::DegenerateCorrespondence) => return Ok((scene.clone(), None)),
        Err(e) => return Err(e),
    };
    let (warped, mask, rec) = warp_patch(q, &h, scene.width, scene.height, &quad)?;
    let out = insert_patch(&warped, &mask, scene)?;
    Ok((out, Some(rec)))
}

/// Reverse pass of the composite with respect to texel values.
pub fn backprop_to_texture(rec: &CompositeRecord, grad_out: &Image) -> Result<PatchTexture> {
    let (h, w) = rec.output_shape();
    if grad_out.height != h || grad_out.width != w {
        return Err(invalid(format!(
            "gradient is {}x{} but the record was produced for {h}x{w}",
            grad_out.height, grad_out.width
        )));
    }
    let (th, tw) = (rec.texture_height, rec.texture_width);
    let mut grad = Image::zeros(th, tw);
    let plane = h * w;
    let tex_plane = th * tw;
    for s in &rec.samples {
        let m = rec.mask.data[s.pixel];
        for c in 0..CHANNELS {
            let g = m * grad_out.data[c * plane + s.pixel];
            if g == 0.0 {
                continue;
            }
            let base = c * tex_plane;
            for (&t, &wt) in s.texels.iter().zip(s.weights.iter()) {
                grad.data[base + t] += wt * g;
            }
        }
    }
    Ok(grad)
}
