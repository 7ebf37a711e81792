//! On-disk formats: 8-bit RGB PNG for images and patch textures, a JSON
//! sidecar next to every patch, and a JSON manifest for exported datasets.
//! Quantization happens only here; everything in memory stays real-valued.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{AttackConfig, Patch, TransformDistribution};
use crate::data::{Dataset, SceneSpec, Split};
use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;
use crate::render::{Image, CHANNELS};

/// `round(v * 255)` after clamping to [0, 1].
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_png(image: &Image) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, image.width as u32, image.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header()?;
        let mut buf = Vec::with_capacity(image.height * image.width * CHANNELS);
        for y in 0..image.height {
            for x in 0..image.width {
                for c in 0..CHANNELS {
                    buf.push(quantize(image.get(c, y, x)));
                }
            }
        }
        w.write_image_data(&buf)?;
    }
    Ok(bytes)
}

pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let dec = png::Decoder::new(bytes);
    let mut reader = dec.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!("expected 8-bit PNG, got {:?}", info.bit_depth)));
    }
    let stride = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(Error::Format(format!("expected RGB PNG, got {other:?}"))),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut image = Image::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                image.set(c, y, x, buf[y * info.line_size + x * stride + c] as f64 / 255.0);
            }
        }
    }
    Ok(image)
}

pub fn write_png(image: &Image, path: &Path) -> Result<()> {
    fs::write(path, encode_png(image)?)?;
    Ok(())
}

pub fn read_png(path: &Path) -> Result<Image> {
    decode_png(&fs::read(path)?)
}

/// Sidecar written next to a patch PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchMeta {
    pub target: usize,
    pub texture_size: usize,
    pub seed: u64,
    pub support: TransformDistribution,
    pub config: AttackConfig,
    pub camera: CameraIntrinsics,
    pub objective_start: Option<f64>,
    pub objective_end: Option<f64>,
}

impl PatchMeta {
    pub fn of(patch: &Patch) -> Self {
        PatchMeta {
            target: patch.target,
            texture_size: patch.texture.width,
            seed: patch.config.seed,
            support: patch.support,
            config: patch.config,
            camera: patch.camera,
            objective_start: patch.objective_start,
            objective_end: patch.objective_end,
        }
    }
}

/// `foo.png` -> `foo.json`.
pub fn sidecar_path(png_path: &Path) -> PathBuf {
    png_path.with_extension("json")
}

/// Writes the quantized texture to `path` and its sidecar beside it.
pub fn save_patch(patch: &Patch, path: &Path) -> Result<()> {
    write_png(&patch.texture, path)?;
    let meta = serde_json::to_string_pretty(&PatchMeta::of(patch))?;
    fs::write(sidecar_path(path), meta + "\n")?;
    Ok(())
}

/// Reads a patch back. The texture carries the 8-bit quantization.
pub fn load_patch(path: &Path) -> Result<Patch> {
    let texture = read_png(path)?;
    let meta: PatchMeta = serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    if texture.width != meta.texture_size || texture.height != meta.texture_size {
        return Err(Error::Format(format!(
            "patch is {}x{} but sidecar says {}",
            texture.width, texture.height, meta.texture_size
        )));
    }
    Ok(Patch {
        texture,
        target: meta.target,
        support: meta.support,
        config: meta.config,
        camera: meta.camera,
        objective_start: meta.objective_start,
        objective_end: meta.objective_end,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub class: usize,
    pub spec: SceneSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub split: Split,
    pub entries: Vec<ManifestEntry>,
}

/// Writes every scene of `data` as `<dir>/<split>_<index>.png` plus
/// `<dir>/<split>_manifest.json`.
pub fn export_dataset(data: &Dataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let name = data.split.name();
    let mut entries = Vec::with_capacity(data.len());
    for (i, ((image, class), spec)) in data.items.iter().zip(&data.specs).enumerate() {
        let file = format!("{name}_{i:05}.png");
        write_png(image, &dir.join(&file))?;
        entries.push(ManifestEntry { file, class: *class, spec: *spec });
    }
    let path = dir.join(format!("{name}_manifest.json"));
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &Manifest { split: data.split, entries })?;
    Ok(path)
}

/// Loads an exported split from its manifest (images are the quantized PNGs).
pub fn import_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(manifest_path)?))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut items = Vec::with_capacity(manifest.entries.len());
    let mut specs = Vec::with_capacity(manifest.entries.len());
    for e in manifest.entries {
        items.push((read_png(&dir.join(&e.file))?, e.class));
        specs.push(e.spec);
    }
    Ok(Dataset { split: manifest.split, items, specs })
}
