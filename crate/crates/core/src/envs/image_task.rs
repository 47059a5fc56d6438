//! Stochastic image-transition task: a 0-image always becomes a 1-image, a
//! 1-image becomes an image of a digit drawn uniformly from 2..=9.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::glyphs::{synthetic_glyph_set, GLYPH_SIDE};
use super::idx::{load_idx_images, load_idx_labels};
use crate::diffnum::Matrix;
use crate::error::{Error, Result};
use crate::transition::TransitionBatch;

pub const MNIST_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const MNIST_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";
pub const DEFAULT_IMAGE_BATCH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    Mnist,
    SyntheticGlyphs,
}

#[derive(Debug, Clone)]
pub struct ImageDataset {
    images: Vec<Vec<f64>>,
    labels: Vec<u8>,
    side: usize,
    source: DatasetSource,
    by_class: [Vec<usize>; 10],
}

/// 2x2 mean pooling of a square image of side `side` (must be even).
pub fn downsample_2x2(img: &[f64], side: usize) -> Vec<f64> {
    let half = side / 2;
    let mut out = vec![0.0; half * half];
    for r in 0..half {
        for c in 0..half {
            let at = |dr: usize, dc: usize| img[(2 * r + dr) * side + 2 * c + dc];
            out[r * half + c] = 0.25 * (at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1));
        }
    }
    out
}

fn find_file(dir: &Path, name: &str) -> Option<std::path::PathBuf> {
    let dotted = name.replacen("-idx", ".idx", 1);
    [name.to_string(), dotted]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

impl ImageDataset {
    pub fn new(images: Vec<Vec<f64>>, labels: Vec<u8>, side: usize, source: DatasetSource) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Dataset(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(bad) = images.iter().position(|im| im.len() != side * side) {
            return Err(Error::Dataset(format!("image {bad} is not {side}x{side}")));
        }
        let mut by_class: [Vec<usize>; 10] = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            if l > 9 {
                return Err(Error::Dataset(format!("label {l} at index {i} is not a digit")));
            }
            by_class[l as usize].push(i);
        }
        Ok(Self {
            images,
            labels,
            side,
            source,
            by_class,
        })
    }

    /// Reads the MNIST test split from `dir`.
    pub fn from_idx_dir(dir: &Path, downsample: bool) -> Result<Self> {
        let img_path = find_file(dir, MNIST_TEST_IMAGES)
            .ok_or_else(|| Error::Dataset(format!("{MNIST_TEST_IMAGES} not found in {}", dir.display())))?;
        let lbl_path = find_file(dir, MNIST_TEST_LABELS)
            .ok_or_else(|| Error::Dataset(format!("{MNIST_TEST_LABELS} not found in {}", dir.display())))?;
        let raw = load_idx_images(&img_path)?;
        let labels = load_idx_labels(&lbl_path)?;
        if labels.len() != raw.count {
            return Err(Error::Load {
                offset: 4,
                message: format!("label count {} does not match image count {}", labels.len(), raw.count),
            });
        }
        if raw.rows != raw.cols {
            return Err(Error::Dataset(format!("non-square images {}x{}", raw.rows, raw.cols)));
        }
        let mut side = raw.rows;
        let mut images: Vec<Vec<f64>> = (0..raw.count).map(|i| raw.image(i)).collect();
        if downsample {
            images = images.iter().map(|im| downsample_2x2(im, side)).collect();
            side /= 2;
        }
        Self::new(images, labels, side, DatasetSource::Mnist)
    }

    pub fn synthetic<R: Rng + ?Sized>(per_class: usize, downsample: bool, rng: &mut R) -> Result<Self> {
        let (mut images, labels) = synthetic_glyph_set(per_class, rng);
        let mut side = GLYPH_SIDE;
        if downsample {
            images = images.iter().map(|im| downsample_2x2(im, side)).collect();
            side /= 2;
        }
        Self::new(images, labels, side, DatasetSource::SyntheticGlyphs)
    }

    /// MNIST from `dir` when its files exist, otherwise the synthetic fallback.
    pub fn load_or_synthetic<R: Rng + ?Sized>(dir: Option<&Path>, downsample: bool, rng: &mut R) -> Result<Self> {
        match dir {
            Some(d) if find_file(d, MNIST_TEST_IMAGES).is_some() => Self::from_idx_dir(d, downsample),
            _ => {
                log::warn!("MNIST test files not found; using synthetic glyphs");
                Self::synthetic(1000, downsample, rng)
            }
        }
    }

    /// Shifts and scales all pixels by one mean and std computed over the whole set.
    pub fn standardized(mut self) -> Self {
        let n = self.images.iter().map(Vec::len).sum::<usize>().max(1) as f64;
        let mean = self.images.iter().flatten().sum::<f64>() / n;
        let var = self.images.iter().flatten().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt().max(1e-8);
        for p in self.images.iter_mut().flatten() {
            *p = (*p - mean) / std;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> usize {
        self.side * self.side
    }

    pub fn source(&self) -> DatasetSource {
        self.source
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn class_count(&self, digit: u8) -> usize {
        self.by_class[digit as usize].len()
    }

    fn check_classes(&self) -> Result<()> {
        match (0..10u8).find(|&d| self.by_class[d as usize].is_empty()) {
            Some(d) => Err(Error::Dataset(format!("no images of class {d}"))),
            None => Ok(()),
        }
    }

    fn random_of_class<R: Rng + ?Sized>(&self, digit: u8, rng: &mut R) -> usize {
        let class = &self.by_class[digit as usize];
        class[rng.random_range(0..class.len())]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageTransition {
    pub source: Vec<f64>,
    pub source_label: u8,
    pub target: Vec<f64>,
    pub target_label: u8,
}

fn transition_from<R: Rng + ?Sized>(ds: &ImageDataset, source_label: u8, rng: &mut R) -> ImageTransition {
    let src = ds.random_of_class(source_label, rng);
    let target_label = if source_label == 0 { 1 } else { rng.random_range(2..=9) };
    let tgt = ds.random_of_class(target_label, rng);
    ImageTransition {
        source: ds.images[src].clone(),
        source_label,
        target: ds.images[tgt].clone(),
        target_label,
    }
}

/// `n` transitions whose source digit is 0 or 1 with equal probability.
pub fn sample_image_batch<R: Rng + ?Sized>(ds: &ImageDataset, rng: &mut R, n: usize) -> Result<Vec<ImageTransition>> {
    ds.check_classes()?;
    Ok((0..n)
        .map(|_| {
            let label = rng.random_range(0..2u8);
            transition_from(ds, label, rng)
        })
        .collect())
}

/// `n` transitions that all start from `source_label` (0 or 1).
pub fn sample_from_source<R: Rng + ?Sized>(
    ds: &ImageDataset,
    source_label: u8,
    rng: &mut R,
    n: usize,
) -> Result<Vec<ImageTransition>> {
    if source_label > 1 {
        return Err(Error::Contract(format!("source label must be 0 or 1, got {source_label}")));
    }
    ds.check_classes()?;
    Ok((0..n).map(|_| transition_from(ds, source_label, rng)).collect())
}

/// Model input: source as state, an empty action, target as next state.
pub fn transitions_to_batch(ts: &[ImageTransition]) -> Result<TransitionBatch> {
    let n = ts.len();
    let dim = ts.first().map_or(0, |t| t.source.len());
    let mut states = Vec::with_capacity(n * dim);
    let mut next = Vec::with_capacity(n * dim);
    for t in ts {
        if t.source.len() != dim || t.target.len() != dim {
            return Err(Error::shape("image transition", dim, t.target.len()));
        }
        states.extend_from_slice(&t.source);
        next.extend_from_slice(&t.target);
    }
    TransitionBatch::new(
        Matrix::from_vec(n, dim, states),
        Matrix::zeros(n, 0),
        Matrix::from_vec(n, dim, next),
    )
}
