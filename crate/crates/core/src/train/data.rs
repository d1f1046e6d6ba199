//! Paired low-light / reference images and patch sampling.
//!
//! On disk a dataset is a directory with `low/` and `high/` subdirectories
//! holding images with identical file names.

use std::borrow::Cow;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::load_image;
use crate::tensor::Tensor;

const EXTENSIONS: [&str; 3] = ["png", "ppm", "pnm"];

#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub name: String,
    pub low: Tensor<f32>,
    pub high: Tensor<f32>,
}

impl ImagePair {
    pub fn new(name: impl Into<String>, low: Tensor<f32>, high: Tensor<f32>) -> Result<Self> {
        let name = name.into();
        if low.shape() != high.shape() || low.channels() != 3 {
            return Err(Error::Dataset(format!(
                "pair '{name}': low {} and high {} must be equal RGB shapes",
                low.shape(),
                high.shape()
            )));
        }
        Ok(Self { name, low, high })
    }
}

#[derive(Debug, Clone)]
enum Source {
    Files(Vec<(String, PathBuf, PathBuf)>),
    Memory(Vec<ImagePair>),
}

#[derive(Debug, Clone)]
pub struct PairedDataset {
    source: Source,
}

fn image_names(dir: &Path) -> Result<Vec<String>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if path.is_file() && ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

impl PairedDataset {
    /// Scans `root/low` and `root/high`. Images are read lazily.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let (low_dir, high_dir) = (root.join("low"), root.join("high"));
        for d in [&low_dir, &high_dir] {
            if !d.is_dir() {
                return Err(Error::Dataset(format!("missing directory {}", d.display())));
            }
        }
        let low = image_names(&low_dir)?;
        let high = image_names(&high_dir)?;
        if let Some(n) = low.iter().find(|n| high.binary_search(n).is_err()) {
            return Err(Error::Dataset(format!("{} has no partner in high/", low_dir.join(n).display())));
        }
        if let Some(n) = high.iter().find(|n| low.binary_search(n).is_err()) {
            return Err(Error::Dataset(format!("{} has no partner in low/", high_dir.join(n).display())));
        }
        if low.is_empty() {
            return Err(Error::Dataset(format!("no images under {}", low_dir.display())));
        }
        let pairs = low
            .into_iter()
            .map(|n| (n.clone(), low_dir.join(&n), high_dir.join(&n)))
            .collect();
        Ok(Self {
            source: Source::Files(pairs),
        })
    }

    pub fn from_pairs(pairs: Vec<ImagePair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Dataset("dataset is empty".into()));
        }
        Ok(Self {
            source: Source::Memory(pairs),
        })
    }

    pub fn len(&self) -> usize {
        match &self.source {
            Source::Files(p) => p.len(),
            Source::Memory(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> Vec<String> {
        match &self.source {
            Source::Files(p) => p.iter().map(|(n, _, _)| n.clone()).collect(),
            Source::Memory(p) => p.iter().map(|x| x.name.clone()).collect(),
        }
    }

    pub fn get(&self, i: usize) -> Result<Cow<'_, ImagePair>> {
        match &self.source {
            Source::Memory(p) => p
                .get(i)
                .map(Cow::Borrowed)
                .ok_or_else(|| Error::Dataset(format!("index {i} out of range"))),
            Source::Files(p) => {
                let (name, lo, hi) = p
                    .get(i)
                    .ok_or_else(|| Error::Dataset(format!("index {i} out of range")))?;
                Ok(Cow::Owned(ImagePair::new(name.clone(), load_image(lo)?, load_image(hi)?)?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augment {
    pub random_crop: bool,
    pub flip: bool,
    pub rotate: bool,
}

impl Default for Augment {
    fn default() -> Self {
        Self {
            random_crop: true,
            flip: true,
            rotate: true,
        }
    }
}

impl Augment {
    pub const NONE: Augment = Augment {
        random_crop: false,
        flip: false,
        rotate: false,
    };
}

/// Crops, flips and rotates both members of a pair identically.
pub fn augment_pair<R: Rng>(
    pair: &ImagePair,
    patch: usize,
    aug: Augment,
    rng: &mut R,
) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let (h, w) = (pair.low.height(), pair.low.width());
    if patch == 0 || patch > h.min(w) {
        return Err(Error::Dataset(format!(
            "patch {patch} does not fit image '{}' of {h}x{w}",
            pair.name
        )));
    }
    let (y0, x0) = if aug.random_crop {
        (rng.gen_range(0..=h - patch), rng.gen_range(0..=w - patch))
    } else {
        (0, 0)
    };
    let mut lo = pair.low.crop(y0, x0, patch, patch)?;
    let mut hi = pair.high.crop(y0, x0, patch, patch)?;
    if aug.flip {
        if rng.gen::<bool>() {
            lo = lo.flip_horizontal();
            hi = hi.flip_horizontal();
        }
        if rng.gen::<bool>() {
            lo = lo.flip_vertical();
            hi = hi.flip_vertical();
        }
    }
    if aug.rotate {
        let k = rng.gen_range(0..4);
        lo = lo.rot90(k);
        hi = hi.rot90(k);
    }
    Ok((lo, hi))
}

/// Draws `batch` pairs uniformly with replacement and augments each.
pub fn sample_batch<R: Rng>(
    ds: &PairedDataset,
    batch: usize,
    patch: usize,
    aug: Augment,
    rng: &mut R,
) -> Result<Vec<(Tensor<f32>, Tensor<f32>)>> {
    if ds.is_empty() {
        return Err(Error::Dataset("dataset is empty".into()));
    }
    (0..batch)
        .map(|_| {
            let i = rng.gen_range(0..ds.len());
            let pair = ds.get(i)?;
            augment_pair(&pair, patch, aug, rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(h: usize, w: usize) -> ImagePair {
        let lo = Tensor::from_fn(h, w, 3, |y, x, c| (y * 31 + x * 7 + c) as f32 / 1000.0);
        let hi = lo.map(|v| v * 2.0);
        ImagePair::new("a", lo, hi).unwrap()
    }

    #[test]
    fn no_augmentation_is_top_left() {
        let p = pair(10, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (lo, hi) = augment_pair(&p, 4, Augment::NONE, &mut rng).unwrap();
        assert_eq!(lo, p.low.crop(0, 0, 4, 4).unwrap());
        assert_eq!(hi, p.high.crop(0, 0, 4, 4).unwrap());
    }

    #[test]
    fn pairs_stay_aligned() {
        let p = pair(16, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (lo, hi) = augment_pair(&p, 8, Augment::default(), &mut rng).unwrap();
            assert_eq!(lo.map(|v| v * 2.0), hi);
        }
    }

    #[test]
    fn seeded_batches_repeat() {
        let ds = PairedDataset::from_pairs(vec![pair(12, 12), pair(12, 12)]).unwrap();
        let a = sample_batch(&ds, 3, 5, Augment::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_batch(&ds, 3, 5, Augment::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_patch_rejected() {
        let ds = PairedDataset::from_pairs(vec![pair(6, 8)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_batch(&ds, 1, 7, Augment::NONE, &mut rng).is_err());
        assert!(PairedDataset::from_pairs(vec![]).is_err());
    }
}
