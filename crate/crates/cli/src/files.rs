//! Path handling, worker pool setup and small conversions.

use std::fs;
use std::path::{Path, PathBuf};

use multinex::Tensor;
use rayon::prelude::*;

use crate::Failure;

const EXTENSIONS: [&str; 3] = ["png", "ppm", "pnm"];

/// Caps the rayon pool at `MULTINEX_THREADS` when set.
pub fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("MULTINEX_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("MULTINEX_THREADS must be a positive integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files directly under `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let rd = fs::read_dir(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry
            .map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?
            .path();
        if path.is_file() && is_image(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// A single image or the images of a directory, with their file names.
pub fn inputs(path: &Path) -> Result<Vec<(String, PathBuf)>, Failure> {
    if !path.exists() {
        return Err(Failure::Usage(format!("{} does not exist", path.display())));
    }
    let files = if path.is_dir() {
        list_images(path)?
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(Failure::Domain(format!("no images in {}", path.display())));
    }
    Ok(files.into_iter().map(|p| (file_name(&p), p)).collect())
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Runs `f` on every item in parallel and returns results in input order.
/// The first failure in that order wins.
pub fn par_map<I: Sync, O: Send>(
    items: &[I],
    f: impl Fn(&I) -> Result<O, Failure> + Sync + Send,
) -> Result<Vec<O>, Failure> {
    let results: Vec<Result<O, Failure>> = items.par_iter().map(f).collect();
    results.into_iter().collect()
}

/// Maps `[min, max]` of `t` onto `[0, 1]`. Returns the mapped tensor and
/// `(min, max)`; a constant tensor maps to 0.
pub fn to_unit_range(t: &Tensor<f32>) -> (Tensor<f32>, f32, f32) {
    let (lo, hi) = (t.min_value(), t.max_value());
    let span = hi - lo;
    let mapped = if span > 0.0 {
        t.map(|v| (v - lo) / span)
    } else {
        t.map(|_| 0.0)
    };
    (mapped, lo, hi)
}

/// Parses `WIDTHxHEIGHT`.
pub fn parse_resolution(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Usage(format!("resolution must look like 600x400, got '{s}'"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

/// Places the channels of `t` side by side as one grayscale image.
pub fn tile_channels(t: &Tensor<f64>) -> Tensor<f64> {
    let (h, w, c) = (t.height(), t.width(), t.channels());
    Tensor::from_fn(h, w * c, 1, |y, x, _| t.get(y, x % w, x / w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_parsing() {
        assert_eq!(parse_resolution("600x400").ok(), Some((600, 400)));
        assert_eq!(parse_resolution("32X16").ok(), Some((32, 16)));
        assert!(parse_resolution("600").is_err());
        assert!(parse_resolution("0x4").is_err());
    }

    #[test]
    fn unit_range_endpoints() {
        let t = Tensor::from_vec(1, 3, 1, vec![-0.5f32, 0.0, 1.5]).unwrap();
        let (m, lo, hi) = to_unit_range(&t);
        assert_eq!((lo, hi), (-0.5, 1.5));
        assert_eq!(m.data(), &[0.0, 0.25, 1.0]);
        let (c, _, _) = to_unit_range(&Tensor::full(2, 2, 1, 0.3f32));
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tiles_channels_left_to_right() {
        let t = Tensor::from_fn(2, 2, 3, |y, x, c| (c * 10 + y * 2 + x) as f64);
        let g = tile_channels(&t);
        assert_eq!((g.height(), g.width()), (2, 6));
        assert_eq!(g.get(1, 5, 0), 23.0);
        assert_eq!(g.get(0, 2, 0), 10.0);
    }

    #[test]
    fn image_extensions() {
        assert!(is_image(Path::new("a/b.PNG")));
        assert!(is_image(Path::new("x.ppm")));
        assert!(!is_image(Path::new("notes.txt")));
    }
}
