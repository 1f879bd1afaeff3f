use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::DynamicImage;

use super::model::{Image, SaliencyMap};
use crate::error::{Error, Result};

/// Reads an 8- or 16-bit grayscale PNG/PGM, scaling by the bit depth's
/// maximum into `[0, 1]`.
pub fn load_map(path: impl AsRef<Path>) -> Result<SaliencyMap> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width(), img.height());
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 255.0)
            .collect(),
        DynamicImage::ImageLuma16(g) => g
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 65535.0)
            .collect(),
        other => {
            return Err(Error::Format(format!(
                "{}: saliency maps must be single-channel, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    SaliencyMap::from_values(w, h, values)
}

/// Reads a scene frame: grayscale files give one channel, everything else
/// is converted to 8-bit RGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    match img {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            Image::new(
                w,
                h,
                1,
                g.into_raw()
                    .into_iter()
                    .map(|v| f64::from(v) / 255.0)
                    .collect(),
            )
        }
        other => Ok(Image::from_rgb8(&other.to_rgb8())),
    }
}

/// Writes a map as a 16-bit grayscale PNG.
pub fn save_map(map: &SaliencyMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = map.dims();
    let raw: Vec<u16> = map
        .values()
        .iter()
        .map(|v| (v * 65535.0).round() as u16)
        .collect();
    let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w, h, raw)
        .expect("buffer matches dimensions");
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Frame index from the last run of digits in a file stem.
pub fn frame_index_of(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end]
        .rfind(|c: char| !c.is_ascii_digit())
        .map_or(0, |i| i + 1);
    stem[start..end].parse().ok()
}

fn is_map_file(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
}

fn list(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    v.sort();
    Ok(v)
}

/// Map files keyed by `(dog id, frame index)`. Files directly in `dir` have
/// no dog id; each subdirectory is one dog.
pub fn map_index(dir: impl AsRef<Path>) -> Result<BTreeMap<(Option<String>, u64), PathBuf>> {
    let dir = dir.as_ref();
    let mut out = BTreeMap::new();
    let mut add = |dog: Option<String>, p: PathBuf| -> Result<()> {
        if let Some(idx) = frame_index_of(&p) {
            if let Some(prev) = out.insert((dog, idx), p.clone()) {
                return Err(Error::Validation(format!(
                    "two maps for frame {idx}: {} and {}",
                    prev.display(),
                    p.display()
                )));
            }
        }
        Ok(())
    };
    for p in list(dir)? {
        if p.is_dir() {
            let dog = p.file_name().and_then(|n| n.to_str()).map(str::to_string);
            for q in list(&p)?.into_iter().filter(|q| is_map_file(q)) {
                add(dog.clone(), q)?;
            }
        } else if is_map_file(&p) {
            add(None, p)?;
        }
    }
    Ok(out)
}
