//! MNIST-style IDX files: big-endian u32 magic and dimensions, then raw u8 payload.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use super::Dataset;
use crate::error::{CadenError, Result};
use crate::Scalar;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32_be<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_be_bytes(buf))
}

fn expect_magic<R: Read>(r: &mut R, magic: u32) -> Result<()> {
    let found = read_u32_be(r)?;
    if found != magic {
        return Err(CadenError::Format(format!("bad IDX magic {found:#010x}, expected {magic:#010x}")));
    }
    Ok(())
}

pub fn read_idx_images<R: Read>(mut r: R) -> Result<IdxImages> {
    expect_magic(&mut r, IDX_IMAGES_MAGIC)?;
    let count = read_u32_be(&mut r)? as usize;
    let rows = read_u32_be(&mut r)? as usize;
    let cols = read_u32_be(&mut r)? as usize;
    let mut pixels = vec![0u8; count * rows * cols];
    r.read_exact(&mut pixels)?;
    Ok(IdxImages { count, rows, cols, pixels })
}

pub fn read_idx_labels<R: Read>(mut r: R) -> Result<Vec<u8>> {
    expect_magic(&mut r, IDX_LABELS_MAGIC)?;
    let count = read_u32_be(&mut r)? as usize;
    let mut labels = vec![0u8; count];
    r.read_exact(&mut labels)?;
    Ok(labels)
}

/// Loads an image/label file pair with pixels scaled to `[0, 1]`. The class
/// count is `max(label) + 1`, or 10 if that is smaller.
pub fn load_idx_dataset<S: Scalar>(images: &Path, labels: &Path) -> Result<Dataset<S>> {
    let img = read_idx_images(BufReader::new(File::open(images)?))?;
    let lab = read_idx_labels(BufReader::new(File::open(labels)?))?;
    if img.count != lab.len() {
        return Err(CadenError::Format(format!("{} images but {} labels", img.count, lab.len())));
    }
    let scale = S::of(1.0 / 255.0);
    let features = img.pixels.iter().map(|&p| S::of(p as f64) * scale).collect();
    let classes = lab.iter().map(|&l| l as usize + 1).max().unwrap_or(0).max(10);
    Dataset::new(features, lab.into_iter().map(usize::from).collect(), img.rows * img.cols, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn images_bytes(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [IDX_IMAGES_MAGIC, count, rows, cols] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(pixels);
        out
    }

    fn labels_bytes(labels: &[u8]) -> Vec<u8> {
        let mut out = IDX_LABELS_MAGIC.to_be_bytes().to_vec();
        out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    #[test]
    fn parses_headers() {
        let img = read_idx_images(&images_bytes(2, 2, 2, &[0, 255, 1, 2, 3, 4, 5, 6])[..]).unwrap();
        assert_eq!((img.count, img.rows, img.cols), (2, 2, 2));
        assert_eq!(img.pixels[1], 255);
        assert_eq!(read_idx_labels(&labels_bytes(&[3, 7])[..]).unwrap(), vec![3, 7]);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        assert!(matches!(read_idx_images(&labels_bytes(&[1])[..]), Err(CadenError::Format(_))));
        assert!(matches!(read_idx_labels(&images_bytes(1, 1, 1, &[0])[..]), Err(CadenError::Format(_))));
        assert!(matches!(read_idx_images(&images_bytes(2, 2, 2, &[0; 5])[..]), Err(CadenError::Io(_))));
    }

    #[test]
    fn loads_scaled_dataset_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img.idx");
        let lp = dir.path().join("lab.idx");
        File::create(&ip).unwrap().write_all(&images_bytes(2, 1, 2, &[0, 255, 51, 102])).unwrap();
        File::create(&lp).unwrap().write_all(&labels_bytes(&[0, 9])).unwrap();
        let ds: Dataset<f64> = load_idx_dataset(&ip, &lp).unwrap();
        assert_eq!((ds.len(), ds.num_features(), ds.num_classes()), (2, 2, 10));
        assert_eq!(ds.sample(0).0, &[0.0, 1.0]);
        assert!((ds.sample(1).0[0] - 0.2).abs() < 1e-12);
        assert_eq!(ds.sample(1).1, 9);
    }
}
