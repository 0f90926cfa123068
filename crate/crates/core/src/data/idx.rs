//! Big-endian IDX files as used by the MNIST distribution, optionally gzipped
//! (detected by a `.gz` extension).

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{DataSplit, Dataset, Split};
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    if is_gz(path) {
        GzDecoder::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
    } else {
        file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(bytes)
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Length {
            path: path.to_path_buf(),
            expected: (at + 4) as u64,
            actual: bytes.len() as u64,
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != expected {
        return Err(Error::format(
            path,
            format!("bad IDX magic 0x{magic:08x}, expected 0x{expected:08x}"),
        ));
    }
    Ok(())
}

/// Total byte length `header + prod(dims)`, or a format error on overflow.
fn declared_len(header: usize, dims: &[u32], path: &Path) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .and_then(|n| n.checked_add(header))
        .ok_or_else(|| Error::format(path, format!("IDX dimensions {dims:?} overflow")))
}

fn check_len(bytes: &[u8], expected: usize, path: &Path) -> Result<()> {
    if bytes.len() != expected {
        return Err(Error::Length {
            path: path.to_path_buf(),
            expected: expected as u64,
            actual: bytes.len() as u64,
        });
    }
    Ok(())
}

fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    check_magic(bytes, IDX_IMAGES_MAGIC, path)?;
    let dims = [
        be_u32(bytes, 4, path)?,
        be_u32(bytes, 8, path)?,
        be_u32(bytes, 12, path)?,
    ];
    check_len(bytes, declared_len(16, &dims, path)?, path)?;
    let [n, rows, cols] = dims.map(|d| d as usize);
    Ok((n, rows, cols, bytes[16..].to_vec()))
}

fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC, path)?;
    let n = be_u32(bytes, 4, path)?;
    check_len(bytes, declared_len(8, &[n], path)?, path)?;
    Ok(bytes[8..].to_vec())
}

/// Loads an IDX image/label file pair; pixels are scaled by 1/255.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    split: Split,
) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let (n, rows, cols, pixels) = parse_images(&read_all(images_path)?, images_path)?;
    let labels = parse_labels(&read_all(labels_path)?, labels_path)?;
    if labels.len() != n {
        return Err(Error::format(
            labels_path,
            format!("{} labels for {n} images", labels.len()),
        ));
    }
    let num_classes = labels.iter().copied().max().map_or(1, |m| m as usize + 1);
    let images = pixels.iter().map(|&p| p as f32 / 255.0).collect();
    Dataset::new(images, labels, [rows, cols, 1], num_classes.max(10), split)
}

/// Writes a single-channel dataset as an IDX pair. Pixel values are mapped
/// back to bytes with `round(v * 255)`, clamped to `0..=255`.
pub fn write_idx(
    ds: &Dataset,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let [h, w, c] = ds.shape();
    if c != 1 {
        return Err(Error::argument(format!(
            "IDX images are single-channel, dataset has {c} channels"
        )));
    }
    let mut img = Vec::with_capacity(16 + ds.images().len());
    for v in [IDX_IMAGES_MAGIC, ds.len() as u32, h as u32, w as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend(
        ds.images()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    let mut lab = Vec::with_capacity(8 + ds.len());
    for v in [IDX_LABELS_MAGIC, ds.len() as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(ds.labels());
    write_all(images_path.as_ref(), &img)?;
    write_all(labels_path.as_ref(), &lab)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let res = if is_gz(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(bytes).and_then(|_| enc.finish().map(|_| ()))
    } else {
        let mut file = file;
        file.write_all(bytes)
    };
    res.map_err(|e| Error::io(path, e))
}

fn find(dir: &Path, stem: &str) -> Result<PathBuf> {
    for name in [stem.to_string(), format!("{stem}.gz")] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::io(
        dir.join(stem),
        std::io::Error::new(std::io::ErrorKind::NotFound, "IDX file not found (also tried .gz)"),
    ))
}

/// Loads `train-*-idx?-ubyte[.gz]` and `t10k-*-idx?-ubyte[.gz]` from `dir`.
pub fn load_mnist_dir(dir: impl AsRef<Path>) -> Result<DataSplit> {
    let dir = dir.as_ref();
    let train = load_idx(
        find(dir, "train-images-idx3-ubyte")?,
        find(dir, "train-labels-idx1-ubyte")?,
        Split::Train,
    )?;
    let test = load_idx(
        find(dir, "t10k-images-idx3-ubyte")?,
        find(dir, "t10k-labels-idx1-ubyte")?,
        Split::Test,
    )?;
    Ok(DataSplit { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut b = magic.to_be_bytes().to_vec();
        for d in dims {
            b.extend_from_slice(&d.to_be_bytes());
        }
        b
    }

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    /// Two 2x3 images written byte by byte.
    fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
        let mut img = header(0x0000_0803, &[2, 2, 3]);
        img.extend_from_slice(&[0, 255, 51, 102, 153, 204, 1, 2, 3, 4, 5, 6]);
        let mut lab = header(0x0000_0801, &[2]);
        lab.extend_from_slice(&[7, 3]);
        (write(dir, "img", &img), write(dir, "lab", &lab))
    }

    #[test]
    fn handcrafted_fixture_is_recovered_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = fixture(dir.path());
        let ds = load_idx(&img, &lab, Split::Train).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.shape(), [2, 3, 1]);
        assert_eq!(ds.labels(), &[7, 3]);
        assert_eq!(ds.image(0)[0], 0.0);
        assert_eq!(ds.image(0)[1], 1.0);
        assert_eq!(ds.image(0)[2], 51.0 / 255.0);
        assert_eq!(ds.image(1)[5], 6.0 / 255.0);
    }

    #[test]
    fn wrong_magic_names_the_observed_value() {
        let dir = tempfile::tempdir().unwrap();
        let (_, lab) = fixture(dir.path());
        let mut img = header(0x0000_0802, &[1, 1, 1]);
        img.push(0);
        let img = write(dir.path(), "bad", &img);
        let err = load_idx(&img, &lab, Split::Train).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().contains("0x00000802"), "{err}");
    }

    #[test]
    fn truncated_and_padded_files_are_length_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = fixture(dir.path());
        let bytes = std::fs::read(&img).unwrap();
        let short = write(dir.path(), "short", &bytes[..bytes.len() - 1]);
        assert!(matches!(
            load_idx(&short, &lab, Split::Train),
            Err(Error::Length { expected: 28, actual: 27, .. })
        ));
        let mut long = bytes.clone();
        long.push(0);
        let long = write(dir.path(), "long", &long);
        assert!(matches!(
            load_idx(&long, &lab, Split::Train),
            Err(Error::Length { .. })
        ));
        let stub = write(dir.path(), "stub", &[0, 0, 8]);
        assert!(matches!(
            load_idx(&stub, &lab, Split::Train),
            Err(Error::Length { .. })
        ));
    }

    #[test]
    fn dimension_overflow_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let (_, lab) = fixture(dir.path());
        let img = write(
            dir.path(),
            "huge",
            &header(0x0000_0803, &[u32::MAX, u32::MAX, u32::MAX]),
        );
        assert!(matches!(
            load_idx(&img, &lab, Split::Train),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn label_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = fixture(dir.path());
        let mut lab = header(0x0000_0801, &[1]);
        lab.push(0);
        let lab = write(dir.path(), "lab1", &lab);
        assert!(load_idx(&img, &lab, Split::Train).is_err());
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_idx("/nonexistent/x", "/nonexistent/y", Split::Test).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/x"));
    }

    #[test]
    fn round_trip_plain_and_gzip() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = fixture(dir.path());
        let ds = load_idx(&img, &lab, Split::Train).unwrap();
        for (a, b) in [("a", "b"), ("a.gz", "b.gz")] {
            let (pa, pb) = (dir.path().join(a), dir.path().join(b));
            write_idx(&ds, &pa, &pb).unwrap();
            assert_eq!(load_idx(&pa, &pb, Split::Train).unwrap(), ds);
        }
    }
}
