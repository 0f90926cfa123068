//! CIFAR-10 binary batches: fixed 3073-byte records, one label byte followed
//! by 1024 red, 1024 green and 1024 blue bytes.

use std::path::Path;

use super::{DataSplit, Dataset, Split};
use crate::error::{Error, Result};

pub const CIFAR_RECORD_LEN: usize = 1 + 3 * 32 * 32;

const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
const TEST_FILE: &str = "test_batch.bin";

fn parse_into(bytes: &[u8], path: &Path, images: &mut Vec<f32>, labels: &mut Vec<u8>) -> Result<()> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        return Err(Error::format(
            path,
            format!(
                "{} bytes is not a whole number of {CIFAR_RECORD_LEN}-byte records",
                bytes.len()
            ),
        ));
    }
    for rec in bytes.chunks_exact(CIFAR_RECORD_LEN) {
        if rec[0] >= 10 {
            return Err(Error::format(path, format!("label byte {} outside 0..10", rec[0])));
        }
        labels.push(rec[0]);
        let planes = &rec[1..];
        // planar RGB to interleaved HWC
        for p in 0..1024 {
            for c in 0..3 {
                images.push(planes[c * 1024 + p] as f32 / 255.0);
            }
        }
    }
    Ok(())
}

/// Loads one batch file.
pub fn load_cifar10_file(path: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    parse_into(&bytes, path, &mut images, &mut labels)?;
    Dataset::new(images, labels, [32, 32, 3], 10, split)
}

/// Loads `data_batch_1..5.bin` and `test_batch.bin` from `dir`.
pub fn load_cifar10_binary(dir: impl AsRef<Path>) -> Result<DataSplit> {
    let dir = dir.as_ref();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for name in TRAIN_FILES {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        parse_into(&bytes, &path, &mut images, &mut labels)?;
    }
    let train = Dataset::new(images, labels, [32, 32, 3], 10, Split::Train)?;
    let test = load_cifar10_file(dir.join(TEST_FILE), Split::Test)?;
    Ok(DataSplit { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: u8, seed: u8) -> Vec<u8> {
        let mut r = vec![label];
        r.extend((0..3072).map(|i| (i as u8).wrapping_mul(seed).wrapping_add(i as u8 / 7)));
        r
    }

    #[test]
    fn two_record_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let (r0, r1) = (record(3, 5), record(9, 11));
        let path = dir.path().join("b.bin");
        std::fs::write(&path, [r0.clone(), r1].concat()).unwrap();
        let ds = load_cifar10_file(&path, Split::Test).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels(), &[3, 9]);
        assert_eq!(ds.shape(), [32, 32, 3]);
        let img = ds.image(0);
        for p in [0usize, 1, 500, 1023] {
            for c in 0..3 {
                assert_eq!(img[p * 3 + c], r0[1 + c * 1024 + p] as f32 / 255.0);
            }
        }
    }

    #[test]
    fn misaligned_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.bin");
        let mut rec = record(1, 2);
        rec.pop();
        std::fs::write(&path, rec).unwrap();
        assert!(matches!(
            load_cifar10_file(&path, Split::Train),
            Err(Error::Format { .. })
        ));
        let err = load_cifar10_binary(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("data_batch_1.bin"));
    }

    #[test]
    fn full_layout() {
        let dir = tempfile::tempdir().unwrap();
        for (i, name) in TRAIN_FILES.iter().enumerate() {
            std::fs::write(dir.path().join(name), record(i as u8, 3)).unwrap();
        }
        std::fs::write(dir.path().join(TEST_FILE), [record(7, 1), record(8, 1)].concat()).unwrap();
        let s = load_cifar10_binary(dir.path()).unwrap();
        assert_eq!(s.train.labels(), &[0, 1, 2, 3, 4]);
        assert_eq!(s.test.len(), 2);
        assert_eq!(s.test.split(), Split::Test);
    }
}
