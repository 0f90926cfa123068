//! In-memory datasets and loaders.
//!
//! Images are stored as `N x H x W x C` single-precision values. Loaders scale
//! raw bytes by 1/255 and do nothing else; standardization is left to the
//! network (batch norm).

mod cifar;
mod idx;
mod noise;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::Real;

pub use cifar::{load_cifar10_binary, load_cifar10_file, CIFAR_RECORD_LEN};
pub use idx::{load_idx, load_mnist_dir, write_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use noise::corrupt_gaussian;
pub use synth::synth_blobs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<f32>,
    labels: Vec<u8>,
    height: usize,
    width: usize,
    channels: usize,
    num_classes: usize,
    split: Split,
}

/// A train/test pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Dataset,
    pub test: Dataset,
}

impl Dataset {
    /// `shape` is `[height, width, channels]`.
    pub fn new(
        images: Vec<f32>,
        labels: Vec<u8>,
        shape: [usize; 3],
        num_classes: usize,
        split: Split,
    ) -> Result<Self> {
        let [height, width, channels] = shape;
        let per = height * width * channels;
        if per == 0 {
            return Err(Error::argument("image dimensions must be nonzero"));
        }
        if images.len() != labels.len() * per {
            return Err(Error::argument(format!(
                "{} pixel values do not match {} labels of {per} pixels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::argument(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        Ok(Dataset {
            images,
            labels,
            height,
            width,
            channels,
            num_classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[height, width, channels]`
    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }

    pub fn pixels_per_image(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn images(&self) -> &[f32] {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let per = self.pixels_per_image();
        &self.images[i * per..(i + 1) * per]
    }

    pub(crate) fn images_mut(&mut self) -> &mut [f32] {
        &mut self.images
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let per = self.pixels_per_image();
        let mut images = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            images,
            labels,
            ..self.clone_meta()
        }
    }

    /// First `n` samples (all of them if `n >= len`).
    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Splits off the trailing `test_len` samples as the test set.
    pub fn train_test_split(self, test_len: usize) -> Result<DataSplit> {
        if test_len == 0 || test_len >= self.len() {
            return Err(Error::argument(format!(
                "test_len must be in 1..{}, got {test_len}",
                self.len()
            )));
        }
        let cut = self.len() - test_len;
        let train: Vec<usize> = (0..cut).collect();
        let test: Vec<usize> = (cut..self.len()).collect();
        Ok(DataSplit {
            train: self.subset(&train).with_split(Split::Train),
            test: self.subset(&test).with_split(Split::Test),
        })
    }

    fn clone_meta(&self) -> Dataset {
        Dataset {
            images: Vec::new(),
            labels: Vec::new(),
            ..*self
        }
    }

    /// Gathers samples into a network input batch of shape `[n, ..input_shape]`.
    ///
    /// `input_shape` is either `[H*W*C]` (flattened in storage order) or
    /// `[C, H, W]` (channel-planar).
    pub fn batch<T: Real>(&self, indices: &[usize], input_shape: &[usize]) -> Result<Tensor<T>> {
        let per = self.pixels_per_image();
        let mut data = Vec::with_capacity(indices.len() * per);
        match *input_shape {
            [d] if d == per => {
                for &i in indices {
                    data.extend(self.image(i).iter().map(|&v| T::from_f64(v as f64)));
                }
            }
            [c, h, w] if [h, w, c] == self.shape() => {
                for &i in indices {
                    let img = self.image(i);
                    for ch in 0..c {
                        for p in 0..h * w {
                            data.push(T::from_f64(img[p * c + ch] as f64));
                        }
                    }
                }
            }
            _ => {
                return Err(Error::argument(format!(
                    "network input {input_shape:?} does not fit images of shape {:?}",
                    self.shape()
                )))
            }
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(input_shape);
        Tensor::from_vec(shape, data)
    }

    pub fn batch_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i] as usize).collect()
    }
}
