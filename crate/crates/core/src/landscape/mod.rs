//! Output landscapes of random networks, 2-D loss-surface slices, smoothness
//! metrics and grid export.

mod export;
mod slice;

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::nn::{build_plain_mlp, Network, Tensor};

pub use export::{export_field, field_file_name, import_field_csv, ExportFormat, ExportInfo};
pub use slice::{loss_at, loss_slice, slice_subset, Directions, LossSlice, SLICE_SUBSET};

/// Axis-aligned sampling grid with `resolution` points per axis, both
/// endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_range: (-10.0, 10.0),
            y_range: (-10.0, 10.0),
            resolution: 256,
        }
    }
}

impl GridSpec {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), resolution: usize) -> Result<Self> {
        let g = GridSpec {
            x_range,
            y_range,
            resolution,
        };
        g.validate()?;
        Ok(g)
    }

    /// Square grid `[-r, r]^2`.
    pub fn square(radius: f64, resolution: usize) -> Result<Self> {
        Self::new((-radius, radius), (-radius, radius), resolution)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a < b;
        if self.resolution < 2 {
            return Err(Error::argument("grid resolution must be >= 2"));
        }
        if !ok(self.x_range) || !ok(self.y_range) {
            return Err(Error::argument(format!(
                "grid ranges must be finite with lo < hi, got {:?} x {:?}",
                self.x_range, self.y_range
            )));
        }
        Ok(())
    }

    pub fn x(&self, i: usize) -> f64 {
        axis(self.x_range, self.resolution, i)
    }

    pub fn y(&self, j: usize) -> f64 {
        axis(self.y_range, self.resolution, j)
    }
}

fn axis((lo, hi): (f64, f64), n: usize, i: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

/// Scalar field sampled on a [`GridSpec`], stored row-major with `y` as the
/// row index: `values[j * resolution + i]` is the value at `(x(i), y(j))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2D {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    /// Set when some value is not finite.
    pub diverged: bool,
}

impl Field2D {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.resolution * grid.resolution {
            return Err(Error::argument(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.resolution,
                grid.resolution
            )));
        }
        let diverged = values.iter().any(|v| !v.is_finite());
        Ok(Field2D {
            grid,
            values,
            diverged,
        })
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        grid.validate()?;
        let n = grid.resolution;
        let values = (0..n * n).map(|k| f(grid.x(k % n), grid.y(k / n))).collect();
        Self::new(grid, values)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.resolution + i]
    }

    /// Grid indices `(i, j)` of the smallest value.
    pub fn argmin(&self) -> (usize, usize) {
        let k = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(k, _)| k);
        (k % self.grid.resolution, k / self.grid.resolution)
    }

    fn std(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        (self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// Mean absolute 5-point Laplacian over interior cells divided by the
/// field's standard deviation. Zero for constant and affine fields and
/// invariant under `v -> a v + b`.
pub fn roughness(field: &Field2D) -> Result<f64> {
    finite(field)?;
    let n = field.grid.resolution;
    let std = field.std();
    if std == 0.0 || n < 3 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let lap = field.at(i + 1, j) + field.at(i - 1, j) + field.at(i, j + 1)
                + field.at(i, j - 1)
                - 4.0 * field.at(i, j);
            sum += lap.abs();
        }
    }
    Ok(sum / ((n - 2) * (n - 2)) as f64 / std)
}

/// Mean anisotropic total variation `|dx| + |dy|` per cell, normalized by
/// the field's standard deviation.
pub fn total_variation(field: &Field2D) -> Result<f64> {
    finite(field)?;
    let n = field.grid.resolution;
    let std = field.std();
    if std == 0.0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            sum += (field.at(i + 1, j) - field.at(i, j)).abs()
                + (field.at(i, j + 1) - field.at(i, j)).abs();
        }
    }
    Ok(sum / ((n - 1) * (n - 1)) as f64 / std)
}

fn finite(field: &Field2D) -> Result<()> {
    if field.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("field contains non-finite values".into()));
    }
    Ok(())
}

/// The random scalar network used for output landscapes: `depth` dense
/// layers `2 -> width -> ... -> width -> 1` with Glorot-uniform weights,
/// zero biases, and no normalization or dropout.
pub fn landscape_network(
    activation: ActivationKind,
    seed: u64,
    depth: usize,
    width: usize,
) -> Result<Network<f64>> {
    let spec = build_plain_mlp(2, width, 1, depth, activation)?.with_seed(seed);
    Network::new(&spec)
}

/// Evaluates a `2 -> 1` network at every grid point.
pub fn field_of(net: &Network<f64>, grid: GridSpec) -> Result<Field2D> {
    grid.validate()?;
    if net.spec().input_shape != [2] || net.num_classes() != 1 {
        return Err(Error::argument("landscape networks map 2 inputs to 1 output"));
    }
    let n = grid.resolution;
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        let mut row = Vec::with_capacity(2 * n);
        for i in 0..n {
            row.push(grid.x(i));
            row.push(grid.y(j));
        }
        let out = net.predict(&Tensor::from_vec(vec![n, 2], row)?)?;
        values.extend_from_slice(out.data());
    }
    Field2D::new(grid, values)
}

/// Output landscape of a freshly initialized random network. The weight
/// draws depend only on `seed`, so fields for different activations share
/// them.
pub fn output_landscape(
    activation: ActivationKind,
    seed: u64,
    grid: GridSpec,
    depth: usize,
    width: usize,
) -> Result<Field2D> {
    field_of(&landscape_network(activation, seed, depth, width)?, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::square(1.0, n).unwrap()
    }

    #[test]
    fn grid_endpoints_and_validation() {
        let g = GridSpec::default();
        assert_eq!((g.x(0), g.x(255)), (-10.0, 10.0));
        assert!(GridSpec::new((0.0, 1.0), (0.0, 1.0), 1).is_err());
        assert!(GridSpec::new((1.0, 1.0), (0.0, 1.0), 4).is_err());
    }

    #[test]
    fn roughness_of_simple_fields() {
        let c = Field2D::from_fn(grid(16), |_, _| 3.0).unwrap();
        assert_eq!(roughness(&c).unwrap(), 0.0);
        assert_eq!(total_variation(&c).unwrap(), 0.0);
        let lin = Field2D::from_fn(grid(16), |x, _| x).unwrap();
        assert!(roughness(&lin).unwrap() < 1e-12);
        let bumpy = Field2D::from_fn(grid(16), |x, y| (x * y).abs()).unwrap();
        assert!(roughness(&bumpy).unwrap() > 0.0);
    }

    #[test]
    fn roughness_is_affine_invariant() {
        let f = Field2D::from_fn(grid(20), |x, y| (3.0 * x).sin() + y.abs()).unwrap();
        let g = Field2D::new(f.grid, f.values.iter().map(|v| -2.5 * v + 7.0).collect()).unwrap();
        let (a, b) = (roughness(&f).unwrap(), roughness(&g).unwrap());
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn zero_weights_give_constant_field() {
        let mut net = landscape_network(ActivationKind::Mish, 1, 5, 8).unwrap();
        for layer in net.params_mut() {
            for t in layer.iter_mut() {
                t.fill(0.0);
            }
        }
        let last = net.params().len() - 1;
        net.params_mut()[last][1].fill(0.25);
        let f = field_of(&net, grid(8)).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.25));
        assert_eq!(roughness(&f).unwrap(), 0.0);
    }

    #[test]
    fn landscape_is_deterministic_and_shares_draws() {
        let a = output_landscape(ActivationKind::Mish, 4, grid(12), 5, 16).unwrap();
        assert_eq!(a, output_landscape(ActivationKind::Mish, 4, grid(12), 5, 16).unwrap());
        let relu = landscape_network(ActivationKind::Relu, 4, 5, 16).unwrap();
        let mish = landscape_network(ActivationKind::Mish, 4, 5, 16).unwrap();
        assert_eq!(relu.params(), mish.params());
        assert_ne!(a, field_of(&relu, grid(12)).unwrap());
    }

    #[test]
    fn non_finite_fields_are_flagged() {
        let f = Field2D::new(grid(2), vec![0.0, 1.0, f64::NAN, 2.0]).unwrap();
        assert!(f.diverged);
        assert!(roughness(&f).is_err());
    }
}
