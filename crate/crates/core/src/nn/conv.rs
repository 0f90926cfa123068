//! 2-D convolution over `N x C x H x W` batches.
//!
//! The fast path lowers each sample with im2col and calls GEMM. The direct
//! loop versions are kept as a reference and must agree with it.

use crate::linalg::gemm;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub height: usize,
    pub width: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel) / self.stride + 1
    }

    /// Rows of the im2col matrix: `C * k * k`.
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// Columns of the im2col matrix: `out_h * out_w`.
    pub fn positions(&self) -> usize {
        self.out_height() * self.out_width()
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    pub fn output_len(&self) -> usize {
        self.out_channels * self.positions()
    }

    /// Input coordinate for output row/col `o` and kernel offset `k`, or
    /// `None` inside the zero padding.
    #[inline]
    fn src(&self, o: usize, k: usize, extent: usize) -> Option<usize> {
        (o * self.stride + k)
            .checked_sub(self.padding)
            .filter(|&i| i < extent)
    }
}

/// Lowers one `C x H x W` sample into a `patch_len x positions` matrix.
pub fn im2col<T: Real>(g: &ConvGeometry, x: &[T], cols: &mut [T]) {
    let (oh, ow, k) = (g.out_height(), g.out_width(), g.kernel);
    let p = oh * ow;
    for c in 0..g.in_channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..k {
            for kj in 0..k {
                let row = &mut cols[((c * k + ki) * k + kj) * p..][..p];
                for oi in 0..oh {
                    let dst = &mut row[oi * ow..(oi + 1) * ow];
                    match g.src(oi, ki, g.height) {
                        None => dst.fill(T::zero()),
                        Some(ii) => {
                            let src = &plane[ii * g.width..(ii + 1) * g.width];
                            for (oj, d) in dst.iter_mut().enumerate() {
                                *d = g.src(oj, kj, g.width).map_or(T::zero(), |jj| src[jj]);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates `cols` back into `dx`.
pub fn col2im<T: Real>(g: &ConvGeometry, cols: &[T], dx: &mut [T]) {
    let (oh, ow, k) = (g.out_height(), g.out_width(), g.kernel);
    let p = oh * ow;
    for c in 0..g.in_channels {
        let plane = &mut dx[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..k {
            for kj in 0..k {
                let row = &cols[((c * k + ki) * k + kj) * p..][..p];
                for oi in 0..oh {
                    let Some(ii) = g.src(oi, ki, g.height) else {
                        continue;
                    };
                    for oj in 0..ow {
                        if let Some(jj) = g.src(oj, kj, g.width) {
                            plane[ii * g.width + jj] += row[oi * ow + oj];
                        }
                    }
                }
            }
        }
    }
}

/// `y = conv(x, w) + b` for a batch of `n` samples. `w` is
/// `out x in x k x k`, `y` is overwritten.
pub fn conv2d_forward<T: Real>(g: &ConvGeometry, n: usize, x: &[T], w: &[T], b: &[T], y: &mut [T]) {
    let (pl, p) = (g.patch_len(), g.positions());
    let mut cols = vec![T::zero(); pl * p];
    for s in 0..n {
        im2col(g, &x[s * g.input_len()..(s + 1) * g.input_len()], &mut cols);
        let ys = &mut y[s * g.output_len()..(s + 1) * g.output_len()];
        for (o, row) in ys.chunks_exact_mut(p).enumerate() {
            row.fill(b[o]);
        }
        gemm(false, false, g.out_channels, p, pl, T::one(), w, &cols, T::one(), ys);
    }
}

/// Gradients of [`conv2d_forward`]. `dx` is overwritten; `dw` and `db` are
/// accumulated into.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Real>(
    g: &ConvGeometry,
    n: usize,
    x: &[T],
    w: &[T],
    dy: &[T],
    dx: &mut [T],
    dw: &mut [T],
    db: &mut [T],
) {
    let (pl, p) = (g.patch_len(), g.positions());
    let mut cols = vec![T::zero(); pl * p];
    let mut dcols = vec![T::zero(); pl * p];
    dx.fill(T::zero());
    for s in 0..n {
        let dys = &dy[s * g.output_len()..(s + 1) * g.output_len()];
        for (o, row) in dys.chunks_exact(p).enumerate() {
            db[o] += row.iter().copied().sum::<T>();
        }
        im2col(g, &x[s * g.input_len()..(s + 1) * g.input_len()], &mut cols);
        // dW += dY * cols^T
        gemm(false, true, g.out_channels, pl, p, T::one(), dys, &cols, T::one(), dw);
        // dcols = W^T * dY
        gemm(true, false, pl, p, g.out_channels, T::one(), w, dys, T::zero(), &mut dcols);
        col2im(g, &dcols, &mut dx[s * g.input_len()..(s + 1) * g.input_len()]);
    }
}

fn widx(g: &ConvGeometry, o: usize, c: usize, ki: usize, kj: usize) -> usize {
    ((o * g.in_channels + c) * g.kernel + ki) * g.kernel + kj
}

/// Direct-loop reference for [`conv2d_forward`].
pub fn conv2d_forward_direct<T: Real>(
    g: &ConvGeometry,
    n: usize,
    x: &[T],
    w: &[T],
    b: &[T],
    y: &mut [T],
) {
    let (oh, ow) = (g.out_height(), g.out_width());
    for s in 0..n {
        let xs = &x[s * g.input_len()..];
        for o in 0..g.out_channels {
            for oi in 0..oh {
                for oj in 0..ow {
                    let mut acc = b[o];
                    for c in 0..g.in_channels {
                        for ki in 0..g.kernel {
                            let Some(ii) = g.src(oi, ki, g.height) else { continue };
                            for kj in 0..g.kernel {
                                let Some(jj) = g.src(oj, kj, g.width) else { continue };
                                acc += w[widx(g, o, c, ki, kj)]
                                    * xs[(c * g.height + ii) * g.width + jj];
                            }
                        }
                    }
                    y[s * g.output_len() + (o * oh + oi) * ow + oj] = acc;
                }
            }
        }
    }
}

/// Direct-loop reference for [`conv2d_backward`], same accumulation contract.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward_direct<T: Real>(
    g: &ConvGeometry,
    n: usize,
    x: &[T],
    w: &[T],
    dy: &[T],
    dx: &mut [T],
    dw: &mut [T],
    db: &mut [T],
) {
    let (oh, ow) = (g.out_height(), g.out_width());
    dx.fill(T::zero());
    for s in 0..n {
        let (xo, yo) = (s * g.input_len(), s * g.output_len());
        for o in 0..g.out_channels {
            for oi in 0..oh {
                for oj in 0..ow {
                    let d = dy[yo + (o * oh + oi) * ow + oj];
                    db[o] += d;
                    for c in 0..g.in_channels {
                        for ki in 0..g.kernel {
                            let Some(ii) = g.src(oi, ki, g.height) else { continue };
                            for kj in 0..g.kernel {
                                let Some(jj) = g.src(oj, kj, g.width) else { continue };
                                let xi = xo + (c * g.height + ii) * g.width + jj;
                                dw[widx(g, o, c, ki, kj)] += d * x[xi];
                                dx[xi] += d * w[widx(g, o, c, ki, kj)];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn im2col_path_matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geoms = [
            (2, 3, 3, 1, 1, 5, 6),
            (1, 2, 3, 2, 0, 7, 7),
            (3, 4, 1, 1, 0, 4, 3),
            (2, 2, 5, 2, 2, 6, 5),
        ];
        for (ic, oc, k, s, p, h, w) in geoms {
            let g = ConvGeometry {
                in_channels: ic,
                out_channels: oc,
                kernel: k,
                stride: s,
                padding: p,
                height: h,
                width: w,
            };
            let n = 3;
            let x = rand_vec(&mut rng, n * g.input_len());
            let wt = rand_vec(&mut rng, oc * g.patch_len());
            let b = rand_vec(&mut rng, oc);
            let dy = rand_vec(&mut rng, n * g.output_len());

            let mut y1 = vec![0.0; n * g.output_len()];
            let mut y2 = y1.clone();
            conv2d_forward(&g, n, &x, &wt, &b, &mut y1);
            conv2d_forward_direct(&g, n, &x, &wt, &b, &mut y2);
            assert!(max_diff(&y1, &y2) <= 1e-10, "{g:?}");

            let (mut dx1, mut dw1, mut db1) = (vec![0.0; x.len()], vec![0.0; wt.len()], vec![0.0; oc]);
            let (mut dx2, mut dw2, mut db2) = (dx1.clone(), dw1.clone(), db1.clone());
            conv2d_backward(&g, n, &x, &wt, &dy, &mut dx1, &mut dw1, &mut db1);
            conv2d_backward_direct(&g, n, &x, &wt, &dy, &mut dx2, &mut dw2, &mut db2);
            assert!(max_diff(&dx1, &dx2) <= 1e-10);
            assert!(max_diff(&dw1, &dw2) <= 1e-10);
            assert!(max_diff(&db1, &db2) <= 1e-10);
        }
    }

    #[test]
    fn identity_kernel() {
        // 1x1 kernel with weight 1 and bias 0 copies the input.
        let g = ConvGeometry {
            in_channels: 1,
            out_channels: 1,
            kernel: 1,
            stride: 1,
            padding: 0,
            height: 2,
            width: 3,
        };
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut y = [0.0; 6];
        conv2d_forward(&g, 1, &x, &[1.0], &[0.0], &mut y);
        assert_eq!(y, x);
    }
}
