//! Elementwise forward/backward kernels over contiguous buffers.
//!
//! Two backward strategies exist. The naive one saves only the forward input
//! and recomputes the full derivative. The fused one, which only differs for
//! Mish, also stores `tanh(softplus(x))` during the forward pass so the
//! backward pass needs a single exponential:
//! `f'(x) = t + x (1 - t²) σ(x)`.
//!
//! Single-precision buffers are evaluated by promoting each element to `f64`
//! and rounding the result once.

mod bench;

use serde::{Deserialize, Serialize};

use crate::activation::{self, ActivationKind};
use crate::error::{Error, Result};
use crate::Real;

pub use bench::{
    benchmark_op, speed_profile, summarize_samples, write_profile_csv, BenchConfig, BenchReport,
    SampleSummary, PROFILE_CSV_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    Double,
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::Single => "single",
            Precision::Double => "double",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Naive,
    Fused,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Naive => "naive",
            Variant::Fused => "fused",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pass {
    Forward,
    Backward,
}

impl std::fmt::Display for Pass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pass::Forward => "forward",
            Pass::Backward => "backward",
        })
    }
}

/// Contiguous 1-D array of scalars with an explicit precision.
#[derive(Debug, Clone, PartialEq)]
pub enum Buffer {
    Single(Vec<f32>),
    Double(Vec<f64>),
}

impl Buffer {
    pub fn zeros(precision: Precision, len: usize) -> Self {
        match precision {
            Precision::Single => Buffer::Single(vec![0.0; len]),
            Precision::Double => Buffer::Double(vec![0.0; len]),
        }
    }

    /// Builds a buffer of the given precision from double-precision values.
    pub fn from_f64(precision: Precision, values: &[f64]) -> Self {
        match precision {
            Precision::Single => Buffer::Single(values.iter().map(|&v| v as f32).collect()),
            Precision::Double => Buffer::Double(values.to_vec()),
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            Buffer::Single(_) => Precision::Single,
            Buffer::Double(_) => Precision::Double,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Buffer::Single(v) => v.len(),
            Buffer::Double(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        match self {
            Buffer::Single(v) => v.iter().map(|&x| x as f64).collect(),
            Buffer::Double(v) => v.clone(),
        }
    }

    fn same_shape(&self, other: &Buffer, what: &str) -> Result<()> {
        if self.precision() != other.precision() {
            return Err(Error::argument(format!(
                "{what}: precision mismatch ({} vs {})",
                self.precision(),
                other.precision()
            )));
        }
        if self.len() != other.len() {
            return Err(Error::argument(format!(
                "{what}: length mismatch ({} vs {})",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }
}

/// State saved by a forward pass for the matching backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCache {
    pub kind: ActivationKind,
    pub variant: Variant,
    pub saved_input: Buffer,
    /// `tanh(softplus(x))` per element; only filled by the fused Mish kernel.
    pub saved_tanh_sp: Option<Buffer>,
}

/// An activation kind bound to an implementation variant and a worker count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub kind: ActivationKind,
    pub variant: Variant,
    pub workers: usize,
}

impl Kernel {
    pub fn new(kind: ActivationKind) -> Self {
        Kernel {
            kind,
            variant: Variant::Naive,
            workers: 1,
        }
    }

    pub fn variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    /// Whether the forward pass stores `tanh(softplus(x))`.
    pub fn saves_gate(&self) -> bool {
        self.variant == Variant::Fused && self.kind == ActivationKind::Mish
    }

    pub fn forward(&self, input: &Buffer, output: &mut Buffer) -> Result<ActivationCache> {
        input.same_shape(output, "forward")?;
        let mut gate = self
            .saves_gate()
            .then(|| Buffer::zeros(input.precision(), input.len()));
        match (input, output, gate.as_mut()) {
            (Buffer::Single(x), Buffer::Single(y), g) => {
                let g = g.map(|g| match g {
                    Buffer::Single(v) => v.as_mut_slice(),
                    Buffer::Double(_) => unreachable!(),
                });
                self.forward_slice(x, y, g)?
            }
            (Buffer::Double(x), Buffer::Double(y), g) => {
                let g = g.map(|g| match g {
                    Buffer::Double(v) => v.as_mut_slice(),
                    Buffer::Single(_) => unreachable!(),
                });
                self.forward_slice(x, y, g)?
            }
            _ => unreachable!("precision checked above"),
        }
        Ok(ActivationCache {
            kind: self.kind,
            variant: self.variant,
            saved_input: input.clone(),
            saved_tanh_sp: gate,
        })
    }

    pub fn backward(
        &self,
        cache: &ActivationCache,
        upstream: &Buffer,
        grad_out: &mut Buffer,
    ) -> Result<()> {
        if cache.kind != self.kind || cache.variant != self.variant {
            return Err(Error::State(format!(
                "cache was produced by {} ({}), kernel is {} ({})",
                cache.kind, cache.variant, self.kind, self.variant
            )));
        }
        cache.saved_input.same_shape(upstream, "backward upstream")?;
        cache.saved_input.same_shape(grad_out, "backward output")?;
        if let Some(g) = &cache.saved_tanh_sp {
            cache.saved_input.same_shape(g, "backward cache")?;
        }
        match (&cache.saved_input, upstream, grad_out) {
            (Buffer::Single(x), Buffer::Single(u), Buffer::Single(out)) => {
                let g = match &cache.saved_tanh_sp {
                    Some(Buffer::Single(g)) => Some(g.as_slice()),
                    _ => None,
                };
                self.backward_slice(x, g, u, out)
            }
            (Buffer::Double(x), Buffer::Double(u), Buffer::Double(out)) => {
                let g = match &cache.saved_tanh_sp {
                    Some(Buffer::Double(g)) => Some(g.as_slice()),
                    _ => None,
                };
                self.backward_slice(x, g, u, out)
            }
            _ => unreachable!("precision checked above"),
        }
    }

    /// Slice-level forward pass. `gate` must be present exactly when
    /// [`Kernel::saves_gate`] is true.
    pub fn forward_slice<T: Real>(
        &self,
        input: &[T],
        output: &mut [T],
        gate: Option<&mut [T]>,
    ) -> Result<()> {
        if input.len() != output.len() {
            return Err(Error::argument(format!(
                "forward: length mismatch ({} vs {})",
                input.len(),
                output.len()
            )));
        }
        match (self.saves_gate(), gate) {
            (true, Some(gate)) => {
                if gate.len() != input.len() {
                    return Err(Error::argument("forward: gate buffer length mismatch"));
                }
                par_chunks3(self.workers, input, output, gate, |x, y, g| {
                    for ((x, y), g) in x.iter().zip(y.iter_mut()).zip(g.iter_mut()) {
                        let xf = x.as_f64();
                        let t = activation::mish_gate(xf);
                        *g = T::from_f64(t);
                        *y = T::from_f64(xf * t);
                    }
                });
                Ok(())
            }
            (true, None) => Err(Error::State("fused mish forward needs a gate buffer".into())),
            (false, _) => {
                let kind = self.kind;
                par_chunks2(self.workers, input, output, move |x, y| forward_naive(kind, x, y));
                Ok(())
            }
        }
    }

    /// Slice-level backward pass: `grad_out[i] = upstream[i] * f'(input[i])`.
    pub fn backward_slice<T: Real>(
        &self,
        input: &[T],
        gate: Option<&[T]>,
        upstream: &[T],
        grad_out: &mut [T],
    ) -> Result<()> {
        let n = input.len();
        if upstream.len() != n || grad_out.len() != n {
            return Err(Error::argument("backward: length mismatch"));
        }
        let kind = self.kind;
        if self.saves_gate() {
            let gate = gate.ok_or_else(|| {
                Error::State("fused mish backward needs the saved tanh(softplus(x))".into())
            })?;
            if gate.len() != n {
                return Err(Error::argument("backward: gate length mismatch"));
            }
            par_chunks_bwd(self.workers, input, gate, upstream, grad_out, |x, g, u, out| {
                for i in 0..x.len() {
                    let xf = x[i].as_f64();
                    let t = g[i].as_f64();
                    let d = t + xf * (1.0 - t * t) * activation::sigmoid(xf);
                    out[i] = T::from_f64(u[i].as_f64() * d);
                }
            });
        } else {
            par_chunks_bwd(self.workers, input, input, upstream, grad_out, move |x, _, u, out| {
                backward_naive(kind, x, u, out)
            });
        }
        Ok(())
    }
}

/// `output[i] = f(input[i])` with the naive variant.
pub fn apply_forward(
    kind: ActivationKind,
    input: &Buffer,
    output: &mut Buffer,
) -> Result<ActivationCache> {
    Kernel::new(kind).forward(input, output)
}

/// Backward pass using whatever variant produced `cache`.
pub fn apply_backward(
    cache: &ActivationCache,
    upstream: &Buffer,
    grad_out: &mut Buffer,
) -> Result<()> {
    Kernel::new(cache.kind)
        .variant(cache.variant)
        .backward(cache, upstream, grad_out)
}

fn forward_naive<T: Real>(kind: ActivationKind, x: &[T], y: &mut [T]) {
    match kind {
        ActivationKind::Relu => {
            for (x, y) in x.iter().zip(y.iter_mut()) {
                *y = if *x < T::zero() { T::zero() } else { *x };
            }
        }
        ActivationKind::Mish => map(x, y, activation::mish),
        ActivationKind::Softplus => map(x, y, activation::softplus),
        other => map(x, y, |v| other.eval(v)),
    }
}

fn backward_naive<T: Real>(kind: ActivationKind, x: &[T], u: &[T], out: &mut [T]) {
    match kind {
        ActivationKind::Relu => {
            for i in 0..x.len() {
                out[i] = if x[i] >= T::zero() {
                    u[i]
                } else if x[i] < T::zero() {
                    T::zero()
                } else {
                    x[i]
                };
            }
        }
        ActivationKind::Mish => map_grad(x, u, out, activation::mish_grad),
        other => map_grad(x, u, out, |v| other.grad(v)),
    }
}

#[inline(always)]
fn map<T: Real>(x: &[T], y: &mut [T], f: impl Fn(f64) -> f64) {
    for (x, y) in x.iter().zip(y.iter_mut()) {
        *y = T::from_f64(f(x.as_f64()));
    }
}

#[inline(always)]
fn map_grad<T: Real>(x: &[T], u: &[T], out: &mut [T], f: impl Fn(f64) -> f64) {
    for i in 0..x.len() {
        out[i] = T::from_f64(u[i].as_f64() * f(x[i].as_f64()));
    }
}

fn chunk_len(n: usize, workers: usize) -> usize {
    n.div_ceil(workers.max(1)).max(1)
}

fn par_chunks2<T: Real>(
    workers: usize,
    x: &[T],
    y: &mut [T],
    f: impl Fn(&[T], &mut [T]) + Sync,
) {
    if workers <= 1 || x.len() < 2 {
        return f(x, y);
    }
    let c = chunk_len(x.len(), workers);
    std::thread::scope(|s| {
        for (xc, yc) in x.chunks(c).zip(y.chunks_mut(c)) {
            let f = &f;
            s.spawn(move || f(xc, yc));
        }
    });
}

fn par_chunks3<T: Real>(
    workers: usize,
    x: &[T],
    y: &mut [T],
    g: &mut [T],
    f: impl Fn(&[T], &mut [T], &mut [T]) + Sync,
) {
    if workers <= 1 || x.len() < 2 {
        return f(x, y, g);
    }
    let c = chunk_len(x.len(), workers);
    std::thread::scope(|s| {
        for ((xc, yc), gc) in x.chunks(c).zip(y.chunks_mut(c)).zip(g.chunks_mut(c)) {
            let f = &f;
            s.spawn(move || f(xc, yc, gc));
        }
    });
}

fn par_chunks_bwd<T: Real>(
    workers: usize,
    x: &[T],
    g: &[T],
    u: &[T],
    out: &mut [T],
    f: impl Fn(&[T], &[T], &[T], &mut [T]) + Sync,
) {
    if workers <= 1 || x.len() < 2 {
        return f(x, g, u, out);
    }
    let c = chunk_len(x.len(), workers);
    std::thread::scope(|s| {
        for (((xc, gc), uc), oc) in x
            .chunks(c)
            .zip(g.chunks(c))
            .zip(u.chunks(c))
            .zip(out.chunks_mut(c))
        {
            let f = &f;
            s.spawn(move || f(xc, gc, uc, oc));
        }
    });
}
