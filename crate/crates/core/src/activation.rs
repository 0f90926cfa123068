//! Scalar activation functions.
//!
//! Every function here works in `f64`. Forward values, closed-form first
//! derivatives and (for Mish and Swish) second derivatives are provided for
//! every activation kind, together with a central-difference oracle and a
//! minimum finder for the bounded-below smooth kinds.
//!
//! Piecewise-linear kinds use the right-derivative at their kinks, so
//! `grad(Relu, 0.0) == 1.0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs at or above this value make softplus return its argument unchanged.
pub const SOFTPLUS_THRESHOLD: f64 = 20.0;

const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

/// A supported activation function with its fixed hyperparameters.
///
/// Parses from and prints as `name` or `name(p1,p2,...)`, e.g. `mish`,
/// `swish(1.5)`, `srelu(-1,0.1,1,0.1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ActivationKind {
    Mish,
    Swish { beta: f64 },
    Relu,
    LeakyRelu { alpha: f64 },
    Elu { alpha: f64 },
    Selu,
    Softplus,
    Tanh,
    Sigmoid,
    /// Exact erf-based GELU.
    Gelu,
    /// S-shaped ReLU with frozen thresholds and slopes.
    SreluFixed {
        t_left: f64,
        a_left: f64,
        t_right: f64,
        a_right: f64,
    },
    Isru { alpha: f64 },
    /// Randomized leaky ReLU evaluated at the midpoint slope `(lower + upper) / 2`.
    RreluFixed { lower: f64, upper: f64 },
    ArctanSoftplus,
    TanhSoftplus,
    /// `x ln(1 + atan(e^x))`
    XLogArctanExp,
    /// `x ln(1 + tanh(e^x))`
    XLogTanhExp,
}

impl ActivationKind {
    pub const fn swish() -> Self {
        ActivationKind::Swish { beta: 1.0 }
    }

    pub const fn leaky_relu() -> Self {
        ActivationKind::LeakyRelu { alpha: 0.01 }
    }

    pub const fn elu() -> Self {
        ActivationKind::Elu { alpha: 1.0 }
    }

    pub const fn srelu() -> Self {
        ActivationKind::SreluFixed {
            t_left: -1.0,
            a_left: 0.1,
            t_right: 1.0,
            a_right: 0.1,
        }
    }

    pub const fn isru() -> Self {
        ActivationKind::Isru { alpha: 1.0 }
    }

    pub const fn rrelu() -> Self {
        ActivationKind::RreluFixed {
            lower: 1.0 / 8.0,
            upper: 1.0 / 3.0,
        }
    }

    /// Every kind, with default hyperparameters.
    pub fn all() -> [ActivationKind; 17] {
        use ActivationKind::*;
        [
            Mish,
            Self::swish(),
            Relu,
            Self::leaky_relu(),
            Self::elu(),
            Selu,
            Softplus,
            Tanh,
            Sigmoid,
            Gelu,
            Self::srelu(),
            Self::isru(),
            Self::rrelu(),
            ArctanSoftplus,
            TanhSoftplus,
            XLogArctanExp,
            XLogTanhExp,
        ]
    }

    /// Short lowercase name, without hyperparameters.
    pub fn name(&self) -> &'static str {
        use ActivationKind::*;
        match self {
            Mish => "mish",
            Swish { .. } => "swish",
            Relu => "relu",
            LeakyRelu { .. } => "leaky_relu",
            Elu { .. } => "elu",
            Selu => "selu",
            Softplus => "softplus",
            Tanh => "tanh",
            Sigmoid => "sigmoid",
            Gelu => "gelu",
            SreluFixed { .. } => "srelu",
            Isru { .. } => "isru",
            RreluFixed { .. } => "rrelu",
            ArctanSoftplus => "arctan_softplus",
            TanhSoftplus => "tanh_softplus",
            XLogArctanExp => "xlog_arctan_exp",
            XLogTanhExp => "xlog_tanh_exp",
        }
    }

    fn params(&self) -> Vec<f64> {
        use ActivationKind::*;
        match *self {
            Swish { beta } => vec![beta],
            LeakyRelu { alpha } | Elu { alpha } | Isru { alpha } => vec![alpha],
            SreluFixed {
                t_left,
                a_left,
                t_right,
                a_right,
            } => vec![t_left, a_left, t_right, a_right],
            RreluFixed { lower, upper } => vec![lower, upper],
            _ => vec![],
        }
    }

    pub fn validate(&self) -> Result<()> {
        use ActivationKind::*;
        let bad = |msg: String| Err(Error::Domain(msg));
        match *self {
            Swish { beta } if !(beta > 0.0 && beta.is_finite()) => {
                bad(format!("swish beta must be > 0, got {beta}"))
            }
            LeakyRelu { alpha } | Elu { alpha } | Isru { alpha }
                if !(alpha > 0.0 && alpha.is_finite()) =>
            {
                bad(format!("{} alpha must be > 0, got {alpha}", self.name()))
            }
            RreluFixed { lower, upper } if !(0.0 < lower && lower <= upper && upper < 1.0) => {
                bad(format!("rrelu needs 0 < lower <= upper < 1, got [{lower}, {upper}]"))
            }
            SreluFixed {
                t_left, t_right, ..
            } if !(t_left < t_right) => bad(format!(
                "srelu needs t_left < t_right, got {t_left} >= {t_right}"
            )),
            _ => Ok(()),
        }
    }

    /// Points where the kind is not twice differentiable. Central
    /// differences lose their second-order accuracy there, so derivative
    /// checks skip a neighbourhood of each one.
    pub fn kinks(&self) -> Vec<f64> {
        use ActivationKind::*;
        match *self {
            Relu | LeakyRelu { .. } | Elu { .. } | Selu | RreluFixed { .. } => vec![0.0],
            SreluFixed {
                t_left, t_right, ..
            } => vec![t_left, t_right],
            _ => vec![],
        }
    }

    /// Forward value.
    pub fn eval(&self, x: f64) -> f64 {
        use ActivationKind::*;
        match *self {
            Mish => mish(x),
            Swish { beta } => x * sigmoid(beta * x),
            Relu => relu(x),
            LeakyRelu { alpha } => leaky(x, alpha),
            Elu { alpha } => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x.exp_m1()
                }
            }
            Selu => {
                if x >= 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
                }
            }
            Softplus => softplus(x),
            Tanh => x.tanh(),
            Sigmoid => sigmoid(x),
            Gelu => x * normal_cdf(x),
            SreluFixed {
                t_left,
                a_left,
                t_right,
                a_right,
            } => {
                if x >= t_right {
                    t_right + a_right * (x - t_right)
                } else if x < t_left {
                    t_left + a_left * (x - t_left)
                } else {
                    x
                }
            }
            Isru { alpha } => x / (1.0 + alpha * x * x).sqrt(),
            RreluFixed { lower, upper } => leaky(x, 0.5 * (lower + upper)),
            ArctanSoftplus => x.atan() * softplus(x),
            TanhSoftplus => x.tanh() * softplus(x),
            XLogArctanExp => x * x.exp().atan().ln_1p(),
            XLogTanhExp => x * x.exp().tanh().ln_1p(),
        }
    }

    /// Closed-form first derivative.
    pub fn grad(&self, x: f64) -> f64 {
        use ActivationKind::*;
        match *self {
            Mish => mish_grad(x),
            Swish { beta } => {
                let s = sigmoid(beta * x);
                s + beta * x * s * (1.0 - s)
            }
            Relu => step(x, 0.0),
            LeakyRelu { alpha } => step(x, alpha),
            Elu { alpha } => {
                if x >= 0.0 {
                    1.0
                } else {
                    alpha * x.exp()
                }
            }
            Selu => {
                if x >= 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp()
                }
            }
            Softplus => softplus_grad(x),
            Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Gelu => normal_cdf(x) + x * normal_pdf(x),
            SreluFixed {
                t_left,
                a_left,
                t_right,
                a_right,
            } => {
                if x >= t_right {
                    a_right
                } else if x < t_left {
                    a_left
                } else if x.is_nan() {
                    x
                } else {
                    1.0
                }
            }
            Isru { alpha } => {
                let q = 1.0 + alpha * x * x;
                1.0 / (q * q.sqrt())
            }
            RreluFixed { lower, upper } => step(x, 0.5 * (lower + upper)),
            ArctanSoftplus => softplus(x) / (1.0 + x * x) + x.atan() * sigmoid(x),
            TanhSoftplus => {
                let t = x.tanh();
                (1.0 - t * t) * softplus(x) + t * sigmoid(x)
            }
            XLogArctanExp => {
                let a = x.exp().atan();
                // e^x / (1 + e^2x) == sech(x) / 2, which stays finite for large |x|
                a.ln_1p() + x * 0.5 / x.cosh() / (1.0 + a)
            }
            XLogTanhExp => {
                let e = x.exp();
                let t = e.tanh();
                // e^x sech^2(e^x) is below 1e-300 once x > 7
                let tail = if x > 7.0 { 0.0 } else { x * e * sech2(e) / (1.0 + t) };
                t.ln_1p() + tail
            }
        }
    }

    /// Analytic second derivative; defined for Mish and Swish only.
    pub fn grad2(&self, x: f64) -> Result<f64> {
        match *self {
            ActivationKind::Mish => {
                if x >= SOFTPLUS_THRESHOLD {
                    return Ok(0.0);
                }
                let sp = softplus(x);
                let t = sp.tanh();
                let delta = sech2(sp);
                let s = sigmoid(x);
                // d/dx [t + x Δ σ] with t' = Δσ, Δ' = -2tΔσ, σ' = σ(1-σ)
                Ok(2.0 * delta * s + x * delta * s * ((1.0 - s) - 2.0 * t * s))
            }
            ActivationKind::Swish { beta } => {
                let s = sigmoid(beta * x);
                let ds = s * (1.0 - s);
                Ok(2.0 * beta * ds + beta * beta * x * ds * (1.0 - 2.0 * s))
            }
            other => Err(Error::Domain(format!(
                "second derivative is only implemented for mish and swish, not {}",
                other.name()
            ))),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params = self.params();
        let defaults = match self.name() {
            "swish" => Self::swish().params(),
            "leaky_relu" => Self::leaky_relu().params(),
            "elu" => Self::elu().params(),
            "srelu" => Self::srelu().params(),
            "isru" => Self::isru().params(),
            "rrelu" => Self::rrelu().params(),
            _ => vec![],
        };
        if params == defaults {
            return f.write_str(self.name());
        }
        let joined: Vec<String> = params.iter().map(|p| p.to_string()).collect();
        write!(f, "{}({})", self.name(), joined.join(","))
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s
                    .strip_suffix(')')
                    .ok_or_else(|| Error::argument(format!("unbalanced parentheses in {s:?}")))?;
                let args = close[open + 1..]
                    .split(',')
                    .map(|a| {
                        a.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::argument(format!("bad parameter {a:?} in {s:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (&s[..open], Some(args))
            }
            None => (s, None),
        };
        let template = ActivationKind::all()
            .into_iter()
            .find(|k| k.name() == name.to_ascii_lowercase())
            .ok_or_else(|| Error::argument(format!("unknown activation {name:?}")))?;
        let kind = match args {
            None => template,
            Some(p) => {
                use ActivationKind::*;
                let want = template.params().len();
                if p.len() != want {
                    return Err(Error::argument(format!(
                        "{name} takes {want} parameter(s), got {}",
                        p.len()
                    )));
                }
                match template {
                    Swish { .. } => Swish { beta: p[0] },
                    LeakyRelu { .. } => LeakyRelu { alpha: p[0] },
                    Elu { .. } => Elu { alpha: p[0] },
                    Isru { .. } => Isru { alpha: p[0] },
                    SreluFixed { .. } => SreluFixed {
                        t_left: p[0],
                        a_left: p[1],
                        t_right: p[2],
                        a_right: p[3],
                    },
                    RreluFixed { .. } => RreluFixed {
                        lower: p[0],
                        upper: p[1],
                    },
                    other => other,
                }
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl TryFrom<String> for ActivationKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ActivationKind> for String {
    fn from(k: ActivationKind) -> String {
        k.to_string()
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        x
    }
}

#[inline]
fn leaky(x: f64, slope: f64) -> f64 {
    if x < 0.0 {
        slope * x
    } else {
        x
    }
}

#[inline]
fn step(x: f64, left: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else if x < 0.0 {
        left
    } else {
        x
    }
}

/// `ln(1 + e^x)` without overflow. Returns `x` for `x >= 20` and `e^x` for
/// `x <= -20`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x >= SOFTPLUS_THRESHOLD {
        x
    } else if x <= -SOFTPLUS_THRESHOLD {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn softplus_grad(x: f64) -> f64 {
    if x >= SOFTPLUS_THRESHOLD {
        1.0
    } else {
        sigmoid(x)
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `sech^2(s)` computed from `e^{-2|s|}` so it never overflows and stays
/// strictly positive until the exponential underflows.
#[inline]
pub fn sech2(s: f64) -> f64 {
    let e = (-2.0 * s.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `tanh(softplus(x))`, the gate that multiplies `x` in Mish.
#[inline]
pub fn mish_gate(x: f64) -> f64 {
    softplus(x).tanh()
}

#[inline]
pub fn mish(x: f64) -> f64 {
    x * mish_gate(x)
}

/// Mish derivative used by the kernels and the network engine.
///
/// Inside `(-20, 20)` this is the decomposed form `Δ(x)·swish(x) + f(x)/x`;
/// beyond the softplus threshold the function is the identity, and far on
/// the negative side the leading-order expansion `e^x (1 + x)` is used.
#[inline]
pub fn mish_grad(x: f64) -> f64 {
    if x >= SOFTPLUS_THRESHOLD {
        1.0
    } else if x <= -SOFTPLUS_THRESHOLD {
        x.exp() * (1.0 + x)
    } else {
        let sp = softplus(x);
        sech2(sp) * x * sigmoid(x) + sp.tanh()
    }
}

/// Mish derivative written as the rational expression `e^x ω / δ²` with
/// `ω = 4(x+1) + 4e^{2x} + e^{3x} + e^x(4x+6)` and `δ = 2e^x + e^{2x} + 2`.
///
/// For `x > 0` numerator and denominator are divided by `e^{4x}`, which keeps
/// every term bounded.
pub fn mish_grad_rational(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        let e2 = e * e;
        let num = 1.0 + 4.0 * e + (4.0 * x + 6.0) * e2 + 4.0 * (x + 1.0) * e2 * e;
        let den = 1.0 + 2.0 * e + 2.0 * e2;
        num / (den * den)
    } else {
        let e = x.exp();
        let e2 = e * e;
        let omega = 4.0 * (x + 1.0) + 4.0 * e2 + e2 * e + e * (4.0 * x + 6.0);
        let delta = 2.0 * e + e2 + 2.0;
        e * omega / (delta * delta)
    }
}

/// Terms of the decomposed Mish derivative `f'(x) = Δ(x)·swish(x) + f(x)/x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MishDerivativeParts {
    /// `sech²(softplus(x))`
    pub delta: f64,
    /// `x·sigmoid(x)`
    pub swish_val: f64,
    /// `f(x)/x = tanh(softplus(x))`, equal to 3/5 at `x = 0`
    pub ratio: f64,
    pub total: f64,
}

pub fn mish_grad_decomposed(x: f64) -> MishDerivativeParts {
    let sp = softplus(x);
    let delta = sech2(sp);
    let swish_val = x * sigmoid(x);
    let ratio = if x == 0.0 { 0.6 } else { sp.tanh() };
    MishDerivativeParts {
        delta,
        swish_val,
        ratio,
        total: delta * swish_val + ratio,
    }
}

/// Central difference `(f(x+h) - f(x-h)) / 2h`.
pub fn finite_diff(kind: ActivationKind, x: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::argument(format!("step must be positive, got {h}")));
    }
    Ok((kind.eval(x + h) - kind.eval(x - h)) / (2.0 * h))
}

/// Second-order central difference `(f(x+h) - 2f(x) + f(x-h)) / h²`.
pub fn finite_diff2(kind: ActivationKind, x: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::argument(format!("step must be positive, got {h}")));
    }
    Ok((kind.eval(x + h) - 2.0 * kind.eval(x) + kind.eval(x - h)) / (h * h))
}

/// Location and value of the interior minimum on the negative half-line.
///
/// Found by bisection on the sign of the closed-form derivative. Only Mish,
/// Swish and GELU have such a minimum.
pub fn minimum_of(kind: ActivationKind) -> Result<(f64, f64)> {
    let mut lo = match kind {
        ActivationKind::Mish | ActivationKind::Gelu => -10.0,
        ActivationKind::Swish { beta } if beta > 0.0 => -10.0 / beta,
        other => {
            return Err(Error::Domain(format!(
                "{} has no interior minimum",
                other.name()
            )))
        }
    };
    let mut hi = 0.0;
    debug_assert!(kind.grad(lo) < 0.0 && kind.grad(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if kind.grad(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x_min = 0.5 * (lo + hi);
    Ok((x_min, kind.eval(x_min)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ActivationKind::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softplus_reference_points() {
        assert!(close(softplus(0.0), std::f64::consts::LN_2, 1e-15));
        assert_eq!(softplus(25.0), 25.0);
        assert_eq!(softplus(20.0), 20.0);
        let v = softplus(-40.0);
        assert!(close(v, 4.248_354_255_291_589e-18, 1e-30), "{v}");
        assert!(softplus(f64::NAN).is_nan());
        assert_eq!(softplus(-1e6), 0.0);
    }

    #[test]
    fn softplus_is_monotone_across_thresholds() {
        let mut prev = softplus(-60.0);
        let mut x = -60.0;
        while x < 60.0 {
            x += 0.01;
            let v = softplus(x);
            assert!(v >= prev, "softplus decreased at {x}");
            prev = v;
        }
    }

    #[test]
    fn eval_reference_points() {
        assert_eq!(Mish.eval(0.0), 0.0);
        assert!(close(Mish.eval(1.0), 0.865_098_388_267_310_3, 1e-15));
        assert!(close(Mish.eval(-1.0), -0.303_401_461_374_108_9, 1e-15));
        assert!(close(ActivationKind::swish().eval(1.0), 0.731_058_578_630_004_9, 1e-15));
        assert_eq!(Relu.eval(-3.0), 0.0);
        assert!(Mish.eval(f64::NAN).is_nan());
        assert!(Relu.eval(f64::NAN).is_nan());
    }

    #[test]
    fn grad_reference_points() {
        assert!(close(Mish.grad(0.0), 0.6, 1e-12));
        assert!(close(mish_grad_rational(0.0), 0.6, 1e-15));
        assert!(close(ActivationKind::swish().grad(0.0), 0.5, 1e-15));
        assert!(close(Mish.grad(30.0), 1.0, 1e-12));
        assert_eq!(Relu.grad(0.0), 1.0);
        assert_eq!(ActivationKind::leaky_relu().grad(0.0), 1.0);
        assert!(Mish.grad(f64::NAN).is_nan());
        // mpmath reference values
        for (x, want) in [
            (-5.0, -0.026_747_498_019_901_934),
            (-1.0, 0.059_216_755_877_394_95),
            (2.0, 1.069_317_934_279_489_7),
            (10.0, 1.000_000_078_312_983_5),
        ] {
            assert!(close(Mish.grad(x), want, 1e-14), "x={x}");
        }
    }

    #[test]
    fn grad2_reference_points() {
        assert!(close(Mish.grad2(0.0).unwrap(), 0.64, 1e-15));
        assert!(close(ActivationKind::swish().grad2(0.0).unwrap(), 0.5, 1e-15));
        assert!(close(Mish.grad2(40.0).unwrap(), 0.0, 1e-10));
        assert!(close(Mish.grad2(1.5).unwrap(), -0.002_150_238_583_235_006, 1e-14));
        assert!(close(Mish.grad2(-3.0).unwrap(), -0.039_928_713_242_129_25, 1e-14));
        let s2 = Swish { beta: 2.0 };
        assert!(close(s2.grad2(0.7).unwrap(), 0.366_208_281_450_287_84, 1e-14));
        assert!(close(s2.grad(0.7), 1.024_342_745_052_442_2, 1e-14));
        assert!(matches!(Relu.grad2(0.3), Err(Error::Domain(_))));
    }

    #[test]
    fn decomposed_parts_at_zero() {
        let p = mish_grad_decomposed(0.0);
        assert!(close(p.delta, 0.64, 1e-15));
        assert_eq!(p.swish_val, 0.0);
        assert_eq!(p.ratio, 0.6);
        assert_eq!(p.total, 0.6);
    }

    #[test]
    fn decomposed_matches_grad() {
        for x in [-5.0, -1.0, 2.0, 10.0] {
            let p = mish_grad_decomposed(x);
            assert!((p.total - Mish.grad(x)).abs() < 1e-10);
            assert!((p.total - mish_grad_rational(x)).abs() < 1e-10);
        }
        let sat = mish_grad_decomposed(50.0);
        assert!(sat.delta < 1e-20 && sat.delta > 0.0);
    }

    #[test]
    fn finite_diff_reference_points() {
        assert!(close(finite_diff(Mish, 0.0, 1e-5).unwrap(), 0.6, 1e-8));
        assert!(close(finite_diff(Relu, 5.0, 1e-5).unwrap(), 1.0, 1e-9));
        // d/dx tanh(x) softplus(x) at 1, from mpmath
        let want = 1.108_306_153_728_330_2;
        assert!(close(finite_diff(TanhSoftplus, 1.0, 1e-5).unwrap(), want, 1e-7));
        assert!(close(TanhSoftplus.grad(1.0), want, 1e-14));
        assert!(finite_diff(Mish, 0.0, 0.0).is_err());
        assert!(finite_diff(Mish, 0.0, -1e-3).is_err());
    }

    #[test]
    fn minimum_reference_points() {
        let (x, f) = minimum_of(Mish).unwrap();
        assert!(close(x, -1.192_431_214_515_495, 1e-9), "{x}");
        assert!(close(f, -0.308_843_413_017_250_4, 1e-12), "{f}");
        let (xs, fs) = minimum_of(ActivationKind::swish()).unwrap();
        assert!(close(xs, -1.278_464_542_761_074, 1e-9));
        assert!(close(fs, -0.278_464_542_761_073_8, 1e-12));
        let (xg, fg) = minimum_of(Gelu).unwrap();
        assert!(close(xg, -0.751_791_524_693_564_5, 1e-9));
        assert!(close(fg, -0.169_971_207_479_903_66, 1e-12));
        assert!(minimum_of(Relu).is_err());
        assert!(minimum_of(Tanh).is_err());
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("mish".parse::<ActivationKind>().unwrap(), Mish);
        assert_eq!("Swish".parse::<ActivationKind>().unwrap(), ActivationKind::swish());
        assert_eq!(
            "swish(1.5)".parse::<ActivationKind>().unwrap(),
            Swish { beta: 1.5 }
        );
        assert_eq!(Swish { beta: 1.5 }.to_string(), "swish(1.5)");
        assert_eq!(ActivationKind::srelu().to_string(), "srelu");
        assert!("swish(0)".parse::<ActivationKind>().is_err());
        assert!("rrelu(0.5,0.2)".parse::<ActivationKind>().is_err());
        assert!("foo".parse::<ActivationKind>().is_err());
        assert!("swish(1,2)".parse::<ActivationKind>().is_err());
        for k in ActivationKind::all() {
            assert_eq!(k.to_string().parse::<ActivationKind>().unwrap(), k);
        }
        let json = serde_json::to_string(&vec![Mish, Swish { beta: 2.0 }]).unwrap();
        assert_eq!(json, r#"["mish","swish(2)"]"#);
    }

    #[test]
    fn kinked_kinds_use_right_derivative() {
        let srelu = ActivationKind::srelu();
        assert_eq!(srelu.grad(1.0), 0.1);
        assert_eq!(srelu.grad(-1.0), 1.0);
        assert_eq!(Selu.grad(0.0), SELU_LAMBDA);
        assert_eq!(ActivationKind::rrelu().grad(-1.0), 0.5 * (0.125 + 1.0 / 3.0));
    }
}
