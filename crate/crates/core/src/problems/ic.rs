use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigFn {
    Sin,
    Cos,
}

/// `amplitude · f(freq·x + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub func: TrigFn,
    pub freq: f64,
    pub phase: f64,
}

/// An initial condition `u₀` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ICSample {
    /// `a₀ + Σᵢ aᵢ sin(2πix) + bᵢ cos(2πix)`, `sin[i-1] = aᵢ`, `cos[i-1] = bᵢ`.
    Fourier { a0: f64, sin: Vec<f64>, cos: Vec<f64> },
    /// `slope·x + intercept`.
    Affine { slope: f64, intercept: f64 },
    /// Piecewise-linear interpolant of equidistant samples including both
    /// endpoints.
    Tabulated { values: Vec<f64> },
    /// `constant + slope·x + Σ terms`; closed forms outside the sampled
    /// families (figure captions, out-of-distribution inputs).
    Trig {
        constant: f64,
        slope: f64,
        terms: Vec<TrigTerm>,
    },
}

impl ICSample {
    pub fn constant(c: f64) -> Self {
        ICSample::Affine {
            slope: 0.0,
            intercept: c,
        }
    }

    pub fn eval<S: Real>(&self, x: S) -> S {
        match self {
            ICSample::Fourier { a0, sin, cos } => {
                let mut acc = S::lift(*a0);
                for (i, (&a, &b)) in sin.iter().zip(cos).enumerate() {
                    let arg = x.scale(2.0 * PI * (i + 1) as f64);
                    if a != 0.0 {
                        acc = acc + arg.sin().scale(a);
                    }
                    if b != 0.0 {
                        acc = acc + arg.cos().scale(b);
                    }
                }
                acc
            }
            ICSample::Affine { slope, intercept } => x.scale(*slope).add_const(*intercept),
            ICSample::Tabulated { values } => {
                let n = values.len();
                if n == 1 {
                    return S::lift(values[0]);
                }
                let cells = (n - 1) as f64;
                let pos = x.value() * cells;
                let j = (pos.floor().max(0.0) as usize).min(n - 2);
                let w = x.scale(cells).add_const(-(j as f64));
                S::lift(values[j]) + w.scale(values[j + 1] - values[j])
            }
            ICSample::Trig {
                constant,
                slope,
                terms,
            } => {
                let mut acc = x.scale(*slope).add_const(*constant);
                for term in terms {
                    let arg = x.scale(term.freq).add_const(term.phase);
                    let f = match term.func {
                        TrigFn::Sin => arg.sin(),
                        TrigFn::Cos => arg.cos(),
                    };
                    acc = acc + f.scale(term.amplitude);
                }
                acc
            }
        }
    }

    /// `(u₀(0), u₀(1))`, the Dirichlet data.
    pub fn boundary_values(&self) -> (f64, f64) {
        (self.eval(0.0), self.eval(1.0))
    }

    /// Values at `x_j = j/(d_enc − 1)`, endpoints included.
    pub fn discretize(&self, d_enc: usize) -> Vec<f64> {
        assert!(d_enc >= 2, "at least two sensors are required");
        let cells = (d_enc - 1) as f64;
        (0..d_enc).map(|j| self.eval(j as f64 / cells)).collect()
    }

    /// Membership in the compact Fourier family: `|a₀|`, `|aᵢ|`, `|bᵢ|` ≤ `c`.
    pub fn in_fourier_set(&self, n: usize, c: f64) -> bool {
        match self {
            ICSample::Fourier { a0, sin, cos } => {
                sin.len() == n && cos.len() == n && std::iter::once(a0).chain(sin).chain(cos).all(|v| v.abs() <= c)
            }
            _ => false,
        }
    }
}

/// Sampling distribution of initial conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum IcFamily {
    Fourier {
        n: usize,
        c: f64,
        /// Sample from `[−c/n, c/n]` instead of `[−c, c]`.
        #[serde(default)]
        shrink: bool,
    },
    Affine {
        a_low: f64,
        a_high: f64,
        b_low: f64,
        b_high: f64,
    },
}

impl IcFamily {
    pub fn fourier_default() -> Self {
        IcFamily::Fourier {
            n: 3,
            c: 2.0,
            shrink: false,
        }
    }

    pub fn affine_default() -> Self {
        IcFamily::Affine {
            a_low: -1.0,
            a_high: 0.0,
            b_low: 1.0,
            b_high: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            IcFamily::Fourier { n, c, .. } => {
                if n == 0 || !(c >= 0.0) {
                    return Err(Error::Config(format!("fourier family needs n ≥ 1 and c ≥ 0, got n={n}, c={c}")));
                }
            }
            IcFamily::Affine {
                a_low,
                a_high,
                b_low,
                b_high,
            } => {
                if !(a_low <= a_high) || !(b_low <= b_high) {
                    return Err(Error::Config("affine family ranges must be nonempty".into()));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> ICSample {
        match *self {
            IcFamily::Fourier { n, c, shrink } => {
                let bound = if shrink { c / n as f64 } else { c };
                sample_fourier_ic(n, bound, rng)
            }
            IcFamily::Affine {
                a_low,
                a_high,
                b_low,
                b_high,
            } => sample_affine_ic((a_low, a_high), (b_low, b_high), rng),
        }
    }
}

/// `a₀, aᵢ, bᵢ ~ U[−c, c]` independently.
pub fn sample_fourier_ic<R: Rng>(n: usize, c: f64, rng: &mut R) -> ICSample {
    let mut draw = || rng.gen_range(-c..=c);
    let a0 = draw();
    let mut sin = Vec::with_capacity(n);
    let mut cos = Vec::with_capacity(n);
    for _ in 0..n {
        sin.push(draw());
        cos.push(draw());
    }
    ICSample::Fourier { a0, sin, cos }
}

pub fn sample_affine_ic<R: Rng>(a_range: (f64, f64), b_range: (f64, f64), rng: &mut R) -> ICSample {
    ICSample::Affine {
        slope: rng.gen_range(a_range.0..=a_range.1),
        intercept: rng.gen_range(b_range.0..=b_range.1),
    }
}
