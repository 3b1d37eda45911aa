//! Ground-truth solution fields on rectangular `(t, x)` grids.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::problems::{Equation, ICSample, IbvpSpec};

/// Solution values on an equidistant grid including the endpoints:
/// `t_i = i·T/(nt−1)`, `x_j = j/(nx−1)`. Stored row-major, one row per time.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub t_vals: Vec<f64>,
    pub x_vals: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

impl FieldGrid {
    pub fn new(t_final: f64, nt: usize, nx: usize) -> Self {
        Self {
            t_vals: linspace(0.0, t_final, nt),
            x_vals: linspace(0.0, 1.0, nx),
            values: vec![0.0; nt * nx],
        }
    }

    /// Tabulate `f(t, x)` on the grid.
    pub fn tabulate(t_final: f64, nt: usize, nx: usize, mut f: impl FnMut(f64, f64) -> Result<f64>) -> Result<Self> {
        let mut grid = Self::new(t_final, nt, nx);
        for i in 0..nt {
            let t = grid.t_vals[i];
            for j in 0..nx {
                grid.values[i * nx + j] = f(t, grid.x_vals[j])?;
            }
        }
        Ok(grid)
    }

    pub fn nt(&self) -> usize {
        self.t_vals.len()
    }

    pub fn nx(&self) -> usize {
        self.x_vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nx() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let nx = self.nx();
        &self.values[i * nx..(i + 1) * nx]
    }

    pub fn same_grid(&self, other: &FieldGrid) -> bool {
        self.t_vals == other.t_vals && self.x_vals == other.x_vals
    }

    /// Pointwise `|self − other|` on a shared grid.
    pub fn abs_diff(&self, other: &FieldGrid) -> Result<FieldGrid> {
        if !self.same_grid(other) {
            return Err(Error::Grid(format!(
                "{}×{} vs {}×{}",
                self.nt(),
                self.nx(),
                other.nt(),
                other.nx()
            )));
        }
        Ok(FieldGrid {
            t_vals: self.t_vals.clone(),
            x_vals: self.x_vals.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).collect(),
        })
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Header row `t\x,x_0,…`; then one row `t_i,u(t_i,x_0),…` per time.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t\\x")?;
        for x in &self.x_vals {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
        for (i, t) in self.t_vals.iter().enumerate() {
            write!(w, "{t}")?;
            for v in self.row(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            what: "field CSV",
            reason,
        };
        let parse = |s: &str, line: usize| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("line {line}: {e} ({s:?})")))
        };
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
        let mut cols = header.split(',');
        if cols.next().map(str::trim) != Some("t\\x") {
            return Err(bad("header must start with t\\x".into()));
        }
        let x_vals = cols.map(|c| parse(c, 1)).collect::<Result<Vec<_>>>()?;
        if x_vals.is_empty() {
            return Err(bad("no x columns".into()));
        }
        let mut t_vals = Vec::new();
        let mut values = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            t_vals.push(parse(cols.next().unwrap_or(""), k + 2)?);
            let before = values.len();
            for c in cols {
                values.push(parse(c, k + 2)?);
            }
            if values.len() - before != x_vals.len() {
                return Err(bad(format!(
                    "line {} has {} values, expected {}",
                    k + 2,
                    values.len() - before,
                    x_vals.len()
                )));
            }
        }
        if t_vals.is_empty() {
            return Err(bad("no data rows".into()));
        }
        Ok(Self { t_vals, x_vals, values })
    }
}

/// Closed-form Burgers solution for `u₀ = ax + b`: `min((ax+b)/(at+1), b)`.
pub fn burgers_exact(a: f64, b: f64, t: f64, x: f64) -> Result<f64> {
    let denom = a * t + 1.0;
    if denom <= 0.0 {
        return Err(Error::Shock(denom));
    }
    Ok(((a * x + b) / denom).min(b))
}

pub fn field_from_exact(a: f64, b: f64, t_final: f64, nt: usize, nx: usize) -> Result<FieldGrid> {
    FieldGrid::tabulate(t_final, nt, nx, |t, x| burgers_exact(a, b, t, x))
}

/// Crank–Nicolson for `u_t = κ u_xx` with `u(t,0) = u₀(0)`, `u(t,1) = u₀(1)`.
///
/// The internal step is `T/((nt−1)·substeps)`; every `substeps`-th state is
/// stored. Each step solves a constant-coefficient tridiagonal system with a
/// pre-factored Thomas sweep.
pub fn heat_fd_solve(
    ic: &ICSample,
    kappa: f64,
    t_final: f64,
    nt: usize,
    nx: usize,
    substeps: usize,
) -> Result<FieldGrid> {
    if nt < 2 || nx < 2 || substeps < 1 {
        return Err(Error::Config(format!(
            "heat solver needs nt, nx ≥ 2 and substeps ≥ 1 (got {nt}, {nx}, {substeps})"
        )));
    }
    let mut grid = FieldGrid::new(t_final, nt, nx);
    let mut u: Vec<f64> = grid.x_vals.iter().map(|&x| ic.eval(x)).collect();
    let (left, right) = ic.boundary_values();
    u[0] = left;
    u[nx - 1] = right;
    grid.values[..nx].copy_from_slice(&u);
    if nx == 2 {
        for i in 1..nt {
            grid.values[i * nx..(i + 1) * nx].copy_from_slice(&u);
        }
        return Ok(grid);
    }

    let h = 1.0 / (nx - 1) as f64;
    let dt = t_final / ((nt - 1) * substeps) as f64;
    let r = kappa * dt / (h * h);
    let m = nx - 2;
    // Forward-elimination factors for the matrix tridiag(−r/2, 1+r, −r/2).
    let off = -0.5 * r;
    let diag = 1.0 + r;
    let mut c_prime = vec![0.0; m];
    let mut inv_denom = vec![0.0; m];
    for k in 0..m {
        let denom = if k == 0 { diag } else { diag - off * c_prime[k - 1] };
        inv_denom[k] = 1.0 / denom;
        c_prime[k] = off * inv_denom[k];
    }

    let mut rhs = vec![0.0; m];
    for i in 1..nt {
        for _ in 0..substeps {
            for k in 0..m {
                let j = k + 1;
                rhs[k] = (1.0 - r) * u[j] + 0.5 * r * (u[j - 1] + u[j + 1]);
            }
            rhs[0] += 0.5 * r * left;
            rhs[m - 1] += 0.5 * r * right;
            // Thomas sweep
            rhs[0] *= inv_denom[0];
            for k in 1..m {
                rhs[k] = (rhs[k] - off * rhs[k - 1]) * inv_denom[k];
            }
            for k in (0..m - 1).rev() {
                rhs[k] -= c_prime[k] * rhs[k + 1];
            }
            u[1..=m].copy_from_slice(&rhs);
        }
        if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "heat solver state".into(),
                value: *bad,
            });
        }
        grid.values[i * nx..(i + 1) * nx].copy_from_slice(&u);
    }
    Ok(grid)
}

pub const DEFAULT_SUBSTEPS: usize = 4;

/// Reference field for an IBVP and initial condition.
pub fn reference_field(ibvp: &IbvpSpec, ic: &ICSample, nt: usize, nx: usize) -> Result<FieldGrid> {
    match ibvp.equation {
        Equation::Heat { kappa } => heat_fd_solve(ic, kappa, ibvp.t_final, nt, nx, DEFAULT_SUBSTEPS),
        Equation::Burgers => match *ic {
            ICSample::Affine { slope, intercept } => field_from_exact(slope, intercept, ibvp.t_final, nt, nx),
            _ => Err(Error::Config(
                "Burgers reference is only available for affine initial conditions".into(),
            )),
        },
    }
}
