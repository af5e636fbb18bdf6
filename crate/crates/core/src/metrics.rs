//! Error norms and convergence rates.
//!
//! The space-time norm is `sqrt(h² Δt Σ_{n=1..Nt} Σ_ij e²)`; the per-step
//! series is the spatial part `sqrt(h² Σ_ij e²)` at each `n = 1..Nt`, so the
//! squared norm equals `Δt Σ_n per_step_n²`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::analytic::TrigPolynomial;
use crate::error::{Error, Result};
use crate::grid::{Discretization, Field};
use crate::io::fmt_sci;

fn sq_diff(a: &Field, b: &Field) -> Result<f64> {
    a.check_shape(b)?;
    Ok(a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

/// Streaming accumulation of the error of a run, one level at a time.
#[derive(Debug, Clone)]
pub struct ErrorAccumulator {
    h2: f64,
    dt: f64,
    steps: usize,
    per_step: Vec<f64>,
}

impl ErrorAccumulator {
    pub fn new(disc: &Discretization) -> Self {
        ErrorAccumulator {
            h2: disc.h() * disc.h(),
            dt: disc.dt(),
            steps: disc.steps,
            per_step: Vec::with_capacity(disc.steps),
        }
    }

    /// Add level `n`. Level 0 is ignored; levels must arrive in order.
    pub fn push(&mut self, n: usize, numeric: &Field, exact: &Field) -> Result<()> {
        if n == 0 {
            return Ok(());
        }
        if n != self.per_step.len() + 1 || n > self.steps {
            return Err(Error::InvalidArgument(format!(
                "level {n} out of order (expected {})",
                self.per_step.len() + 1
            )));
        }
        self.per_step.push((self.h2 * sq_diff(numeric, exact)?).sqrt());
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.per_step.len() == self.steps
    }

    pub fn l2(&self) -> f64 {
        (self.dt * self.per_step.iter().map(|e| e * e).sum::<f64>()).sqrt()
    }

    pub fn per_step(&self) -> &[f64] {
        &self.per_step
    }

    pub fn into_per_step(self) -> Vec<f64> {
        self.per_step
    }
}

fn check_levels(numeric: &[Field], exact: &[Field], disc: &Discretization) -> Result<()> {
    for (name, levels) in [("numeric", numeric), ("exact", exact)] {
        if levels.len() != disc.steps + 1 {
            return Err(Error::ShapeMismatch {
                expected: format!("{} {name} levels", disc.steps + 1),
                got: format!("{}", levels.len()),
            });
        }
    }
    Ok(())
}

/// Spatial error `sqrt(h² Σ e²)` at every level `n = 1..Nt`. Both slices
/// hold levels `0..=Nt`.
pub fn error_over_time(numeric: &[Field], exact: &[Field], disc: &Discretization) -> Result<Vec<f64>> {
    check_levels(numeric, exact, disc)?;
    let h2 = disc.h() * disc.h();
    (1..=disc.steps)
        .into_par_iter()
        .map(|n| sq_diff(&numeric[n], &exact[n]).map(|s| (h2 * s).sqrt()))
        .collect()
}

pub fn l2_grid_norm(numeric: &[Field], exact: &[Field], disc: &Discretization) -> Result<f64> {
    let per_step = error_over_time(numeric, exact, disc)?;
    Ok((disc.dt() * per_step.iter().map(|e| e * e).sum::<f64>()).sqrt())
}

/// As [`l2_grid_norm`] with the exact solution evaluated at the nodes.
pub fn l2_grid_norm_exact(numeric: &[Field], p: &TrigPolynomial, disc: &Discretization) -> Result<f64> {
    let s = p.sampler(disc);
    let exact: Vec<Field> = (0..=disc.steps).map(|n| s.sample(disc.time(n))).collect();
    l2_grid_norm(numeric, &exact, disc)
}

/// `log(e1 / e2) / log(h1 / h2)`
pub fn convergence_rate(e1: f64, h1: f64, e2: f64, h2: f64) -> Result<f64> {
    if !(e1 > 0.0 && e2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "errors must be positive, got {e1} and {e2}"
        )));
    }
    if !(h1 > 0.0 && h2 > 0.0) || h1 == h2 {
        return Err(Error::InvalidArgument("grid spacings must be positive and distinct".into()));
    }
    Ok((e1 / e2).ln() / (h1 / h2).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub scheme: String,
    pub nx: usize,
    pub nt: usize,
    pub l2: f64,
    pub rate: Option<f64>,
    pub per_step: Vec<f64>,
}

/// `scheme,Nx,Nt,l2,rate` rows; a missing rate prints as `N/A`.
pub fn report_csv(reports: &[ErrorReport]) -> String {
    let mut out = String::from("scheme,Nx,Nt,l2,rate\n");
    for r in reports {
        let rate = r.rate.map_or("N/A".to_string(), |v| format!("{v:.5}"));
        let _ = writeln!(out, "{},{},{},{},{}", r.scheme, r.nx, r.nt, fmt_sci(r.l2), rate);
    }
    out
}

/// `n,t,err` rows for `n = 1..Nt`.
pub fn per_step_csv(per_step: &[f64], disc: &Discretization) -> String {
    let mut out = String::from("n,t,err\n");
    for (k, e) in per_step.iter().enumerate() {
        let n = k + 1;
        let _ = writeln!(out, "{n},{:.12e},{:.12e}", disc.time(n), e);
    }
    out
}
