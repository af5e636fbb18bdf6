//! Square node grids and the fields that live on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Space-time discretization of the square `[0, L]²` over `[0, T]`.
///
/// Nodes include both boundaries, so `h = L / (n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub length: f64,
    /// Nodes per side, boundary nodes included.
    pub nodes: usize,
    pub steps: usize,
    pub t_final: f64,
    pub speed: f64,
}

impl Discretization {
    pub fn new(length: f64, nodes: usize, steps: usize, t_final: f64, speed: f64) -> Result<Self> {
        let d = Discretization {
            length,
            nodes,
            steps,
            t_final,
            speed,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 5 {
            return Err(Error::InvalidDiscretization(format!(
                "need at least 5 nodes per side, got {}",
                self.nodes
            )));
        }
        if self.steps < 1 {
            return Err(Error::InvalidDiscretization("need at least one time step".into()));
        }
        for (name, v) in [
            ("length", self.length),
            ("final time", self.t_final),
            ("wave speed", self.speed),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidDiscretization(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.length / (self.nodes - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// CFL number `c Δt / h`.
    pub fn alpha(&self) -> f64 {
        self.speed * self.dt() / self.h()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Same physical problem refined by `factor` in space and time; the
    /// coarse nodes are every `factor`-th fine node.
    pub fn refined(&self, factor: usize) -> Self {
        Discretization {
            nodes: factor * (self.nodes - 1) + 1,
            steps: factor * self.steps,
            ..*self
        }
    }

    pub fn zeros(&self) -> Field {
        Field::zeros(self.nodes)
    }
}

/// Square `n × n` field stored row-major; `(i, j)` is `(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", n * n),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Field { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Field { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn check_shape(&self, other: &Field) -> Result<()> {
        if self.n != other.n {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0}", self.n),
                got: format!("{0}x{0}", other.n),
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Set the outermost ring of nodes to zero.
    pub fn zero_boundary(&mut self) {
        let n = self.n;
        if n == 0 {
            return;
        }
        self.row_mut(0).fill(0.0);
        self.row_mut(n - 1).fill(0.0);
        for i in 0..n {
            self.data[i * n] = 0.0;
            self.data[i * n + n - 1] = 0.0;
        }
    }

    pub fn boundary_is_zero(&self) -> bool {
        let n = self.n;
        (0..n).all(|k| {
            self.get(0, k) == 0.0
                && self.get(n - 1, k) == 0.0
                && self.get(k, 0) == 0.0
                && self.get(k, n - 1) == 0.0
        })
    }

    pub fn transpose(&self) -> Field {
        Field::from_fn(self.n, |i, j| self.get(j, i))
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Field) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn dot(&self, other: &Field) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Every `factor`-th node, for restricting a refined grid onto its coarse
    /// parent.
    pub fn restrict(&self, factor: usize) -> Field {
        let m = (self.n - 1) / factor + 1;
        Field::from_fn(m, |i, j| self.get(i * factor, j * factor))
    }
}
