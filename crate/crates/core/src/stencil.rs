//! 5×5 stencils: construction from the six symmetric weights, Taylor-order
//! constraints, constraint elimination, Fornberg weights and the plain-text
//! stencil file format.
//!
//! Layout of a symmetric stencil (row offset `a`, column offset `b`, both in
//! `-2..=2`):
//!
//! ```text
//! w5 w4 w3 w4 w5
//! w4 w2 w1 w2 w4
//! w3 w1 w0 w1 w3
//! w4 w2 w1 w2 w4
//! w5 w4 w3 w4 w5
//! ```

use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const SIZE: usize = 5;
pub const RADIUS: isize = 2;

/// Formal spatial order a stencil is trained or constrained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Order {
    Second,
    Fourth,
}

impl Order {
    pub fn as_u8(self) -> u8 {
        match self {
            Order::Second => 2,
            Order::Fourth => 4,
        }
    }

    /// Number of free parameters left after eliminating the active constraints.
    pub fn free_len(self) -> usize {
        match self {
            Order::Second => 1,
            Order::Fourth => 2,
        }
    }
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            2 => Ok(Order::Second),
            4 => Ok(Order::Fourth),
            other => Err(Error::InvalidArgument(format!(
                "order must be 2 or 4, got {other}"
            ))),
        }
    }
}

impl From<Order> for u8 {
    fn from(o: Order) -> u8 {
        o.as_u8()
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// The six independent coefficients `w0..w5` of an 8-fold symmetric stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricWeights(pub [f64; 6]);

/// Weights of the second-order kernel as printed (5 decimals).
pub const PRINTED_K2: SymmetricWeights =
    SymmetricWeights([-5.25494, 1.41831, 0.0, -0.10458, 0.0, 0.0]);

/// Weights of the fourth-order kernel as printed (5 decimals).
pub const PRINTED_K4: SymmetricWeights =
    SymmetricWeights([-5.52311, 1.66600, -0.21106, -0.15445, 0.04473, -0.00917]);

impl SymmetricWeights {
    pub fn new(w: [f64; 6]) -> Result<Self> {
        if w.iter().all(|v| v.is_finite()) {
            Ok(SymmetricWeights(w))
        } else {
            Err(Error::NonFinite("symmetric weights"))
        }
    }

    pub fn zeros() -> Self {
        SymmetricWeights([0.0; 6])
    }

    /// Free parameters of these weights under `order` (w3, or (w4, w5)).
    pub fn free_params(&self, order: Order) -> FreeParams {
        let theta = match order {
            Order::Second => vec![self.0[3]],
            Order::Fourth => vec![self.0[4], self.0[5]],
        };
        FreeParams { order, theta }
    }
}

/// Index of the symmetric weight that owns the offset `(a, b)`.
pub fn weight_class(a: isize, b: isize) -> usize {
    let (p, q) = {
        let (x, y) = (a.unsigned_abs(), b.unsigned_abs());
        (x.min(y), x.max(y))
    };
    match (p, q) {
        (0, 0) => 0,
        (0, 1) => 1,
        (1, 1) => 2,
        (0, 2) => 3,
        (1, 2) => 4,
        (2, 2) => 5,
        _ => panic!("offset ({a}, {b}) outside a 5x5 stencil"),
    }
}

/// A 5×5 convolution kernel. `weights[r][c]` multiplies the node at offset
/// `(r - 2, c - 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    weights: [[f64; SIZE]; SIZE],
}

impl Stencil {
    pub fn new(weights: [[f64; SIZE]; SIZE]) -> Result<Self> {
        if weights.iter().flatten().all(|v| v.is_finite()) {
            Ok(Stencil { weights })
        } else {
            Err(Error::NonFinite("stencil"))
        }
    }

    pub fn zeros() -> Self {
        Stencil {
            weights: [[0.0; SIZE]; SIZE],
        }
    }

    pub fn build_symmetric(w: &SymmetricWeights) -> Self {
        let mut weights = [[0.0; SIZE]; SIZE];
        for (r, row) in weights.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = w.0[weight_class(r as isize - RADIUS, c as isize - RADIUS)];
            }
        }
        Stencil { weights }
    }

    /// Textbook 5-point Laplacian.
    pub fn classic2() -> Self {
        Self::build_symmetric(&SymmetricWeights([-4.0, 1.0, 0.0, 0.0, 0.0, 0.0]))
    }

    /// Dimension-split fourth-order cross.
    pub fn classic4() -> Self {
        Self::build_symmetric(&classic4_weights())
    }

    /// The printed second-order kernel, projected onto its constraints
    /// through the free parameter `w3`.
    pub fn published_k2() -> Self {
        Self::build_symmetric(&published_k2_weights())
    }

    /// The printed fourth-order kernel, projected onto its constraints
    /// through the free parameters `(w4, w5)`.
    pub fn published_k4() -> Self {
        Self::build_symmetric(&published_k4_weights())
    }

    pub fn matrix(&self) -> &[[f64; SIZE]; SIZE] {
        &self.weights
    }

    /// Weight at offset `(a, b)`, each in `-2..=2`.
    pub fn at(&self, a: isize, b: isize) -> f64 {
        self.weights[(a + RADIUS) as usize][(b + RADIUS) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().flatten().sum()
    }

    /// Non-zero taps as `(row offset, column offset, weight)`.
    pub fn taps(&self) -> Vec<(isize, isize, f64)> {
        let mut out = Vec::new();
        for a in -RADIUS..=RADIUS {
            for b in -RADIUS..=RADIUS {
                let w = self.at(a, b);
                if w != 0.0 {
                    out.push((a, b, w));
                }
            }
        }
        out
    }

    pub fn flip_rows(&self) -> Self {
        let mut weights = self.weights;
        weights.reverse();
        Stencil { weights }
    }

    pub fn flip_cols(&self) -> Self {
        let mut weights = self.weights;
        for row in weights.iter_mut() {
            row.reverse();
        }
        Stencil { weights }
    }

    pub fn transpose(&self) -> Self {
        let mut weights = [[0.0; SIZE]; SIZE];
        for (r, row) in weights.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.weights[c][r];
            }
        }
        Stencil { weights }
    }

    pub fn is_symmetric8(&self) -> bool {
        *self == self.flip_rows() && *self == self.flip_cols() && *self == self.transpose()
    }

    /// The six symmetric weights, if the stencil has full 8-fold symmetry.
    pub fn symmetric_weights(&self) -> Option<SymmetricWeights> {
        if !self.is_symmetric8() {
            return None;
        }
        Some(SymmetricWeights([
            self.at(0, 0),
            self.at(0, 1),
            self.at(1, 1),
            self.at(0, 2),
            self.at(1, 2),
            self.at(2, 2),
        ]))
    }

    /// Taylor moment residuals computed from the full matrix, so they also
    /// apply to loaded, asymmetric stencils. Order 4 needs every residual
    /// within `tol`; order 2 only the consistency, first and second moments.
    pub fn formal_order(&self, tol: f64) -> Option<Order> {
        let mut m = [0.0; 15];
        for (a, b, w) in self.taps() {
            let (a, b) = (a as f64, b as f64);
            let monomials = [
                1.0,
                a,
                b,
                a * a,
                b * b,
                a * b,
                a * a * a,
                a * a * b,
                a * b * b,
                b * b * b,
                a.powi(4),
                b.powi(4),
                a * a * b * b,
                a.powi(3) * b,
                a * b.powi(3),
            ];
            for (acc, mono) in m.iter_mut().zip(monomials) {
                *acc += w * mono;
            }
        }
        // u*K ≈ Σ K (a^p b^q / p! q!) ∂^{p+q}u; target is u_xx + u_yy
        let second_ok = m[0].abs() <= tol
            && m[1].abs() <= tol
            && m[2].abs() <= tol
            && (m[3] / 2.0 - 1.0).abs() <= tol
            && (m[4] / 2.0 - 1.0).abs() <= tol
            && m[5].abs() <= tol;
        if !second_ok {
            return None;
        }
        let fourth_ok = m[6..].iter().all(|v| v.abs() <= tol * 24.0);
        Some(if fourth_ok { Order::Fourth } else { Order::Second })
    }
}

impl fmt::Display for Stencil {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.weights {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.5}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

pub fn classic4_weights() -> SymmetricWeights {
    SymmetricWeights([-5.0, 4.0 / 3.0, 0.0, -1.0 / 12.0, 0.0, 0.0])
}

pub fn published_k2_weights() -> SymmetricWeights {
    from_free_params(&PRINTED_K2.free_params(Order::Second)).expect("finite constants")
}

pub fn published_k4_weights() -> SymmetricWeights {
    from_free_params(&PRINTED_K4.free_params(Order::Fourth)).expect("finite constants")
}

/// Residuals of the Taylor-order constraints; zero residual means the
/// constraint holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintResiduals {
    pub consistency: f64,
    pub second_order: f64,
    pub fourth_a: f64,
    pub fourth_b: f64,
}

impl ConstraintResiduals {
    /// Largest absolute residual among the constraints active for `order`.
    pub fn max_active(&self, order: Order) -> f64 {
        let mut m = self.consistency.abs().max(self.second_order.abs());
        if order == Order::Fourth {
            m = m.max(self.fourth_a.abs()).max(self.fourth_b.abs());
        }
        m
    }
}

pub fn constraint_residuals(w: &SymmetricWeights) -> ConstraintResiduals {
    let [w0, w1, w2, w3, w4, w5] = w.0;
    ConstraintResiduals {
        consistency: w0 + 4.0 * w1 + 4.0 * w2 + 4.0 * w3 + 8.0 * w4 + 4.0 * w5,
        second_order: w1 + 2.0 * w2 + 4.0 * w3 + 10.0 * w4 + 8.0 * w5 - 1.0,
        fourth_a: w2 + 8.0 * w4 + 16.0 * w5,
        fourth_b: w1 / 12.0 + w2 / 6.0 + 4.0 * w3 / 3.0 + 17.0 * w4 / 6.0 + 8.0 * w5 / 3.0,
    }
}

/// Unconstrained parameters of a constrained symmetric stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeParams {
    order: Order,
    theta: Vec<f64>,
}

impl FreeParams {
    pub fn new(order: Order, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != order.free_len() {
            return Err(Error::FreeParamLength {
                order: order.as_u8(),
                expected: order.free_len(),
                got: theta.len(),
            });
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("free parameters"));
        }
        Ok(FreeParams { order, theta })
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Parameters of the classical stencil of the same order.
    pub fn classical(order: Order) -> Self {
        match order {
            Order::Second => FreeParams {
                order,
                theta: vec![0.0],
            },
            Order::Fourth => classic4_weights().free_params(order),
        }
    }
}

/// Solve the active constraints for the dependent weights.
///
/// Order 2 keeps `w3` free and zeroes `w2, w4, w5`. Order 4 keeps `(w4, w5)`
/// free; the 2×2 system for `(w1, w3)` has unit determinant.
pub fn from_free_params(p: &FreeParams) -> Result<SymmetricWeights> {
    if !p.theta.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("free parameters"));
    }
    let w = match p.order {
        Order::Second => {
            let w3 = p.theta[0];
            let w1 = 1.0 - 4.0 * w3;
            let w0 = -4.0 * w1 - 4.0 * w3;
            [w0, w1, 0.0, w3, 0.0, 0.0]
        }
        Order::Fourth => {
            let (w4, w5) = (p.theta[0], p.theta[1]);
            let w2 = -8.0 * w4 - 16.0 * w5;
            // w1 + 4 w3 = r1 ; w1/12 + 4 w3/3 = r2
            let r1 = 1.0 - 2.0 * w2 - 10.0 * w4 - 8.0 * w5;
            let r2 = -(w2 / 6.0 + 17.0 * w4 / 6.0 + 8.0 * w5 / 3.0);
            let w1 = 4.0 / 3.0 * r1 - 4.0 * r2;
            let w3 = r2 - r1 / 12.0;
            let w0 = -(4.0 * w1 + 4.0 * w2 + 4.0 * w3 + 8.0 * w4 + 4.0 * w5);
            [w0, w1, w2, w3, w4, w5]
        }
    };
    SymmetricWeights::new(w)
}

/// Constant Jacobian `∂w/∂θ` of the affine map [`from_free_params`];
/// `jac[k][i] = ∂w_i/∂θ_k`.
pub fn free_params_jacobian(order: Order) -> Vec<[f64; 6]> {
    let origin = from_free_params(&FreeParams {
        order,
        theta: vec![0.0; order.free_len()],
    })
    .expect("finite");
    (0..order.free_len())
        .map(|k| {
            let mut theta = vec![0.0; order.free_len()];
            theta[k] = 1.0;
            let unit = from_free_params(&FreeParams { order, theta }).expect("finite");
            let mut col = [0.0; 6];
            for i in 0..6 {
                col[i] = unit.0[i] - origin.0[i];
            }
            col
        })
        .collect()
}

/// Finite-difference weights for the `m`-th derivative at `x0` on arbitrary
/// distinct `nodes`, by Fornberg's recursion.
pub fn fornberg_weights(nodes: &[f64], x0: f64, m: usize) -> Result<Vec<f64>> {
    let n = nodes.len();
    if n == 0 {
        return Err(Error::InvalidNodes("empty node set".into()));
    }
    if m >= n {
        return Err(Error::InvalidNodes(format!(
            "derivative order {m} needs more than {n} nodes"
        )));
    }
    if !nodes.iter().all(|x| x.is_finite()) || !x0.is_finite() {
        return Err(Error::NonFinite("fornberg nodes"));
    }
    for i in 0..n {
        for j in 0..i {
            if nodes[i] == nodes[j] {
                return Err(Error::InvalidNodes(format!(
                    "duplicate node {}",
                    nodes[i]
                )));
            }
        }
    }

    // c[j][k]: weight of node j for the k-th derivative
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    Ok(c.into_iter().map(|row| row[m]).collect())
}

pub fn format_stencil(s: &Stencil) -> String {
    let mut out = String::new();
    for row in s.matrix() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_stencil(text: &str) -> Result<Stencil> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    Error::StencilFormat(format!("line {}: not a number: {tok:?}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != SIZE {
            return Err(Error::StencilFormat(format!(
                "line {}: expected {SIZE} values, found {}",
                lineno + 1,
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.len() != SIZE {
        return Err(Error::StencilFormat(format!(
            "expected {SIZE} rows, found {}",
            rows.len()
        )));
    }
    let mut weights = [[0.0; SIZE]; SIZE];
    for (dst, src) in weights.iter_mut().zip(&rows) {
        dst.copy_from_slice(src);
    }
    Stencil::new(weights)
}

pub fn save_stencil(s: &Stencil, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_stencil(s)).map_err(|e| Error::io(path, e))
}

pub fn load_stencil(path: impl AsRef<Path>) -> Result<Stencil> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_stencil(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vandermonde_weights(nodes: &[f64], x0: f64, m: usize) -> Vec<f64> {
        // Σ c_i (x_i - x0)^j = j! δ_jm, solved by Gaussian elimination
        let n = nodes.len();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|j| nodes.iter().map(|x| (x - x0).powi(j as i32)).collect())
            .collect();
        let mut b = vec![0.0; n];
        b[m] = (1..=m).map(|v| v as f64).product();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in col + 1..n {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn build_symmetric_layout() {
        let s = Stencil::build_symmetric(&SymmetricWeights([0., 1., 2., 3., 4., 5.]));
        let expected = [
            [5., 4., 3., 4., 5.],
            [4., 2., 1., 2., 4.],
            [3., 1., 0., 1., 3.],
            [4., 2., 1., 2., 4.],
            [5., 4., 3., 4., 5.],
        ];
        assert_eq!(s.matrix(), &expected);
        assert_eq!(Stencil::build_symmetric(&SymmetricWeights::zeros()), Stencil::zeros());
    }

    #[test]
    fn classic2_is_five_point_cross() {
        let s = Stencil::classic2();
        assert_eq!(s.at(0, 0), -4.0);
        for (a, b) in [(0, 1), (0, -1), (1, 0), (-1, 0)] {
            assert_eq!(s.at(a, b), 1.0);
        }
        assert_eq!(s.taps().len(), 5);
        assert_eq!(s.sum(), 0.0);
        let r = constraint_residuals(&s.symmetric_weights().unwrap());
        assert_eq!(r.consistency, 0.0);
        assert_eq!(r.second_order, 0.0);
    }

    #[test]
    fn printed_k2_matrix() {
        let s = Stencil::build_symmetric(&PRINTED_K2);
        assert_eq!(s.matrix()[2], [-0.10458, 1.41831, -5.25494, 1.41831, -0.10458]);
        assert_eq!(s.matrix()[0], [0.0, 0.0, -0.10458, 0.0, 0.0]);
        assert_eq!(s.matrix()[1], [0.0, 0.0, 1.41831, 0.0, 0.0]);
    }

    #[test]
    fn classic4_center_row_matches_1d_weights() {
        let s = Stencil::classic4();
        let one_d = fornberg_weights(&[-2., -1., 0., 1., 2.], 0.0, 2).unwrap();
        let row = s.matrix()[2];
        for b in 0..5 {
            let y_part = if b == 2 { one_d[2] } else { 0.0 };
            assert!((row[b] - (one_d[b] + y_part)).abs() < 1e-14);
        }
        assert!(s.sum().abs() < 1e-14);
        let r = constraint_residuals(&classic4_weights());
        assert!(r.max_active(Order::Fourth) <= 1e-12);
    }

    #[test]
    fn zero_weight_residuals() {
        let r = constraint_residuals(&SymmetricWeights::zeros());
        assert_eq!((r.consistency, r.second_order, r.fourth_a, r.fourth_b), (0.0, -1.0, 0.0, 0.0));
    }

    #[test]
    fn printed_kernels_nearly_satisfy_constraints() {
        assert!(constraint_residuals(&PRINTED_K2).max_active(Order::Second) <= 5e-4);
        assert!(constraint_residuals(&PRINTED_K4).max_active(Order::Fourth) <= 5e-4);
    }

    #[test]
    fn free_params_examples() {
        let w = from_free_params(&FreeParams::new(Order::Second, vec![-1.0 / 12.0]).unwrap())
            .unwrap();
        assert!((w.0[1] - 4.0 / 3.0).abs() < 1e-15);
        assert!((w.0[0] + 5.0).abs() < 1e-15);

        let w = from_free_params(&FreeParams::new(Order::Second, vec![0.0]).unwrap()).unwrap();
        assert_eq!(w.0, [-4.0, 1.0, 0.0, 0.0, 0.0, 0.0]);

        let w = published_k4_weights();
        for (a, b) in w.0.iter().zip(PRINTED_K4.0) {
            assert!((a - b).abs() <= 5e-4, "{a} vs {b}");
        }
        assert!(constraint_residuals(&w).max_active(Order::Fourth) <= 1e-12);

        let w = published_k2_weights();
        for (a, b) in w.0.iter().zip(PRINTED_K2.0) {
            assert!((a - b).abs() <= 5e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn free_params_reject_bad_input() {
        assert!(FreeParams::new(Order::Fourth, vec![1.0]).is_err());
        assert!(FreeParams::new(Order::Second, vec![f64::NAN]).is_err());
        assert!(SymmetricWeights::new([0.0, f64::INFINITY, 0., 0., 0., 0.]).is_err());
    }

    #[test]
    fn jacobian_reproduces_affine_map() {
        for order in [Order::Second, Order::Fourth] {
            let jac = free_params_jacobian(order);
            let theta: Vec<f64> = (0..order.free_len()).map(|k| 0.3 - 0.7 * k as f64).collect();
            let w = from_free_params(&FreeParams::new(order, theta.clone()).unwrap()).unwrap();
            let w0 = from_free_params(&FreeParams::new(order, vec![0.0; theta.len()]).unwrap())
                .unwrap();
            for i in 0..6 {
                let lin: f64 = w0.0[i] + (0..theta.len()).map(|k| jac[k][i] * theta[k]).sum::<f64>();
                assert!((lin - w.0[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn fornberg_examples() {
        let w = fornberg_weights(&[-1., 0., 1.], 0.0, 2).unwrap();
        assert!(close(&w, &[1., -2., 1.], 1e-14));
        let oracle = vandermonde_weights(&[0., 1., 2., 3.], 0.0, 2);
        assert!(close(&oracle, &[2., -5., 4., -1.], 1e-12));
        let w = fornberg_weights(&[0., 1., 2., 3.], 0.0, 2).unwrap();
        assert!(close(&w, &oracle, 1e-12));
        let oracle = vandermonde_weights(&[-2., -1., 0., 1., 2.], 0.0, 2);
        let w = fornberg_weights(&[-2., -1., 0., 1., 2.], 0.0, 2).unwrap();
        assert!(close(&w, &oracle, 1e-12));
        assert!(close(&w, &[-1. / 12., 4. / 3., -5. / 2., 4. / 3., -1. / 12.], 1e-13));
        // one-sided closure used next to the boundary
        let nodes = [0., 1., 2., 3., 4., 5.];
        let w = fornberg_weights(&nodes, 1.0, 2).unwrap();
        assert!(close(&w, &vandermonde_weights(&nodes, 1.0, 2), 1e-11));
    }

    #[test]
    fn fornberg_errors() {
        assert!(matches!(
            fornberg_weights(&[0., 1., 1.], 0.0, 1),
            Err(Error::InvalidNodes(_))
        ));
        assert!(matches!(
            fornberg_weights(&[0., 1., 2.], 0.0, 3),
            Err(Error::InvalidNodes(_))
        ));
    }

    #[test]
    fn formal_order_detection() {
        assert_eq!(Stencil::classic2().formal_order(1e-9), Some(Order::Second));
        assert_eq!(Stencil::classic4().formal_order(1e-9), Some(Order::Fourth));
        assert_eq!(Stencil::published_k4().formal_order(1e-9), Some(Order::Fourth));
        assert_eq!(Stencil::published_k2().formal_order(1e-9), Some(Order::Second));
        assert_eq!(Stencil::build_symmetric(&PRINTED_K4).formal_order(1e-3), Some(Order::Fourth));
        assert_eq!(Stencil::zeros().formal_order(1e-3), None);
    }

    #[test]
    fn parse_and_format() {
        let s = Stencil::classic4();
        assert_eq!(parse_stencil(&format_stencil(&s)).unwrap(), s);

        let text = "# comment\n1 2 3 4 5\n1 2 3 4 5\n1 2 3 4 5\n1 2 3 4 5\n1 2 3 4\n";
        assert!(matches!(parse_stencil(text), Err(Error::StencilFormat(_))));
        let text = "1 2 3 4 5\n1 2 3 4 5\n1 2 x 4 5\n1 2 3 4 5\n1 2 3 4 5\n";
        assert!(matches!(parse_stencil(text), Err(Error::StencilFormat(_))));
        let text = "1 2 3 4 5\n1 2 3 4 5\n1 2 3 4 5\n1 2 3 4 5\n";
        assert!(matches!(parse_stencil(text), Err(Error::StencilFormat(_))));
        // a comma decimal separator is not a number
        let text = "1 2 3 4 5\n1 2 3 4 5\n1 2 3,5 4 5\n1 2 3 4 5\n1 2 3 4 5\n";
        assert!(parse_stencil(text).is_err());
    }
}
