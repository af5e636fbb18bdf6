//! Explicit time marching of the 2D wave equation with an arbitrary 5×5
//! stencil:
//!
//! ```text
//! u^{n+1} = 2 u^n - u^{n-1} + α² [u^n * K]
//! ```
//!
//! The kernel is applied as a cross-correlation, which equals convolution for
//! point-symmetric kernels. Nodes at distance ≥ 2 from the boundary get the
//! full 5×5 kernel. Nodes at distance 1 would read outside the domain; they
//! use a dimension-split `u_xx + u_yy` whose 1D weights come from Fornberg's
//! algorithm on the available nodes, at the formal order of the scheme.
//! Boundary nodes hold the homogeneous Dirichlet value 0.

use rayon::prelude::*;

use crate::analytic::{InitialCondition, RickerWavelet};
use crate::error::{Error, Result};
use crate::grid::{Discretization, Field};
use crate::stencil::{fornberg_weights, Order, Stencil};

/// Fields above this max-norm are treated as a blow-up.
pub const BLOWUP_LIMIT: f64 = 1e6;

/// Fine-grid working memory above this is refused by [`reference_solution`].
pub const REFERENCE_MEMORY_LIMIT: usize = 2 << 30;

/// Rows per parallel task; below this the convolution stays on one thread.
const PAR_MIN_NODES: usize = 128;

/// A named stencil together with the order used for the near-boundary closure.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub name: String,
    pub stencil: Stencil,
    pub order: Order,
}

impl Scheme {
    /// Order is detected from the stencil's Taylor moments with a tolerance
    /// loose enough for 5-decimal printed kernels; inconsistent stencils fall
    /// back to the second-order closure.
    pub fn new(name: impl Into<String>, stencil: Stencil) -> Self {
        let order = stencil.formal_order(1e-3).unwrap_or(Order::Second);
        Scheme {
            name: name.into(),
            stencil,
            order,
        }
    }

    pub fn with_order(name: impl Into<String>, stencil: Stencil, order: Order) -> Self {
        Scheme {
            name: name.into(),
            stencil,
            order,
        }
    }

    pub fn classic2() -> Self {
        Scheme::with_order("Classic2", Stencil::classic2(), Order::Second)
    }

    pub fn classic4() -> Self {
        Scheme::with_order("Classic4", Stencil::classic4(), Order::Fourth)
    }

    pub fn published_k2() -> Self {
        Scheme::with_order("AI2", Stencil::published_k2(), Order::Second)
    }

    pub fn published_k4() -> Self {
        Scheme::with_order("AI4", Stencil::published_k4(), Order::Fourth)
    }
}

/// 1D second-derivative weights along one axis: node `i` reads
/// `weights[k] * u[start + k]`.
#[derive(Debug, Clone)]
struct LineWeights {
    start: usize,
    weights: Vec<f64>,
}

/// The discrete operator `u ↦ u * K` with the near-boundary closure, for a
/// fixed grid size. Values are produced on interior nodes only.
#[derive(Debug, Clone)]
pub struct Operator {
    n: usize,
    taps: Vec<(isize, isize, f64)>,
    lines: Vec<LineWeights>,
}

impl Operator {
    pub fn new(stencil: &Stencil, order: Order, n: usize) -> Result<Self> {
        if n < 5 {
            return Err(Error::InvalidDiscretization(format!(
                "need at least 5 nodes per side, got {n}"
            )));
        }
        let mut lines = Vec::with_capacity(n);
        for i in 0..n {
            let (start, len) = if i == 0 || i == n - 1 {
                (i, 0)
            } else {
                match order {
                    Order::Second => (i - 1, 3),
                    Order::Fourth if i >= 2 && i + 2 < n => (i - 2, 5),
                    Order::Fourth => {
                        let len = n.min(6);
                        if i == 1 {
                            (0, len)
                        } else {
                            (n - len, len)
                        }
                    }
                }
            };
            let weights = if len == 0 {
                Vec::new()
            } else {
                let nodes: Vec<f64> = (start..start + len).map(|k| k as f64).collect();
                fornberg_weights(&nodes, i as f64, 2)?
            };
            lines.push(LineWeights { start, weights });
        }
        Ok(Operator {
            n,
            taps: stencil.taps(),
            lines,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn ring_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (1..n - 1).flat_map(move |i| {
            (1..n - 1)
                .filter(move |&j| i == 1 || i == n - 2 || j == 1 || j == n - 2)
                .map(move |j| (i, j))
        })
    }

    fn interior_row(&self, u: &[f64], i: usize, out_row: &mut [f64]) {
        let n = self.n;
        out_row.fill(0.0);
        for &(a, b, w) in &self.taps {
            let r = (i as isize + a) as usize;
            let c0 = (2 + b) as usize;
            let src = &u[r * n + c0..r * n + c0 + out_row.len()];
            for (o, s) in out_row.iter_mut().zip(src) {
                *o += w * s;
            }
        }
    }

    fn ring_value(&self, u: &Field, i: usize, j: usize) -> f64 {
        let li = &self.lines[i];
        let lj = &self.lines[j];
        let mut acc = 0.0;
        for (k, w) in li.weights.iter().enumerate() {
            acc += w * u.get(li.start + k, j);
        }
        for (k, w) in lj.weights.iter().enumerate() {
            acc += w * u.get(i, lj.start + k);
        }
        acc
    }

    /// `out = L u` on interior nodes, zero on the boundary.
    pub fn apply_into(&self, u: &Field, out: &mut Field) {
        let n = self.n;
        debug_assert_eq!(u.n(), n);
        debug_assert_eq!(out.n(), n);
        let src = u.as_slice();
        {
            let data = out.as_mut_slice();
            let body = &mut data[2 * n..(n - 2) * n];
            let work = |(k, row): (usize, &mut [f64])| {
                let i = k + 2;
                self.interior_row(src, i, &mut row[2..n - 2]);
                row[..2].fill(0.0);
                row[n - 2..].fill(0.0);
            };
            if n >= PAR_MIN_NODES {
                body.par_chunks_mut(n).enumerate().for_each(work);
            } else {
                body.chunks_mut(n).enumerate().for_each(work);
            }
            data[..2 * n].fill(0.0);
            data[(n - 2) * n..].fill(0.0);
        }
        for (i, j) in self.ring_nodes() {
            let v = self.ring_value(u, i, j);
            out.set(i, j, v);
        }
    }

    pub fn apply(&self, u: &Field) -> Field {
        let mut out = Field::zeros(self.n);
        self.apply_into(u, &mut out);
        out
    }

    /// `out = Lᵀ g`. Only interior entries of `g` contribute.
    pub fn apply_transpose(&self, g: &Field) -> Field {
        let n = self.n;
        let mut out = Field::zeros(n);
        {
            let src = g.as_slice();
            let dst = out.as_mut_slice();
            for i in 2..n - 2 {
                let g_row = &src[i * n + 2..i * n + n - 2];
                for &(a, b, w) in &self.taps {
                    let r = (i as isize + a) as usize;
                    let c0 = (2 + b) as usize;
                    let d = &mut dst[r * n + c0..r * n + c0 + g_row.len()];
                    for (o, s) in d.iter_mut().zip(g_row) {
                        *o += w * s;
                    }
                }
            }
        }
        for (i, j) in self.ring_nodes() {
            let gv = g.get(i, j);
            if gv == 0.0 {
                continue;
            }
            let li = &self.lines[i];
            for (k, w) in li.weights.iter().enumerate() {
                out.add_at(li.start + k, j, w * gv);
            }
            let lj = &self.lines[j];
            for (k, w) in lj.weights.iter().enumerate() {
                out.add_at(i, lj.start + k, w * gv);
            }
        }
        out
    }

    /// `Σ_p g_p u_{p+(a,b)}` over full-kernel nodes for every offset, i.e. the
    /// gradient of `⟨g, L u⟩` with respect to each kernel entry.
    pub fn kernel_gradient(&self, u: &Field, g: &Field) -> [[f64; 5]; 5] {
        let n = self.n;
        let us = u.as_slice();
        let gs = g.as_slice();
        let mut out = [[0.0; 5]; 5];
        for (ra, row) in out.iter_mut().enumerate() {
            for (cb, cell) in row.iter_mut().enumerate() {
                let (a, b) = (ra as isize - 2, cb as isize - 2);
                let mut acc = 0.0;
                for i in 2..n - 2 {
                    let g_row = &gs[i * n + 2..i * n + n - 2];
                    let r = (i as isize + a) as usize;
                    let c0 = (2 + b) as usize;
                    let u_row = &us[r * n + c0..r * n + c0 + g_row.len()];
                    acc += g_row.iter().zip(u_row).map(|(x, y)| x * y).sum::<f64>();
                }
                *cell = acc;
            }
        }
        out
    }
}

/// How a point source enters the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SourceScaling {
    /// `Δt² c² f(t) / h²`: a discrete delta forcing `c² δ(x - x_s) f(t)`.
    Discretized,
    /// `f(t)` added as is.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource {
    pub i: usize,
    pub j: usize,
    pub wavelet: RickerWavelet,
    pub amplitude: f64,
    pub scaling: SourceScaling,
}

impl PointSource {
    pub fn ricker(i: usize, j: usize, wavelet: RickerWavelet) -> Self {
        PointSource {
            i,
            j,
            wavelet,
            amplitude: 1.0,
            scaling: SourceScaling::Discretized,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            0.0
        } else {
            self.amplitude * self.wavelet.eval(t)
        }
    }

    /// Increment added at the source node for time `t`.
    pub fn increment(&self, t: f64, disc: &Discretization) -> f64 {
        let f = self.value(t);
        match self.scaling {
            SourceScaling::Discretized => {
                let dt = disc.dt();
                let h = disc.h();
                dt * dt * disc.speed * disc.speed * f / (h * h)
            }
            SourceScaling::Raw => f,
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.i == 0 || self.j == 0 || self.i >= n - 1 || self.j >= n - 1 {
            return Err(Error::InvalidArgument(format!(
                "source at ({}, {}) is not strictly interior to a {n}x{n} grid",
                self.i, self.j
            )));
        }
        Ok(())
    }
}

pub fn inject_source_value(
    field: &mut Field,
    src: &PointSource,
    t: f64,
    disc: &Discretization,
) -> Result<()> {
    src.check(field.n())?;
    field.add_at(src.i, src.j, src.increment(t, disc));
    Ok(())
}

/// Two consecutive time levels `(u^{n-1}, u^n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub prev: Field,
    pub curr: Field,
    pub step_index: usize,
}

/// Initial data: `u^0`, `v^0` and optionally an exact `u^1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: Field,
    pub v0: Field,
    pub u1: Option<Field>,
}

impl InitialData {
    pub fn at_rest(u0: Field) -> Self {
        let v0 = Field::zeros(u0.n());
        InitialData { u0, v0, u1: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordPolicy {
    All,
    Stride(usize),
    FinalOnly,
}

/// Recorded time levels of a run. `fields[k]` is level `k * stride`, except
/// under [`RecordPolicy::FinalOnly`] where the single field is level `steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub stride: usize,
    pub steps: usize,
    pub fields: Vec<Field>,
}

impl Trajectory {
    pub fn level(&self, n: usize) -> Option<&Field> {
        if self.stride == 0 || n % self.stride != 0 {
            return None;
        }
        self.fields.get(n / self.stride)
    }

    pub fn n(&self) -> usize {
        self.fields.first().map_or(0, Field::n)
    }
}

/// A scheme bound to a discretization.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub scheme: Scheme,
    pub disc: Discretization,
    op: Operator,
    alpha2: f64,
    pub blowup_limit: f64,
}

impl Simulator {
    pub fn new(scheme: Scheme, disc: Discretization) -> Result<Self> {
        disc.validate()?;
        let op = Operator::new(&scheme.stencil, scheme.order, disc.nodes)?;
        let alpha = disc.alpha();
        Ok(Simulator {
            scheme,
            disc,
            op,
            alpha2: alpha * alpha,
            blowup_limit: BLOWUP_LIMIT,
        })
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    fn check_field(&self, f: &Field) -> Result<()> {
        if f.n() != self.disc.nodes {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0}", self.disc.nodes),
                got: format!("{0}x{0}", f.n()),
            });
        }
        Ok(())
    }

    /// `u^{n+1}` from `(u^{n-1}, u^n)`, with the source (if any) evaluated at
    /// `t_n`.
    pub fn step_into(
        &self,
        state: &WaveState,
        src: Option<&PointSource>,
        out: &mut Field,
    ) -> Result<()> {
        self.check_field(&state.prev)?;
        self.check_field(&state.curr)?;
        self.op.apply_into(&state.curr, out);
        let a2 = self.alpha2;
        for ((o, c), p) in out
            .as_mut_slice()
            .iter_mut()
            .zip(state.curr.as_slice())
            .zip(state.prev.as_slice())
        {
            *o = 2.0 * c - p + a2 * *o;
        }
        out.zero_boundary();
        if let Some(src) = src {
            inject_source_value(out, src, self.disc.time(state.step_index), &self.disc)?;
        }
        let m = out.max_abs();
        if !out.is_finite() || m > self.blowup_limit {
            return Err(Error::Unstable {
                step: state.step_index + 1,
                max_abs: m,
            });
        }
        Ok(())
    }

    pub fn step(&self, state: &WaveState, src: Option<&PointSource>) -> Result<Field> {
        let mut out = Field::zeros(self.disc.nodes);
        self.step_into(state, src, &mut out)?;
        Ok(out)
    }

    /// Second-order Taylor start
    /// `u^1 = u^0 + Δt v^0 + ½ α² (u^0 * K) [+ ½ source(0)]`.
    pub fn initial_step(&self, u0: &Field, v0: &Field, src: Option<&PointSource>) -> Result<Field> {
        self.check_field(u0)?;
        self.check_field(v0)?;
        let mut u1 = self.op.apply(u0);
        u1.scale(0.5 * self.alpha2);
        u1.axpy(1.0, u0);
        u1.axpy(self.disc.dt(), v0);
        u1.zero_boundary();
        if let Some(src) = src {
            src.check(u1.n())?;
            u1.add_at(src.i, src.j, 0.5 * src.increment(0.0, &self.disc));
        }
        Ok(u1)
    }

    /// March all steps, handing every level `0..=Nt` to `observe`.
    pub fn run_observed(
        &self,
        init: &InitialData,
        src: Option<&PointSource>,
        mut observe: impl FnMut(usize, &Field),
    ) -> Result<WaveState> {
        self.check_field(&init.u0)?;
        self.check_field(&init.v0)?;
        if let Some(s) = src {
            s.check(self.disc.nodes)?;
        }
        let mut u0 = init.u0.clone();
        u0.zero_boundary();
        let u1 = match &init.u1 {
            Some(u1) => {
                self.check_field(u1)?;
                let mut u1 = u1.clone();
                u1.zero_boundary();
                u1
            }
            None => self.initial_step(&u0, &init.v0, src)?,
        };
        observe(0, &u0);
        observe(1, &u1);
        let mut state = WaveState {
            prev: u0,
            curr: u1,
            step_index: 1,
        };
        let mut next = Field::zeros(self.disc.nodes);
        for _ in 2..=self.disc.steps {
            self.step_into(&state, src, &mut next)?;
            std::mem::swap(&mut state.prev, &mut state.curr);
            std::mem::swap(&mut state.curr, &mut next);
            state.step_index += 1;
            observe(state.step_index, &state.curr);
        }
        Ok(state)
    }

    pub fn run(
        &self,
        init: &InitialData,
        src: Option<&PointSource>,
        policy: RecordPolicy,
    ) -> Result<Trajectory> {
        let steps = self.disc.steps;
        let stride = match policy {
            RecordPolicy::All => 1,
            RecordPolicy::Stride(s) if s > 0 => s,
            RecordPolicy::Stride(_) => {
                return Err(Error::InvalidArgument("record stride must be positive".into()))
            }
            RecordPolicy::FinalOnly => steps,
        };
        let mut fields = Vec::new();
        self.run_observed(init, src, |n, f| {
            let keep = match policy {
                RecordPolicy::FinalOnly => n == steps,
                _ => n % stride == 0,
            };
            if keep {
                fields.push(f.clone());
            }
        })?;
        Ok(Trajectory {
            stride,
            steps,
            fields,
        })
    }
}

pub fn step(
    state: &WaveState,
    scheme: &Scheme,
    disc: &Discretization,
    src: Option<&PointSource>,
) -> Result<Field> {
    Simulator::new(scheme.clone(), *disc)?.step(state, src)
}

pub fn initial_step(u0: &Field, v0: &Field, scheme: &Scheme, disc: &Discretization) -> Result<Field> {
    Simulator::new(scheme.clone(), *disc)?.initial_step(u0, v0, None)
}

pub fn run(
    init: &InitialData,
    scheme: &Scheme,
    disc: &Discretization,
    src: Option<&PointSource>,
    policy: RecordPolicy,
) -> Result<Trajectory> {
    Simulator::new(scheme.clone(), *disc)?.run(init, src, policy)
}

/// Classic4 on a grid refined by `refine` in space and time, restricted back
/// to `disc`'s nodes; `observe` receives every coarse level `0..=Nt`.
pub fn reference_solution(
    disc: &Discretization,
    init: &InitialCondition,
    src: Option<&PointSource>,
    refine: usize,
    mut observe: impl FnMut(usize, &Field),
) -> Result<()> {
    if refine == 0 {
        return Err(Error::InvalidArgument("refine factor must be at least 1".into()));
    }
    let fine = disc.refined(refine);
    let needed = 4 * fine.nodes * fine.nodes * std::mem::size_of::<f64>();
    if needed > REFERENCE_MEMORY_LIMIT {
        return Err(Error::MemoryGuard {
            needed,
            limit: REFERENCE_MEMORY_LIMIT,
        });
    }
    let fine_src = src.map(|s| PointSource {
        i: s.i * refine,
        j: s.j * refine,
        ..*s
    });
    let sim = Simulator::new(Scheme::classic4(), fine)?;
    let data = init.initial_data(&fine, true);
    sim.run_observed(&data, fine_src.as_ref(), |n, f| {
        if n % refine == 0 {
            observe(n / refine, &f.restrict(refine));
        }
    })?;
    Ok(())
}

pub fn reference_trajectory(
    disc: &Discretization,
    init: &InitialCondition,
    src: Option<&PointSource>,
    refine: usize,
) -> Result<Trajectory> {
    let mut fields = Vec::with_capacity(disc.steps + 1);
    reference_solution(disc, init, src, refine, |_, f| fields.push(f.clone()))?;
    Ok(Trajectory {
        stride: 1,
        steps: disc.steps,
        fields,
    })
}
