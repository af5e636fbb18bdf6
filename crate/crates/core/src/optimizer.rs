//! Fitting the free stencil parameters to analytic trajectories.
//!
//! The loss unrolls three updates from a pair of true levels:
//!
//! ```text
//! p1 = step(u^{n-1}, u^n)      l1 = mse(p1, u^{n+1})
//! p2 = step(u^n, p1)           l2 = mse(p2, u^{n+2})
//! p3 = step(p1, p2)            l3 = mse(p3, u^{n+3})
//! ```
//!
//! where `step` is exactly the simulator update (same near-boundary closure,
//! same zeroed boundary). Gradients are taken in reverse mode through the
//! three steps and then through the constant map from free parameters to
//! weights.

use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{Dataset, Split};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::simulator::Operator;
use crate::stencil::{
    constraint_residuals, free_params_jacobian, from_free_params, weight_class, FreeParams, Order,
    Stencil, SymmetricWeights,
};

/// Epochs without sufficient validation improvement before stopping.
pub const PATIENCE: usize = 10;

/// Line-search halvings before a step is declared stalled.
const MAX_HALVINGS: usize = 40;

/// `(u^{n-1}, u^n)` and the three true levels that follow.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSample<'a> {
    pub u_prev: &'a Field,
    pub u_curr: &'a Field,
    pub labels: [&'a Field; 3],
    pub alpha: f64,
}

impl TrainingSample<'_> {
    fn check(&self) -> Result<()> {
        for f in [self.u_prev].into_iter().chain(self.labels) {
            self.u_curr.check_shape(f)?;
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha {} not positive", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub total: f64,
}

pub fn mse(pred: &Field, truth: &Field) -> Result<f64> {
    pred.check_shape(truth)?;
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / pred.as_slice().len() as f64)
}

/// `out = mask(2 curr - prev + a² L curr)`
fn update(op: &Operator, a2: f64, prev: &Field, curr: &Field, out: &mut Field) {
    op.apply_into(curr, out);
    for ((o, c), p) in out
        .as_mut_slice()
        .iter_mut()
        .zip(curr.as_slice())
        .zip(prev.as_slice())
    {
        *o = 2.0 * c - p + a2 * *o;
    }
    out.zero_boundary();
}

struct Forward {
    p: [Field; 3],
    loss: LossBreakdown,
}

fn forward(op: &Operator, s: &TrainingSample) -> Result<Forward> {
    s.check()?;
    if s.u_curr.n() != op.n() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0}", op.n()),
            got: format!("{0}x{0}", s.u_curr.n()),
        });
    }
    let a2 = s.alpha * s.alpha;
    let n = op.n();
    let mut p1 = Field::zeros(n);
    let mut p2 = Field::zeros(n);
    let mut p3 = Field::zeros(n);
    update(op, a2, s.u_prev, s.u_curr, &mut p1);
    update(op, a2, s.u_curr, &p1, &mut p2);
    update(op, a2, &p1, &p2, &mut p3);
    let l1 = mse(&p1, s.labels[0])?;
    let l2 = mse(&p2, s.labels[1])?;
    let l3 = mse(&p3, s.labels[2])?;
    Ok(Forward {
        p: [p1, p2, p3],
        loss: LossBreakdown {
            l1,
            l2,
            l3,
            total: l1 + l2 + l3,
        },
    })
}

pub fn iterative_loss(
    w: &SymmetricWeights,
    order: Order,
    sample: &TrainingSample,
) -> Result<LossBreakdown> {
    let op = Operator::new(&Stencil::build_symmetric(w), order, sample.u_curr.n())?;
    Ok(forward(&op, sample)?.loss)
}

/// `∂ total / ∂ w` for the six symmetric weights of one sample.
fn sample_gradient(op: &Operator, s: &TrainingSample) -> Result<(f64, [f64; 6])> {
    let fwd = forward(op, s)?;
    let [p1, p2, p3] = &fwd.p;
    let a2 = s.alpha * s.alpha;
    let scale = 2.0 / p1.as_slice().len() as f64;
    let residual = |p: &Field, label: &Field| {
        let mut r = p.clone();
        r.axpy(-1.0, label);
        r.scale(scale);
        r
    };

    let mut dk = [[0.0; 5]; 5];
    let mut add_kernel = |u: &Field, g: &Field| {
        let kg = op.kernel_gradient(u, g);
        for (row, krow) in dk.iter_mut().zip(kg) {
            for (d, k) in row.iter_mut().zip(krow) {
                *d += a2 * k;
            }
        }
    };

    // step 3: p3 = M(2 p2 - p1 + a² L p2)
    let mut z3 = residual(p3, s.labels[2]);
    z3.zero_boundary();
    add_kernel(p2, &z3);
    let mut bar2 = residual(p2, s.labels[1]);
    bar2.axpy(2.0, &z3);
    bar2.axpy(a2, &op.apply_transpose(&z3));
    let mut bar1 = residual(p1, s.labels[0]);
    bar1.axpy(-1.0, &z3);

    // step 2: p2 = M(2 p1 - u^n + a² L p1)
    let mut z2 = bar2;
    z2.zero_boundary();
    add_kernel(p1, &z2);
    bar1.axpy(2.0, &z2);
    bar1.axpy(a2, &op.apply_transpose(&z2));

    // step 1: p1 = M(2 u^n - u^{n-1} + a² L u^n)
    let mut z1 = bar1;
    z1.zero_boundary();
    add_kernel(s.u_curr, &z1);

    let mut gw = [0.0; 6];
    for (ra, row) in dk.iter().enumerate() {
        for (cb, v) in row.iter().enumerate() {
            gw[weight_class(ra as isize - 2, cb as isize - 2)] += v;
        }
    }
    Ok((fwd.loss.total, gw))
}

/// Mean total loss over `samples` at free parameters `p`.
pub fn batch_loss(p: &FreeParams, samples: &[TrainingSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let w = from_free_params(p)?;
    let op = Operator::new(&Stencil::build_symmetric(&w), p.order(), samples[0].u_curr.n())?;
    let losses = samples
        .par_iter()
        .map(|s| forward(&op, s).map(|f| f.loss.total))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / samples.len() as f64)
}

/// Mean total loss and its exact gradient with respect to the free
/// parameters.
pub fn loss_and_gradient(p: &FreeParams, samples: &[TrainingSample]) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let w = from_free_params(p)?;
    let op = Operator::new(&Stencil::build_symmetric(&w), p.order(), samples[0].u_curr.n())?;
    let parts = samples
        .par_iter()
        .map(|s| sample_gradient(&op, s))
        .collect::<Result<Vec<_>>>()?;
    let m = samples.len() as f64;
    let mut loss = 0.0;
    let mut gw = [0.0; 6];
    for (l, g) in &parts {
        loss += l;
        for (a, b) in gw.iter_mut().zip(g) {
            *a += b;
        }
    }
    let grad: Vec<f64> = free_params_jacobian(p.order())
        .iter()
        .map(|col| col.iter().zip(&gw).map(|(j, g)| j * g).sum::<f64>() / m)
        .collect();
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("loss gradient"));
    }
    Ok((loss / m, grad))
}

pub fn loss_gradient(p: &FreeParams, samples: &[TrainingSample]) -> Result<Vec<f64>> {
    loss_and_gradient(p, samples).map(|(_, g)| g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Quasi-Newton with an Armijo backtracking line search.
    Bfgs,
    /// Fixed step, halved whenever the loss increases.
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub order: Order,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Samples per gradient evaluation; a fixed seeded subset when smaller
    /// than the training set.
    pub batch: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub init: FreeParams,
    pub method: Method,
}

impl TrainConfig {
    pub fn new(order: Order) -> Self {
        TrainConfig {
            order,
            learning_rate: 1e-2,
            max_epochs: 100,
            batch: 1 << 20,
            tolerance: 1e-12,
            seed: 0,
            init: FreeParams::classical(order),
            method: Method::Bfgs,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.batch == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::InvalidArgument("tolerance must be non-negative".into()));
        }
        if self.init.order() != self.order {
            return Err(Error::InvalidArgument(format!(
                "initial parameters are order {}, config is order {}",
                self.init.order(),
                self.order
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub alpha: f64,
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    /// `epoch,train_loss,val_loss,param_0,param_1`, preceded by a `# alpha`
    /// comment line.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# alpha = {:.12e}\nepoch,train_loss,val_loss,param_0,param_1\n", self.alpha);
        for r in &self.records {
            let p1 = r.params.get(1).map_or(String::new(), |v| format!("{v:.16e}"));
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{}",
                r.epoch, r.train_loss, r.val_loss, r.params[0], p1
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: SymmetricWeights,
    pub params: FreeParams,
    pub log: TrainLog,
}

fn select_batch<'a>(
    mut samples: Vec<TrainingSample<'a>>,
    batch: usize,
    seed: u64,
) -> Vec<TrainingSample<'a>> {
    if batch >= samples.len() {
        return samples;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = sample_indices(&mut rng, samples.len(), batch).into_vec();
    keep.sort_unstable();
    let mut out = Vec::with_capacity(batch);
    for (k, s) in samples.drain(..).enumerate() {
        if keep.binary_search(&k).is_ok() {
            out.push(s);
        }
    }
    out
}

fn check_constraints(p: &FreeParams) -> Result<SymmetricWeights> {
    let w = from_free_params(p)?;
    let r = constraint_residuals(&w).max_active(p.order());
    assert!(r <= 1e-12, "constraint residual {r:e} after elimination");
    Ok(w)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Train on the dataset's `Train` split, validating on `Validation`.
///
/// Every epoch takes one step computed from the full (possibly subsampled)
/// training batch. The parameters with the best validation loss are
/// returned.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let gather = |split| -> Vec<TrainingSample<'_>> {
        ds.indices(split)
            .into_iter()
            .flat_map(|k| ds.training_samples(k))
            .collect()
    };
    let train_set = select_batch(gather(Split::Train), cfg.batch, cfg.seed);
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("training split has no samples".into()));
    }
    let val_set = gather(Split::Validation);
    let val_set = if val_set.is_empty() { train_set.clone() } else { val_set };

    let dim = cfg.order.free_len();
    let mut theta = cfg.init.theta().to_vec();
    let params = |t: &[f64]| FreeParams::new(cfg.order, t.to_vec());
    let (mut loss, mut grad) = loss_and_gradient(&params(&theta)?, &train_set)?;
    let val0 = batch_loss(&params(&theta)?, &val_set)?;
    if !loss.is_finite() || !val0.is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }
    check_constraints(&params(&theta)?)?;
    let mut log = TrainLog {
        alpha: ds.disc.alpha(),
        records: vec![EpochRecord {
            epoch: 0,
            train_loss: loss,
            val_loss: val0,
            params: theta.clone(),
        }],
    };
    let mut best = (val0, theta.clone());
    let mut stale = 0;

    // inverse Hessian approximation, row-major dim × dim
    let gnorm = dot(&grad, &grad).sqrt();
    let h0 = if gnorm > 0.0 { cfg.learning_rate / gnorm } else { 1.0 };
    let mut hinv: Vec<f64> = (0..dim * dim)
        .map(|k| if k % (dim + 1) == 0 { h0 } else { 0.0 })
        .collect();
    let mut lr = cfg.learning_rate;

    for epoch in 1..=cfg.max_epochs {
        let dir: Vec<f64> = match cfg.method {
            Method::Bfgs => (0..dim)
                .map(|i| -(0..dim).map(|j| hinv[i * dim + j] * grad[j]).sum::<f64>())
                .collect(),
            Method::GradientDescent => grad.iter().map(|g| -lr * g).collect(),
        };
        let slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            let trial_loss = batch_loss(&params(&trial)?, &train_set);
            match trial_loss {
                Ok(l) if l.is_finite() && l <= loss + 1e-4 * t * slope => {
                    accepted = Some(trial);
                    break;
                }
                _ => t *= 0.5,
            }
        }
        let Some(next) = accepted else { break };
        if cfg.method == Method::GradientDescent {
            lr *= t;
        }
        let (next_loss, next_grad) = loss_and_gradient(&params(&next)?, &train_set)
            .map_err(|_| Error::Diverged { epoch })?;
        let val = batch_loss(&params(&next)?, &val_set).map_err(|_| Error::Diverged { epoch })?;
        if !next_loss.is_finite() || !val.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        check_constraints(&params(&next)?)?;

        if cfg.method == Method::Bfgs {
            let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-300 {
                let rho = 1.0 / sy;
                let hy: Vec<f64> = (0..dim)
                    .map(|i| (0..dim).map(|j| hinv[i * dim + j] * y[j]).sum())
                    .collect();
                let yhy = dot(&y, &hy);
                let mut updated = hinv.clone();
                for i in 0..dim {
                    for j in 0..dim {
                        updated[i * dim + j] += (1.0 + rho * yhy) * rho * s[i] * s[j]
                            - rho * (hy[i] * s[j] + s[i] * hy[j]);
                    }
                }
                hinv = updated;
            }
        }

        theta = next;
        loss = next_loss;
        grad = next_grad;
        log.records.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_loss: val,
            params: theta.clone(),
        });
        if val < best.0 - cfg.tolerance {
            best = (val, theta.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= PATIENCE {
                break;
            }
        }
    }

    let params = params(&best.1)?;
    let weights = check_constraints(&params)?;
    Ok(TrainOutcome {
        weights,
        params,
        log,
    })
}
