//! Closed-form standing-wave solutions, the Ricker wavelet and the seeded
//! training dataset.
//!
//! A trigonometric polynomial of degree `d`
//!
//! ```text
//! u(x, y, t) = Σ_{n=1..d} a_n sin(πn x/L) sin(πn y/L) cos(√2 πn c t / L)
//! ```
//!
//! solves the wave equation on `[0, L]²` with homogeneous Dirichlet data and
//! zero initial velocity.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Discretization, Field};
use crate::io::{read_trajectory, write_trajectory};
use crate::optimizer::TrainingSample;
use crate::simulator::{InitialData, Trajectory};

/// Datasets above this size are refused.
pub const DATASET_MEMORY_LIMIT: usize = 3 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    /// `a_1..a_d`
    pub amplitudes: Vec<f64>,
    pub length: f64,
    pub speed: f64,
}

impl TrigPolynomial {
    pub fn new(amplitudes: Vec<f64>, length: f64, speed: f64) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidArgument("degree must be at least 1".into()));
        }
        if !amplitudes.iter().all(|a| a.is_finite()) {
            return Err(Error::NonFinite("amplitudes"));
        }
        if !(length > 0.0 && speed > 0.0) {
            return Err(Error::InvalidArgument("length and speed must be positive".into()));
        }
        Ok(TrigPolynomial {
            amplitudes,
            length,
            speed,
        })
    }

    /// `sin(mπx/L) sin(mπy/L) cos(√2 mπ c t/L)`.
    pub fn single_mode(m: usize, length: f64, speed: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("mode number must be at least 1".into()));
        }
        let mut amplitudes = vec![0.0; m];
        amplitudes[m - 1] = 1.0;
        Self::new(amplitudes, length, speed)
    }

    pub fn degree(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn wavenumber(&self, n: usize) -> f64 {
        PI * n as f64 / self.length
    }

    pub fn angular_frequency(&self, n: usize) -> f64 {
        2f64.sqrt() * self.wavenumber(n) * self.speed
    }

    fn modes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(k, a)| (k + 1, *a))
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.modes()
            .map(|(n, a)| {
                let k = self.wavenumber(n);
                a * (k * x).sin() * (k * y).sin() * (self.angular_frequency(n) * t).cos()
            })
            .sum()
    }

    pub fn sampler(&self, disc: &Discretization) -> TrigSampler {
        let modes = self
            .modes()
            .map(|(n, a)| {
                let k = self.wavenumber(n);
                let shape: Vec<f64> = (0..disc.nodes).map(|i| (k * disc.x(i)).sin()).collect();
                (a, self.angular_frequency(n), shape)
            })
            .collect();
        TrigSampler {
            n: disc.nodes,
            modes,
        }
    }

    /// Solution sampled at every node at time `t`; boundary nodes are exactly 0.
    pub fn sample(&self, disc: &Discretization, t: f64) -> Field {
        self.sampler(disc).sample(t)
    }
}

/// Per-mode node values cached for repeated sampling on one grid.
#[derive(Debug, Clone)]
pub struct TrigSampler {
    n: usize,
    modes: Vec<(f64, f64, Vec<f64>)>,
}

impl TrigSampler {
    pub fn sample_into(&self, t: f64, out: &mut Field) {
        let n = self.n;
        out.as_mut_slice().fill(0.0);
        for (a, omega, shape) in &self.modes {
            let coef = a * (omega * t).cos();
            for i in 1..n - 1 {
                let ci = coef * shape[i];
                let row = &mut out.row_mut(i)[1..n - 1];
                for (v, s) in row.iter_mut().zip(&shape[1..n - 1]) {
                    *v += ci * s;
                }
            }
        }
    }

    pub fn sample(&self, t: f64) -> Field {
        let mut out = Field::zeros(self.n);
        self.sample_into(t, &mut out);
        out
    }
}

/// Largest `|u_tt - c² (u_xx + u_yy)|` over `points` `(x, y, t)`, each
/// derivative taken by the fourth-order central difference with `step`.
pub fn pde_residual_check(p: &TrigPolynomial, points: &[(f64, f64, f64)], step: f64) -> f64 {
    const W: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
    let second = |f: &dyn Fn(f64) -> f64| -> f64 {
        W.iter()
            .enumerate()
            .map(|(k, w)| w * f((k as f64 - 2.0) * step))
            .sum::<f64>()
            / (step * step)
    };
    let c2 = p.speed * p.speed;
    points
        .iter()
        .map(|&(x, y, t)| {
            let utt = second(&|d| p.eval(x, y, t + d));
            let uxx = second(&|d| p.eval(x + d, y, t));
            let uyy = second(&|d| p.eval(x, y + d, t));
            (utt - c2 * (uxx + uyy)).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RickerWavelet {
    /// Peak frequency in Hz.
    pub sigma: f64,
    /// Time of the peak.
    pub t0: f64,
}

impl RickerWavelet {
    pub fn new(sigma: f64, t0: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) || !t0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Ricker frequency must be positive, got {sigma}"
            )));
        }
        Ok(RickerWavelet { sigma, t0 })
    }

    pub fn eval(&self, t: f64) -> f64 {
        ricker(self, t)
    }
}

/// `(1 - 2π²σ²τ²) exp(-π²σ²τ²)` with `τ = t - t0`.
pub fn ricker(w: &RickerWavelet, t: f64) -> f64 {
    let tau = t - w.t0;
    let arg = PI * PI * w.sigma * w.sigma * tau * tau;
    (1.0 - 2.0 * arg) * (-arg).exp()
}

/// Initial condition of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `u0 = v0 = 0`; the motion comes from a source.
    Quiescent,
    Trig(TrigPolynomial),
}

impl InitialCondition {
    /// Sampled `u^0`, `v^0 = 0`, and the exact `u^1` when `exact_start` is set
    /// and a closed form exists.
    pub fn initial_data(&self, disc: &Discretization, exact_start: bool) -> InitialData {
        match self {
            InitialCondition::Quiescent => InitialData::at_rest(disc.zeros()),
            InitialCondition::Trig(p) => {
                let s = p.sampler(disc);
                InitialData {
                    u0: s.sample(0.0),
                    v0: disc.zeros(),
                    u1: exact_start.then(|| s.sample(disc.dt())),
                }
            }
        }
    }

    pub fn exact(&self) -> Option<&TrigPolynomial> {
        match self {
            InitialCondition::Trig(p) => Some(p),
            InitialCondition::Quiescent => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Sampled analytic trajectories with their train/validation/test tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub seed: u64,
    pub degree_max: usize,
    pub distribution: String,
    pub disc: Discretization,
    pub polynomials: Vec<TrigPolynomial>,
    pub splits: Vec<Split>,
    pub trajectories: Vec<Trajectory>,
}

pub const AMPLITUDE_DISTRIBUTION: &str = "uniform[-1,1]";

/// Train/validation/test sizes; 12 gives 8/2/2.
pub fn split_sizes(count: usize) -> (usize, usize, usize) {
    let held = (count / 6).max(1);
    (count - 2 * held, held, held)
}

/// Generate `count` trajectories of degree `d_max` with amplitudes uniform in
/// `[-1, 1]`. Trajectory `k` draws from its own generator seeded `seed + k`.
pub fn generate_dataset(
    seed: u64,
    d_max: usize,
    count: usize,
    disc: &Discretization,
) -> Result<Dataset> {
    disc.validate()?;
    if d_max < 1 {
        return Err(Error::InvalidArgument("maximal degree must be at least 1".into()));
    }
    if count < 3 {
        return Err(Error::InvalidArgument(
            "need at least 3 trajectories for train/validation/test".into(),
        ));
    }
    let needed = count * (disc.steps + 1) * disc.nodes * disc.nodes * std::mem::size_of::<f64>();
    if needed > DATASET_MEMORY_LIMIT {
        return Err(Error::MemoryGuard {
            needed,
            limit: DATASET_MEMORY_LIMIT,
        });
    }
    let polynomials: Vec<TrigPolynomial> = (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let amplitudes = (0..d_max).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            TrigPolynomial::new(amplitudes, disc.length, disc.speed)
        })
        .collect::<Result<_>>()?;
    let trajectories = polynomials
        .par_iter()
        .map(|p| {
            let s = p.sampler(disc);
            Trajectory {
                stride: 1,
                steps: disc.steps,
                fields: (0..=disc.steps).map(|n| s.sample(disc.time(n))).collect(),
            }
        })
        .collect();
    let (train, val, _) = split_sizes(count);
    let splits = (0..count)
        .map(|k| {
            if k < train {
                Split::Train
            } else if k < train + val {
                Split::Validation
            } else {
                Split::Test
            }
        })
        .collect();
    Ok(Dataset {
        seed,
        degree_max: d_max,
        distribution: AMPLITUDE_DISTRIBUTION.to_string(),
        disc: *disc,
        polynomials,
        splits,
        trajectories,
    })
}

impl Dataset {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == split)
            .map(|(k, _)| k)
            .collect()
    }

    /// Single-step pairs `((u^{n-1}, u^n), u^{n+1})` for `n = 1..Nt-1`.
    pub fn sample_label_pairs(&self, k: usize) -> Vec<(&Field, &Field, &Field)> {
        let f = &self.trajectories[k].fields;
        (1..self.disc.steps)
            .map(|n| (&f[n - 1], &f[n], &f[n + 1]))
            .collect()
    }

    /// Three-label samples for the iterative loss, `n = 1..=Nt-3`.
    pub fn training_samples(&self, k: usize) -> Vec<TrainingSample<'_>> {
        let f = &self.trajectories[k].fields;
        let alpha = self.disc.alpha();
        (1..self.disc.steps.saturating_sub(2))
            .map(|n| TrainingSample {
                u_prev: &f[n - 1],
                u_curr: &f[n],
                labels: [&f[n + 1], &f[n + 2], &f[n + 3]],
                alpha,
            })
            .collect()
    }

    /// Writes `manifest.toml` plus one trajectory file per solution.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = Manifest {
            seed: self.seed,
            distribution: self.distribution.clone(),
            degree_max: self.degree_max,
            discretization: self.disc,
            trajectories: self
                .polynomials
                .iter()
                .zip(&self.splits)
                .enumerate()
                .map(|(k, (p, s))| ManifestEntry {
                    file: format!("trajectory_{k:03}.txt"),
                    split: *s,
                    amplitudes: p.amplitudes.clone(),
                })
                .collect(),
        };
        let text = toml::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        let path = dir.join("manifest.toml");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        for (entry, traj) in manifest.trajectories.iter().zip(&self.trajectories) {
            write_trajectory(dir.join(&entry.file), traj)?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.toml");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let disc = manifest.discretization;
        disc.validate()?;
        let mut polynomials = Vec::new();
        let mut splits = Vec::new();
        let mut trajectories = Vec::new();
        for entry in &manifest.trajectories {
            polynomials.push(TrigPolynomial::new(
                entry.amplitudes.clone(),
                disc.length,
                disc.speed,
            )?);
            splits.push(entry.split);
            let traj = read_trajectory(dir.join(&entry.file))?;
            if traj.n() != disc.nodes || traj.fields.len() != disc.steps + 1 {
                return Err(Error::TrajectoryFormat(format!(
                    "{} does not match the manifest discretization",
                    entry.file
                )));
            }
            trajectories.push(traj);
        }
        Ok(Dataset {
            seed: manifest.seed,
            degree_max: manifest.degree_max,
            distribution: manifest.distribution,
            disc,
            polynomials,
            splits,
            trajectories,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    seed: u64,
    distribution: String,
    degree_max: usize,
    discretization: Discretization,
    trajectories: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    split: Split,
    amplitudes: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_examples() {
        let p = TrigPolynomial::single_mode(1, 1.0, 1.0).unwrap();
        for &(x, y) in &[(0.3, 0.7), (0.5, 0.5), (0.1, 0.9)] {
            let v = (PI * x).sin() * (PI * y).sin();
            assert!((p.eval(x, y, 0.0) - v).abs() < 1e-15);
        }
        for t in [0.0, 0.03, 0.5] {
            for s in [0.0, 0.4, 1.0] {
                assert!(p.eval(0.0, s, t).abs() < 1e-15);
                assert!(p.eval(s, 1.0, t).abs() < 1e-15);
            }
        }
        let v = p.eval(0.5, 0.5, 0.08);
        assert!((v - (2f64.sqrt() * PI * 0.08).cos()).abs() < 1e-15);
        assert!((v - 0.93750).abs() < 5e-6, "{v}");
    }

    #[test]
    fn time_symmetry() {
        let p = TrigPolynomial::new(vec![0.3, -0.7, 0.2], 1.0, 5.0).unwrap();
        for t in [0.01, 0.037, 0.09] {
            assert_eq!(p.eval(0.2, 0.6, t), p.eval(0.2, 0.6, -t));
        }
    }

    #[test]
    fn residual_small_for_exact_solutions() {
        let pts = [(0.3, 0.4, 0.02), (0.51, 0.77, 0.06), (0.12, 0.9, 0.1)];
        let p = TrigPolynomial::single_mode(1, 1.0, 1.0).unwrap();
        assert!(pde_residual_check(&p, &pts, 1e-3) <= 1e-6);
        let z = TrigPolynomial::new(vec![0.0; 3], 1.0, 1.0).unwrap();
        assert_eq!(pde_residual_check(&z, &pts, 1e-3), 0.0);
    }

    #[test]
    fn ricker_examples() {
        let w = RickerWavelet::new(20.0, 0.1).unwrap();
        assert_eq!(ricker(&w, 0.1), 1.0);
        let zero = 0.1 + 1.0 / (PI * 20.0 * 2f64.sqrt());
        assert!(ricker(&w, zero).abs() < 1e-15);
        let w0 = RickerWavelet::new(20.0, 0.0).unwrap();
        let expected = (1.0 - 2.0 * PI * PI * 400.0 * 0.0025) * (-PI * PI * 400.0 * 0.0025f64).exp();
        assert!((ricker(&w0, 0.05) - expected).abs() < 1e-15);
        assert!((ricker(&w0, 0.05) + 9.6925e-4).abs() < 5e-8);
        assert!(RickerWavelet::new(0.0, 0.0).is_err());
    }

    #[test]
    fn dataset_layout() {
        let disc = Discretization::new(1.0, 16, 20, 0.1, 5.0).unwrap();
        let ds = generate_dataset(7, 5, 12, &disc).unwrap();
        assert_eq!(ds.indices(Split::Train).len(), 8);
        assert_eq!(ds.indices(Split::Validation).len(), 2);
        assert_eq!(ds.indices(Split::Test).len(), 2);
        for k in 0..12 {
            assert_eq!(ds.sample_label_pairs(k).len(), disc.steps - 1);
            assert_eq!(ds.training_samples(k).len(), disc.steps - 3);
            assert!(ds.trajectories[k].fields[0].boundary_is_zero());
            assert!(ds.polynomials[k].amplitudes.iter().all(|a| a.abs() <= 1.0));
        }
        let again = generate_dataset(7, 5, 12, &disc).unwrap();
        assert_eq!(ds, again);
        assert_ne!(ds.polynomials, generate_dataset(8, 5, 12, &disc).unwrap().polynomials);
        assert_eq!(split_sizes(6), (4, 1, 1));
        assert!(generate_dataset(7, 5, 2, &disc).is_err());
        assert!(generate_dataset(7, 0, 5, &disc).is_err());
    }

    #[test]
    fn dataset_memory_guard() {
        let disc = Discretization::new(1.0, 4000, 400, 0.1, 5.0).unwrap();
        assert!(matches!(
            generate_dataset(1, 80, 12, &disc),
            Err(Error::MemoryGuard { .. })
        ));
    }
}
