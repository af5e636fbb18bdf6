//! Numerical dispersion of the explicit convolution scheme.
//!
//! A plane wave `exp(-I(k_x x + k_y y - ω̃ t))` with `(k_x, k_y) = (k sinθ,
//! k cosθ)` satisfies the scheme iff
//!
//! ```text
//! α² S + 4 sin²(ω̃Δt/2) = 0,   S = Σ_ij E_ij K_ij,
//! E_ij = cos((i-2) h k_x + (j-2) h k_y)
//! ```
//!
//! so `ω̃/ω = 2/(c k Δt) · asin(sqrt(-α² S / 4))`, defined while the argument
//! stays in `[0, 1]`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stencil::Stencil;

/// Negative radicands down to this are rounding noise and read as zero.
const RADICAND_FLOOR: f64 = -1e-12;

/// `max(-S)` at or below this means the stencil supports no waves.
const SYMBOL_FLOOR: f64 = 1e-12;

pub const DEFAULT_ANGLES: [f64; 3] = [0.0, PI / 8.0, PI / 4.0];
pub const DEFAULT_KH_SAMPLES: usize = 2048;
pub const DEFAULT_ANGLE_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveVector {
    pub k: f64,
    pub theta: f64,
}

impl WaveVector {
    pub fn new(k: f64, theta: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 0.0 && theta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "wavenumber must be finite and non-negative, got {k}"
            )));
        }
        Ok(WaveVector { k, theta })
    }

    pub fn kx(&self) -> f64 {
        self.k * self.theta.sin()
    }

    pub fn ky(&self) -> f64 {
        self.k * self.theta.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSample {
    pub kh: f64,
    pub theta: f64,
    /// `ω̃/ω`; NaN when the sample is unstable.
    pub ratio: f64,
    pub stable: bool,
}

pub fn cosine_matrix(wv: &WaveVector, h: f64) -> [[f64; 5]; 5] {
    let (px, py) = (h * wv.kx(), h * wv.ky());
    let mut e = [[0.0; 5]; 5];
    for (i, row) in e.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = ((i as f64 - 2.0) * px + (j as f64 - 2.0) * py).cos();
        }
    }
    e
}

/// `S = Σ E_ij K_ij` at phase steps `(h k_x, h k_y)`.
///
/// Evaluated as `Σ K - 2 Σ K sin²(φ/2)` so small wavenumbers do not lose
/// their `O((kh)²)` value to cancellation; a stencil sum below rounding
/// level is taken as exactly zero.
pub fn symbol(s: &Stencil, phase_x: f64, phase_y: f64) -> f64 {
    let mut total = 0.0;
    let mut scale = 0.0;
    let mut curv = 0.0;
    for (a, b, w) in s.taps() {
        total += w;
        scale += w.abs();
        let half = 0.5 * (a as f64 * phase_x + b as f64 * phase_y);
        let sn = half.sin();
        curv += w * sn * sn;
    }
    let total = if total.abs() <= 64.0 * f64::EPSILON * scale {
        0.0
    } else {
        total
    };
    total - 2.0 * curv
}

fn ratio_from_symbol(sym: f64, alpha: f64, kh: f64) -> (f64, bool) {
    let mut radicand = -alpha * alpha * sym / 4.0;
    if (RADICAND_FLOOR..0.0).contains(&radicand) {
        radicand = 0.0;
    }
    let arg = radicand.sqrt();
    if arg > 0.0 && arg <= 1.0 {
        // c k Δt = α kh
        (2.0 / (alpha * kh) * arg.asin(), true)
    } else {
        (f64::NAN, false)
    }
}

/// Numerical-to-physical frequency ratio for one wave vector.
pub fn frequency_ratio(
    s: &Stencil,
    wv: &WaveVector,
    h: f64,
    dt: f64,
    c: f64,
) -> Result<DispersionSample> {
    if !(h > 0.0 && dt > 0.0 && c > 0.0) {
        return Err(Error::InvalidArgument("h, dt and c must be positive".into()));
    }
    if wv.k == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    let alpha = c * dt / h;
    let kh = wv.k * h;
    let sym = symbol(s, h * wv.kx(), h * wv.ky());
    let (ratio, stable) = ratio_from_symbol(sym, alpha, kh);
    Ok(DispersionSample {
        kh,
        theta: wv.theta,
        ratio,
        stable,
    })
}

/// Ratio at a dimensionless `kh` and CFL number `alpha`.
pub fn ratio_at(s: &Stencil, kh: f64, theta: f64, alpha: f64) -> Result<DispersionSample> {
    let wv = WaveVector::new(kh, theta)?;
    frequency_ratio(s, &wv, 1.0, alpha, 1.0)
}

/// The `α → 0` limit of the ratio, `sqrt(-S) / kh`: the spatial part of the
/// dispersion error with the time-stepping error removed.
pub fn semi_discrete_ratio(s: &Stencil, kh: f64, theta: f64) -> f64 {
    let sym = symbol(s, kh * theta.sin(), kh * theta.cos());
    (-sym).max(0.0).sqrt() / kh
}

/// Largest stable CFL number `2 / sqrt(max(-S))` over a sampled grid of
/// wave vectors: `angle_samples` angles uniform in `[0, π)` and `kh_samples`
/// values uniform in `(0, √2 π]`, which covers the whole Brillouin zone.
pub fn stability_limit(s: &Stencil, angle_samples: usize, kh_samples: usize) -> Result<f64> {
    if angle_samples == 0 || kh_samples == 0 {
        return Err(Error::InvalidArgument("sampling grids must be nonempty".into()));
    }
    let kh_max = 2f64.sqrt() * PI;
    let worst = (0..angle_samples)
        .into_par_iter()
        .map(|a| {
            let theta = PI * a as f64 / angle_samples as f64;
            let (st, ct) = theta.sin_cos();
            (1..=kh_samples)
                .map(|m| {
                    let kh = kh_max * m as f64 / kh_samples as f64;
                    -symbol(s, kh * st, kh * ct)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if worst <= SYMBOL_FLOOR {
        return Err(Error::DegenerateStencil);
    }
    Ok(2.0 / worst.sqrt())
}

/// One sample per `(kh, θ)` pair, `kh`-major.
pub fn dispersion_sweep(
    s: &Stencil,
    khs: &[f64],
    angles: &[f64],
    alpha: f64,
) -> Result<Vec<DispersionSample>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    if let Some(bad) = khs.iter().find(|&&kh| !(kh > 0.0 && kh <= PI)) {
        return Err(Error::InvalidArgument(format!("kh {bad} outside (0, π]")));
    }
    let pairs: Vec<(f64, f64)> = khs
        .iter()
        .flat_map(|&kh| angles.iter().map(move |&t| (kh, t)))
        .collect();
    pairs
        .par_iter()
        .map(|&(kh, theta)| ratio_at(s, kh, theta, alpha))
        .collect()
}

/// Uniform `kh` grid on `(0, π]`.
pub fn kh_grid(count: usize) -> Vec<f64> {
    (1..=count).map(|m| PI * m as f64 / count as f64).collect()
}

/// Largest `kh` in `(0, π]` below which `|ratio - 1| ≤ tol` holds without
/// interruption (sampled with `samples` points).
pub fn accurate_band(s: &Stencil, alpha: f64, theta: f64, tol: f64, samples: usize) -> f64 {
    let mut band = 0.0;
    for kh in kh_grid(samples) {
        match ratio_at(s, kh, theta, alpha) {
            Ok(d) if d.stable && (d.ratio - 1.0).abs() <= tol => band = kh,
            _ => break,
        }
    }
    band
}

/// Least-squares slope of `log|ratio - 1|` against `log kh` for the
/// semi-discrete ratio.
pub fn small_kh_slope(s: &Stencil, theta: f64, kh_lo: f64, kh_hi: f64, points: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (0..points)
        .map(|m| {
            let t = m as f64 / (points - 1) as f64;
            let kh = (kh_lo.ln() + t * (kh_hi.ln() - kh_lo.ln())).exp();
            (kh.ln(), (semi_discrete_ratio(s, kh, theta) - 1.0).abs().ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Sweep CSV: header `kh,theta,ratio,stable`, then one block per stencil led
/// by a `# <name>` line. Unstable ratios are left empty.
pub fn sweep_csv(blocks: &[(String, Vec<DispersionSample>)]) -> String {
    let mut out = String::from("kh,theta,ratio,stable\n");
    for (name, samples) in blocks {
        let _ = writeln!(out, "# {name}");
        for d in samples {
            let ratio = if d.stable {
                format!("{:.11e}", d.ratio)
            } else {
                String::new()
            };
            let _ = writeln!(out, "{:.11e},{:.11e},{},{}", d.kh, d.theta, ratio, d.stable);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::{Stencil, SymmetricWeights};

    /// Brute-force max of `-Σ E K` from the literal cosine matrix.
    fn brute_alpha_max(s: &Stencil, n: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..=n {
            for b in 0..=n {
                let px = PI * a as f64 / n as f64;
                let py = PI * b as f64 / n as f64;
                let mut sum = 0.0;
                for i in 0..5 {
                    for j in 0..5 {
                        sum += ((i as f64 - 2.0) * px + (j as f64 - 2.0) * py).cos()
                            * s.matrix()[i][j];
                    }
                }
                worst = worst.max(-sum);
            }
        }
        2.0 / worst.sqrt()
    }

    #[test]
    fn cosine_matrix_examples() {
        let e = cosine_matrix(&WaveVector::new(0.0, 0.3).unwrap(), 0.1);
        assert!(e.iter().flatten().all(|v| *v == 1.0));
        let e = cosine_matrix(&WaveVector::new(PI, 0.0).unwrap(), 1.0);
        assert_eq!(e[2][2], 1.0);
        assert!((e[2][3] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn symbol_matches_cosine_contraction() {
        let s = Stencil::published_k4();
        for &(k, th) in &[(0.3, 0.2), (2.0, 1.1), (3.0, 0.785)] {
            let wv = WaveVector::new(k, th).unwrap();
            let e = cosine_matrix(&wv, 1.0);
            let direct: f64 = (0..5)
                .flat_map(|i| (0..5).map(move |j| (i, j)))
                .map(|(i, j)| e[i][j] * s.matrix()[i][j])
                .sum();
            assert!((direct - symbol(&s, wv.kx(), wv.ky())).abs() < 1e-13);
        }
    }

    #[test]
    fn classic2_spot_value() {
        let d = ratio_at(&Stencil::classic2(), PI / 2.0, 0.0, 0.5).unwrap();
        // S = -2, a = sqrt(0.25 * 2 / 4)
        let a = (0.125f64).sqrt();
        let expected = 2.0 / (0.5 * PI / 2.0) * a.asin();
        assert!(d.stable);
        assert!((d.ratio - expected).abs() < 1e-14);
        assert!((d.ratio - 0.920214).abs() < 1e-6, "{}", d.ratio);
    }

    #[test]
    fn continuum_limit() {
        for s in [Stencil::classic2(), Stencil::classic4(), Stencil::published_k4()] {
            let d = ratio_at(&s, 1e-4, 0.4, 0.5).unwrap();
            assert!((d.ratio - 1.0).abs() <= 1e-4);
        }
    }

    #[test]
    fn unstable_checkerboard() {
        let d = ratio_at(&Stencil::classic2(), PI, PI / 4.0, 1.0).unwrap();
        assert!(!d.stable);
        assert!(d.ratio.is_nan());
    }

    #[test]
    fn zero_wavenumber_rejected() {
        let wv = WaveVector::new(0.0, 0.0).unwrap();
        assert!(matches!(
            frequency_ratio(&Stencil::classic2(), &wv, 0.1, 0.01, 1.0),
            Err(Error::ZeroWavenumber)
        ));
        assert!(WaveVector::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn stability_limits() {
        let c2 = stability_limit(&Stencil::classic2(), 64, 2048).unwrap();
        assert!((c2 - brute_alpha_max(&Stencil::classic2(), 256)).abs() < 1e-3);
        assert!((c2 - 0.5f64.sqrt()).abs() < 1e-3);
        let c4 = stability_limit(&Stencil::classic4(), 64, 2048).unwrap();
        let brute = brute_alpha_max(&Stencil::classic4(), 256);
        assert!((c4 - brute).abs() < 2e-3, "{c4} vs {brute}");
        assert!((brute - 2.0 / (32.0f64 / 3.0).sqrt()).abs() < 1e-9);
        assert!(matches!(
            stability_limit(&Stencil::zeros(), 8, 8),
            Err(Error::DegenerateStencil)
        ));
        assert!(stability_limit(&Stencil::classic2(), 0, 8).is_err());
    }

    #[test]
    fn classic2_ratio_decreases_along_axis() {
        let khs = kh_grid(400);
        let sweep = dispersion_sweep(&Stencil::classic2(), &khs, &[0.0], 0.5).unwrap();
        assert!(sweep.windows(2).all(|w| w[1].ratio < w[0].ratio));
    }

    #[test]
    fn sweep_order_and_csv() {
        let khs = [0.5, 1.0];
        let angles = [0.0, 0.3, 0.6];
        let sweep = dispersion_sweep(&Stencil::classic4(), &khs, &angles, 0.3).unwrap();
        assert_eq!(sweep.len(), 6);
        assert_eq!((sweep[0].kh, sweep[0].theta), (0.5, 0.0));
        assert_eq!((sweep[1].kh, sweep[1].theta), (0.5, 0.3));
        assert_eq!((sweep[3].kh, sweep[3].theta), (1.0, 0.0));
        let csv = sweep_csv(&[
            ("a".into(), sweep.clone()),
            ("b".into(), sweep),
        ]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "kh,theta,ratio,stable");
        assert_eq!(lines[1], "# a");
        assert_eq!(lines[8], "# b");
        assert_eq!(lines.len(), 15);
        assert!(dispersion_sweep(&Stencil::classic4(), &[0.0], &angles, 0.3).is_err());
    }

    #[test]
    fn published_k4_band_beats_classic4() {
        let alpha = 5.0 * 2.5e-4 * 127.0;
        let k4 = accurate_band(&Stencil::published_k4(), alpha, PI / 4.0, 0.01, 4096);
        let c4 = accurate_band(&Stencil::classic4(), alpha, PI / 4.0, 0.01, 4096);
        assert!(k4 > c4, "{k4} vs {c4}");
    }

    #[test]
    fn degenerate_symbol_guard() {
        let w = SymmetricWeights([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(stability_limit(&Stencil::build_symmetric(&w), 4, 4).is_err());
    }
}
