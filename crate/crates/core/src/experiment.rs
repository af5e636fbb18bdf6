//! Experiment definitions and runners behind the command-line tool.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{InitialCondition, RickerWavelet, TrigPolynomial};
use crate::error::{Error, Result};
use crate::grid::{Discretization, Field};
use crate::io::{fmt_sci, write_receiver_csv, write_snapshot_csv, write_text};
use crate::metrics::{convergence_rate, per_step_csv, report_csv, ErrorAccumulator, ErrorReport};
use crate::simulator::{reference_solution, PointSource, Scheme, Simulator};
use crate::stencil::{load_stencil, Order};

pub const STANDARD_LADDER: [[usize; 2]; 5] = [[10, 25], [20, 100], [40, 400], [80, 1600], [160, 6400]];

fn default_amplitude() -> f64 {
    1.0
}

fn default_refine() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialSpec {
    /// `Σ a_n sin(nπx/L) sin(nπy/L)` released from rest.
    Trig { amplitudes: Vec<f64> },
    /// `sin(mπx/L) sin(mπy/L)` released from rest.
    SingleMode { m: usize },
    /// Quiescent medium driven by a Ricker point source.
    Ricker {
        sigma: f64,
        #[serde(default)]
        t0: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        /// Source node; the grid centre when absent.
        #[serde(default)]
        source: Option<[usize; 2]>,
        /// Receiver position in physical units.
        receiver: [f64; 2],
        /// Finest refinement factor of the reference solution.
        #[serde(default = "default_refine")]
        refine: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub initial: InitialSpec,
    pub length: f64,
    pub t_final: f64,
    pub speed: f64,
    /// `(Nx, Nt)` rungs from coarse to fine.
    pub ladder: Vec<[usize; 2]>,
    /// Built-in names (`classic2`, `classic4`, `ai2`, `ai4`) or stencil files.
    pub roster: Vec<String>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Single low mode on the unit square.
    pub fn low_wavenumber() -> Self {
        ExperimentSpec {
            name: "low-wavenumber".into(),
            initial: InitialSpec::SingleMode { m: 1 },
            length: 1.0,
            t_final: 0.08,
            speed: 1.0,
            ladder: STANDARD_LADDER.to_vec(),
            roster: vec!["classic2".into(), "classic4".into(), "ai2".into(), "ai4".into()],
            out: None,
        }
    }

    /// Mode 20 on the unit square, otherwise as [`Self::low_wavenumber`].
    pub fn high_wavenumber() -> Self {
        ExperimentSpec {
            name: "high-wavenumber".into(),
            initial: InitialSpec::SingleMode { m: 20 },
            ..Self::low_wavenumber()
        }
    }

    /// 20 Hz Ricker source in a 2 km square at 1500 m/s.
    pub fn ricker_source() -> Self {
        ExperimentSpec {
            name: "ricker".into(),
            initial: InitialSpec::Ricker {
                sigma: 20.0,
                t0: 0.0,
                amplitude: 1.0,
                source: None,
                receiver: [200.0, 500.0],
                refine: 8,
            },
            length: 2000.0,
            t_final: 0.5,
            speed: 1500.0,
            ladder: vec![[240, 500]],
            roster: vec!["classic2".into(), "classic4".into(), "ai2".into(), "ai4".into()],
            out: None,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "low-wavenumber" | "exp1" => Ok(Self::low_wavenumber()),
            "high-wavenumber" | "exp2" => Ok(Self::high_wavenumber()),
            "ricker" | "exp3" => Ok(Self::ricker_source()),
            other => Err(Error::InvalidArgument(format!("unknown preset {other:?}"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(Error::Config("ladder must not be empty".into()));
        }
        if self.roster.is_empty() {
            return Err(Error::Config("roster must not be empty".into()));
        }
        for rung in &self.ladder {
            self.discretization(*rung)?;
        }
        match &self.initial {
            InitialSpec::SingleMode { m } if *m == 0 => {
                Err(Error::Config("mode number must be positive".into()))
            }
            InitialSpec::Trig { amplitudes } if amplitudes.is_empty() => {
                Err(Error::Config("need at least one amplitude".into()))
            }
            InitialSpec::Ricker { sigma, refine, .. } if !(*sigma > 0.0) || *refine == 0 => {
                Err(Error::Config("ricker needs sigma > 0 and refine ≥ 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn discretization(&self, [nx, nt]: [usize; 2]) -> Result<Discretization> {
        Discretization::new(self.length, nx, nt, self.t_final, self.speed)
    }

    /// The closed-form solution, for the trigonometric initial conditions.
    pub fn polynomial(&self) -> Result<Option<TrigPolynomial>> {
        Ok(match &self.initial {
            InitialSpec::Trig { amplitudes } => Some(TrigPolynomial::new(
                amplitudes.clone(),
                self.length,
                self.speed,
            )?),
            InitialSpec::SingleMode { m } => {
                Some(TrigPolynomial::single_mode(*m, self.length, self.speed)?)
            }
            InitialSpec::Ricker { .. } => None,
        })
    }

    pub fn schemes(&self, order: Option<Order>) -> Result<Vec<Scheme>> {
        self.roster.iter().map(|r| resolve_scheme(r, order)).collect()
    }
}

/// A built-in scheme by name, or a stencil file. `order` overrides the
/// near-boundary closure order of file stencils.
pub fn resolve_scheme(entry: &str, order: Option<Order>) -> Result<Scheme> {
    let scheme = match entry.to_ascii_lowercase().as_str() {
        "classic2" => Scheme::classic2(),
        "classic4" => Scheme::classic4(),
        "ai2" | "k2" => Scheme::published_k2(),
        "ai4" | "k4" => Scheme::published_k4(),
        _ => {
            let path = Path::new(entry);
            let stencil = load_stencil(path)?;
            let name = path
                .file_stem()
                .map_or(entry.to_string(), |s| s.to_string_lossy().into_owned());
            match order {
                Some(o) => Scheme::with_order(name, stencil, o),
                None => Scheme::new(name, stencil),
            }
        }
    };
    Ok(scheme)
}

/// One run's outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Done(ErrorReport),
    Unstable { step: usize },
}

impl Cell {
    pub fn l2(&self) -> Option<f64> {
        match self {
            Cell::Done(r) => Some(r.l2),
            Cell::Unstable { .. } => None,
        }
    }
}

/// Run one scheme on one discretization from the exact start and measure
/// its error against the closed form at every level.
pub fn trig_error(scheme: &Scheme, disc: &Discretization, p: &TrigPolynomial) -> Result<Cell> {
    let sim = Simulator::new(scheme.clone(), *disc)?;
    let init = InitialCondition::Trig(p.clone()).initial_data(disc, true);
    let sampler = p.sampler(disc);
    let mut exact = disc.zeros();
    let mut acc = ErrorAccumulator::new(disc);
    let mut failure = None;
    let run = sim.run_observed(&init, None, |n, f| {
        if n == 0 || failure.is_some() {
            return;
        }
        sampler.sample_into(disc.time(n), &mut exact);
        if let Err(e) = acc.push(n, f, &exact) {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    match run {
        Ok(_) => Ok(Cell::Done(ErrorReport {
            scheme: scheme.name.clone(),
            nx: disc.nodes,
            nt: disc.steps,
            l2: acc.l2(),
            rate: None,
            per_step: acc.into_per_step(),
        })),
        Err(Error::Unstable { step, .. }) => Ok(Cell::Unstable { step }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub name: String,
    pub schemes: Vec<String>,
    pub ladder: Vec<[usize; 2]>,
    pub discs: Vec<Discretization>,
    /// `cells[scheme][rung]`
    pub cells: Vec<Vec<Cell>>,
}

/// `L / Nx`: the spacing used for table rates, so that doubling `Nx` reads
/// as halving `h`.
pub fn nominal_spacing(d: &Discretization) -> f64 {
    d.length / d.nodes as f64
}

/// Every roster scheme on every rung, run as independent parallel jobs.
pub fn run_trig_experiment(spec: &ExperimentSpec, schemes: &[Scheme]) -> Result<ExperimentTable> {
    spec.validate()?;
    let p = spec
        .polynomial()?
        .ok_or_else(|| Error::Config("not a trigonometric experiment".into()))?;
    let discs = spec
        .ladder
        .iter()
        .map(|r| spec.discretization(*r))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..schemes.len())
        .flat_map(|s| (0..discs.len()).map(move |r| (s, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(s, r)| trig_error(&schemes[s], &discs[r], &p))
        .collect::<Result<Vec<Cell>>>()?;
    let mut cells: Vec<Vec<Cell>> = results.chunks(discs.len()).map(|c| c.to_vec()).collect();
    for row in &mut cells {
        for r in 1..row.len() {
            let coarse = row[r - 1].l2();
            if let (Some(e1), Cell::Done(rep)) = (coarse, &mut row[r]) {
                rep.rate = convergence_rate(
                    e1,
                    nominal_spacing(&discs[r - 1]),
                    rep.l2,
                    nominal_spacing(&discs[r]),
                )
                .ok();
            }
        }
    }
    Ok(ExperimentTable {
        name: spec.name.clone(),
        schemes: schemes.iter().map(|s| s.name.clone()).collect(),
        ladder: spec.ladder.clone(),
        discs,
        cells,
    })
}

impl ExperimentTable {
    pub fn cell(&self, scheme: &str, rung: usize) -> Option<&Cell> {
        let s = self.schemes.iter().position(|n| n == scheme)?;
        self.cells[s].get(rung)
    }

    fn table(&self, value: impl Fn(&Cell, usize) -> String) -> String {
        let mut out = String::from("Nx,Nt");
        for s in &self.schemes {
            out.push(',');
            out.push_str(s);
        }
        out.push('\n');
        for (r, [nx, nt]) in self.ladder.iter().enumerate() {
            let _ = write!(out, "{nx},{nt}");
            for row in &self.cells {
                out.push(',');
                out.push_str(&value(&row[r], r));
            }
            out.push('\n');
        }
        out
    }

    /// L² errors, rungs as rows and schemes as columns.
    pub fn error_table(&self) -> String {
        self.table(|c, _| match c {
            Cell::Done(r) => fmt_sci(r.l2),
            Cell::Unstable { .. } => "unstable".into(),
        })
    }

    /// Rates against the previous rung; `N/A` on the first rung or next to
    /// an unstable run.
    pub fn rate_table(&self) -> String {
        self.table(|c, _| match c {
            Cell::Done(ErrorReport { rate: Some(v), .. }) => format!("{v:.5}"),
            Cell::Done(_) => "N/A".into(),
            Cell::Unstable { .. } => "unstable".into(),
        })
    }

    pub fn reports(&self) -> Vec<ErrorReport> {
        self.cells
            .iter()
            .flatten()
            .filter_map(|c| match c {
                Cell::Done(r) => Some(r.clone()),
                Cell::Unstable { .. } => None,
            })
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(dir.join("errors.csv"), &self.error_table())?;
        write_text(dir.join("rates.csv"), &self.rate_table())?;
        write_text(dir.join("report.csv"), &report_csv(&self.reports()))?;
        for (s, row) in self.cells.iter().enumerate() {
            for (r, cell) in row.iter().enumerate() {
                if let Cell::Done(rep) = cell {
                    let name = format!("error_over_time_{}_{}.csv", self.schemes[s], rep.nx);
                    write_text(dir.join(name), &per_step_csv(&rep.per_step, &self.discs[r]))?;
                }
            }
        }
        Ok(())
    }
}

/// Ricker setup resolved onto a concrete grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RickerSetup {
    pub disc: Discretization,
    pub source: PointSource,
    pub receiver: (usize, usize),
    pub refine: usize,
}

impl RickerSetup {
    pub fn from_spec(spec: &ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        let InitialSpec::Ricker {
            sigma,
            t0,
            amplitude,
            source,
            receiver,
            refine,
        } = &spec.initial
        else {
            return Err(Error::Config("not a point-source experiment".into()));
        };
        let disc = spec.discretization(spec.ladder[0])?;
        let n = disc.nodes;
        let [si, sj] = source.unwrap_or([(n - 1) / 2, (n - 1) / 2]);
        let mut src = PointSource::ricker(si, sj, RickerWavelet::new(*sigma, *t0)?);
        src.amplitude = *amplitude;
        let node = |x: f64| (x / disc.h()).round();
        let (ri, rj) = (node(receiver[0]), node(receiver[1]));
        if !(ri >= 1.0 && rj >= 1.0 && ri < (n - 1) as f64 && rj < (n - 1) as f64) {
            return Err(Error::Config(format!(
                "receiver ({}, {}) is not inside the grid",
                receiver[0], receiver[1]
            )));
        }
        if si == 0 || sj == 0 || si >= n - 1 || sj >= n - 1 {
            return Err(Error::Config(format!("source ({si}, {sj}) is not interior")));
        }
        Ok(RickerSetup {
            disc,
            source: src,
            receiver: (ri as usize, rj as usize),
            refine: *refine,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RickerRun {
    Done {
        /// L² grid norm of the difference to the reference.
        deviation: f64,
        receiver: Vec<(f64, f64)>,
        final_field: Field,
    },
    Unstable {
        step: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RickerOutcome {
    pub setup: RickerSetup,
    pub schemes: Vec<String>,
    pub runs: Vec<RickerRun>,
    pub reference_receiver: Vec<(f64, f64)>,
    pub reference_final: Field,
    /// `(r_coarse, r_fine, ‖ref_coarse - ref_fine‖)` for consecutive
    /// refinement factors.
    pub self_convergence: Vec<(usize, usize, f64)>,
}

fn reference_levels(setup: &RickerSetup, refine: usize) -> Result<Vec<Field>> {
    let mut levels = Vec::with_capacity(setup.disc.steps + 1);
    reference_solution(
        &setup.disc,
        &InitialCondition::Quiescent,
        Some(&setup.source),
        refine,
        |_, f| levels.push(f.clone()),
    )?;
    Ok(levels)
}

fn level_distance(a: &[Field], b: &[Field], disc: &Discretization) -> Result<f64> {
    let mut acc = ErrorAccumulator::new(disc);
    for n in 0..=disc.steps {
        acc.push(n, &a[n], &b[n])?;
    }
    Ok(acc.l2())
}

/// Refinement factors `2, 4, ..` up to `finest`, always ending at `finest`.
pub fn refinement_ladder(finest: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut r = 2;
    while r < finest {
        out.push(r);
        r *= 2;
    }
    out.push(finest.max(1));
    out
}

pub fn run_ricker(setup: &RickerSetup, schemes: &[Scheme]) -> Result<RickerOutcome> {
    let disc = setup.disc;
    let factors = refinement_ladder(setup.refine);
    let reference = reference_levels(setup, *factors.last().expect("nonempty"))?;
    let mut self_convergence = Vec::new();
    let mut finer: Option<Vec<Field>> = None;
    for w in factors.windows(2).rev() {
        let coarser = reference_levels(setup, w[0])?;
        let fine = finer.as_deref().unwrap_or(&reference);
        self_convergence.push((w[0], w[1], level_distance(&coarser, fine, &disc)?));
        finer = Some(coarser);
    }
    drop(finer);
    self_convergence.reverse();

    let (ri, rj) = setup.receiver;
    let runs = schemes
        .par_iter()
        .map(|scheme| -> Result<RickerRun> {
            let sim = Simulator::new(scheme.clone(), disc)?;
            let mut acc = ErrorAccumulator::new(&disc);
            let mut receiver = Vec::with_capacity(disc.steps);
            let mut failure = None;
            let result = sim.run_observed(
                &InitialCondition::Quiescent.initial_data(&disc, false),
                Some(&setup.source),
                |n, f| {
                    if n > 0 {
                        receiver.push((disc.time(n), f.get(ri, rj)));
                    }
                    if let Err(e) = acc.push(n, f, &reference[n]) {
                        failure.get_or_insert(e);
                    }
                },
            );
            if let Some(e) = failure {
                return Err(e);
            }
            match result {
                Ok(state) => Ok(RickerRun::Done {
                    deviation: acc.l2(),
                    receiver,
                    final_field: state.curr,
                }),
                Err(Error::Unstable { step, .. }) => Ok(RickerRun::Unstable { step }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let reference_receiver = (1..=disc.steps)
        .map(|n| (disc.time(n), reference[n].get(ri, rj)))
        .collect();
    Ok(RickerOutcome {
        setup: setup.clone(),
        schemes: schemes.iter().map(|s| s.name.clone()).collect(),
        runs,
        reference_receiver,
        reference_final: reference[disc.steps].clone(),
        self_convergence,
    })
}

impl RickerOutcome {
    pub fn deviation(&self, scheme: &str) -> Option<f64> {
        let k = self.schemes.iter().position(|s| s == scheme)?;
        match &self.runs[k] {
            RickerRun::Done { deviation, .. } => Some(*deviation),
            RickerRun::Unstable { .. } => None,
        }
    }

    /// `scheme,deviation` rows followed by the reference self-convergence.
    pub fn report(&self) -> String {
        let mut out = String::from("scheme,deviation\n");
        for (name, run) in self.schemes.iter().zip(&self.runs) {
            let v = match run {
                RickerRun::Done { deviation, .. } => fmt_sci(*deviation),
                RickerRun::Unstable { .. } => "unstable".into(),
            };
            let _ = writeln!(out, "{name},{v}");
        }
        out.push_str("\nrefine_coarse,refine_fine,difference\n");
        for (a, b, d) in &self.self_convergence {
            let _ = writeln!(out, "{a},{b},{}", fmt_sci(*d));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(dir.join("deviation.csv"), &self.report())?;
        write_receiver_csv(dir.join("receiver_reference.csv"), &self.reference_receiver)?;
        write_snapshot_csv(dir.join("snapshot_reference.csv"), &self.reference_final)?;
        for (name, run) in self.schemes.iter().zip(&self.runs) {
            if let RickerRun::Done {
                receiver,
                final_field,
                ..
            } = run
            {
                write_receiver_csv(dir.join(format!("receiver_{name}.csv")), receiver)?;
                write_snapshot_csv(dir.join(format!("snapshot_{name}.csv")), final_field)?;
            }
        }
        Ok(())
    }
}

/// Default angles of the dispersion sweep: `0, π/8, π/4`.
pub fn default_angles() -> Vec<f64> {
    vec![0.0, PI / 8.0, PI / 4.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in ["exp1", "exp2", "exp3"] {
            ExperimentSpec::preset(name).unwrap().validate().unwrap();
        }
        assert!(ExperimentSpec::preset("nope").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let spec = ExperimentSpec::ricker_source();
        let text = toml::to_string(&spec).unwrap();
        assert_eq!(ExperimentSpec::from_toml(&text).unwrap(), spec);
        let text = r#"
            name = "custom"
            length = 1.0
            t_final = 0.08
            speed = 1.0
            ladder = [[10, 25]]
            roster = ["classic2"]
            [initial]
            kind = "single-mode"
            m = 3
        "#;
        let spec = ExperimentSpec::from_toml(text).unwrap();
        assert_eq!(spec.initial, InitialSpec::SingleMode { m: 3 });
        let empty = text.replace("ladder = [[10, 25]]", "ladder = []");
        assert!(ExperimentSpec::from_toml(&empty).is_err());
    }

    #[test]
    fn single_rung_table() {
        let mut spec = ExperimentSpec::low_wavenumber();
        spec.ladder = vec![[10, 25]];
        spec.roster = vec!["classic2".into()];
        let schemes = spec.schemes(None).unwrap();
        let t = run_trig_experiment(&spec, &schemes).unwrap();
        let rates = t.rate_table();
        assert_eq!(rates, "Nx,Nt,Classic2\n10,25,N/A\n");
        let l2 = t.cell("Classic2", 0).unwrap().l2().unwrap();
        assert!((l2 / 3.964201e-05 - 1.0).abs() < 0.05);
    }

    #[test]
    fn unstable_rung_is_recorded() {
        let mut spec = ExperimentSpec::low_wavenumber();
        spec.t_final = 8.0;
        spec.ladder = vec![[40, 400], [40, 1000]];
        spec.roster = vec!["classic2".into()];
        let t = run_trig_experiment(&spec, &spec.schemes(None).unwrap()).unwrap();
        assert!(matches!(t.cells[0][0], Cell::Unstable { .. }));
        assert!(t.error_table().contains("unstable"));
        assert!(t.rate_table().lines().nth(2).unwrap().ends_with("N/A"));
    }

    #[test]
    fn receiver_location() {
        let setup = RickerSetup::from_spec(&ExperimentSpec::ricker_source()).unwrap();
        assert_eq!(setup.receiver, (24, 60));
        assert_eq!((setup.source.i, setup.source.j), (119, 119));
    }

    #[test]
    fn refinement_factors() {
        assert_eq!(refinement_ladder(8), vec![2, 4, 8]);
        assert_eq!(refinement_ladder(2), vec![2]);
        assert_eq!(refinement_ladder(1), vec![1]);
    }

    #[test]
    fn silent_source_stays_silent() {
        let mut spec = ExperimentSpec::ricker_source();
        spec.ladder = vec![[24, 50]];
        if let InitialSpec::Ricker { amplitude, refine, receiver, .. } = &mut spec.initial {
            *amplitude = 0.0;
            *refine = 2;
            *receiver = [500.0, 500.0];
        }
        let setup = RickerSetup::from_spec(&spec).unwrap();
        let out = run_ricker(&setup, &spec.schemes(None).unwrap()).unwrap();
        for run in &out.runs {
            let RickerRun::Done { deviation, receiver, final_field } = run else {
                panic!("unstable")
            };
            assert_eq!(*deviation, 0.0);
            assert_eq!(receiver.len(), 50);
            assert!(receiver.iter().all(|(_, u)| *u == 0.0));
            assert_eq!(final_field.max_abs(), 0.0);
        }
    }
}
