use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use drpforge::analytic::{generate_dataset, Dataset, InitialCondition};
use drpforge::dispersion::{dispersion_sweep, kh_grid, stability_limit, sweep_csv};
use drpforge::experiment::{
    default_angles, resolve_scheme, run_ricker, run_trig_experiment, ExperimentSpec, InitialSpec,
    RickerSetup,
};
use drpforge::io::{fmt_sci, write_snapshot_csv, write_text, write_trajectory};
use drpforge::metrics::{l2_grid_norm, per_step_csv, error_over_time};
use drpforge::optimizer::{train, Method, TrainConfig};
use drpforge::simulator::RecordPolicy;
use drpforge::stencil::{format_stencil, Order, Stencil};
use drpforge::{Discretization, Error, Result, Simulator};

#[derive(Parser)]
#[command(name = "drpforge", version, about = "Convolution-stencil wave solvers, dispersion analysis and stencil training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the numerical-to-physical frequency ratio over kh and angle.
    Dispersion(DispersionArgs),
    /// Run one stencil on a single-mode standing wave.
    Simulate(SimulateArgs),
    /// Error and convergence-rate tables over a discretization ladder.
    Experiment(ExperimentArgs),
    /// Fit stencil free parameters to analytic trajectories.
    Train(TrainArgs),
    /// Point-source run compared against a refined reference.
    Ricker(RickerArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    #[value(name = "2")]
    Two,
    #[value(name = "4")]
    Four,
}

impl From<OrderArg> for Order {
    fn from(o: OrderArg) -> Order {
        match o {
            OrderArg::Two => Order::Second,
            OrderArg::Four => Order::Fourth,
        }
    }
}

#[derive(Args)]
struct DispersionArgs {
    /// Built-in name (classic2, classic4, ai2, ai4) or stencil file; repeatable.
    #[arg(long, default_values = ["classic2", "classic4", "ai2", "ai4"])]
    stencil: Vec<String>,
    #[arg(long, value_enum)]
    order: Option<OrderArg>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Explicit kh values in (0, π], comma separated.
    #[arg(long, value_delimiter = ',')]
    kh: Option<Vec<f64>>,
    /// Number of uniformly spaced kh values when --kh is absent.
    #[arg(long, default_value_t = 512)]
    kh_count: usize,
    /// Propagation angles in radians, comma separated.
    #[arg(long, value_delimiter = ',')]
    angles: Option<Vec<f64>>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "classic2")]
    stencil: String,
    #[arg(long, value_enum)]
    order: Option<OrderArg>,
    /// Experiment config supplying the initial condition and physical setup.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    /// Target CFL number; sets Nt from Nx.
    #[arg(long)]
    alpha: Option<f64>,
    /// Final time; overrides the config.
    #[arg(long)]
    t_final: Option<f64>,
    /// Mode number of the standing wave when no config is given.
    #[arg(long, default_value_t = 1)]
    mode: usize,
    /// Record every k-th level in the trajectory file.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// exp1 (low wavenumber), exp2 (high wavenumber) or exp3 (point source).
    #[arg(long, default_value = "exp1")]
    preset: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the roster; repeatable.
    #[arg(long)]
    stencil: Vec<String>,
    #[arg(long, value_enum)]
    order: Option<OrderArg>,
    /// With --nt, replaces the ladder by a single rung.
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Bfgs,
    Gd,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "4")]
    order: OrderArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Load a saved dataset instead of generating one.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Save the generated dataset here.
    #[arg(long)]
    save_dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    nx: usize,
    #[arg(long, default_value_t = 200)]
    nt: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 40)]
    degree: usize,
    #[arg(long, default_value_t = 6)]
    trajectories: usize,
    #[arg(long, default_value_t = 1.0)]
    length: f64,
    #[arg(long, default_value_t = 0.1)]
    t_final: f64,
    #[arg(long, default_value_t = 5.0)]
    speed: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1 << 20)]
    batch: usize,
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,
    #[arg(long, value_enum, default_value = "bfgs")]
    method: MethodArg,
    #[arg(long, default_value = "train_out")]
    out: PathBuf,
}

#[derive(Args)]
struct RickerArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    stencil: Vec<String>,
    #[arg(long, value_enum)]
    order: Option<OrderArg>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    /// Finest reference refinement factor.
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn steps_for_alpha(alpha: f64, nx: usize, length: f64, t_final: f64, speed: f64) -> Result<usize> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    let h = length / (nx - 1) as f64;
    Ok((speed * t_final / (alpha * h)).ceil() as usize)
}

fn apply_grid_overrides(
    spec: &mut ExperimentSpec,
    nx: Option<usize>,
    nt: Option<usize>,
    alpha: Option<f64>,
) -> Result<()> {
    if nx.is_none() && nt.is_none() && alpha.is_none() {
        return Ok(());
    }
    let [nx0, nt0] = spec.ladder[0];
    let nx = nx.unwrap_or(nx0);
    let nt = match (nt, alpha) {
        (Some(nt), _) => nt,
        (None, Some(a)) => steps_for_alpha(a, nx, spec.length, spec.t_final, spec.speed)?,
        (None, None) => nt0,
    };
    spec.ladder = vec![[nx, nt]];
    Ok(())
}

fn load_spec(config: Option<&Path>, preset: &str) -> Result<ExperimentSpec> {
    match config {
        Some(p) => ExperimentSpec::load(p),
        None => ExperimentSpec::preset(preset),
    }
}

fn cmd_dispersion(a: DispersionArgs) -> Result<()> {
    let khs = match a.kh {
        Some(v) => v,
        None => kh_grid(a.kh_count),
    };
    if khs.is_empty() {
        return Err(Error::InvalidArgument("kh list is empty".into()));
    }
    let angles = a.angles.unwrap_or_else(default_angles);
    if angles.is_empty() {
        return Err(Error::InvalidArgument("angle list is empty".into()));
    }
    let order = a.order.map(Order::from);
    let mut blocks = Vec::new();
    for entry in &a.stencil {
        let scheme = resolve_scheme(entry, order)?;
        match stability_limit(&scheme.stencil, 64, 2048) {
            Ok(lim) => eprintln!("{}: stability limit alpha = {lim:.6}", scheme.name),
            Err(e) => eprintln!("{}: {e}", scheme.name),
        }
        blocks.push((scheme.name.clone(), dispersion_sweep(&scheme.stencil, &khs, &angles, a.alpha)?));
    }
    let csv = sweep_csv(&blocks);
    match a.out {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(p) => ExperimentSpec::load(p)?,
        None => ExperimentSpec {
            initial: InitialSpec::SingleMode { m: a.mode },
            ladder: vec![[40, 400]],
            ..ExperimentSpec::low_wavenumber()
        },
    };
    if let Some(t) = a.t_final {
        spec.t_final = t;
    }
    apply_grid_overrides(&mut spec, a.nx, a.nt, a.alpha)?;
    let disc = spec.discretization(spec.ladder[0])?;
    let p = spec
        .polynomial()?
        .ok_or_else(|| Error::InvalidArgument("simulate needs a trigonometric initial condition; use `ricker`".into()))?;
    let scheme = resolve_scheme(&a.stencil, a.order.map(Order::from))?;
    let sim = Simulator::new(scheme.clone(), disc)?;
    let init = InitialCondition::Trig(p.clone()).initial_data(&disc, true);
    let traj = sim.run(&init, None, RecordPolicy::All)?;
    let sampler = p.sampler(&disc);
    let exact: Vec<_> = (0..=disc.steps).map(|n| sampler.sample(disc.time(n))).collect();
    let l2 = l2_grid_norm(&traj.fields, &exact, &disc)?;
    println!(
        "{} Nx={} Nt={} alpha={:.6} l2={}",
        scheme.name,
        disc.nodes,
        disc.steps,
        disc.alpha(),
        fmt_sci(l2)
    );
    if let Some(dir) = a.out {
        let per_step = error_over_time(&traj.fields, &exact, &disc)?;
        write_text(dir.join("error_over_time.csv"), &per_step_csv(&per_step, &disc))?;
        write_snapshot_csv(dir.join("snapshot_final.csv"), &traj.fields[disc.steps])?;
        let stride = a.stride.max(1);
        let strided = drpforge::simulator::Trajectory {
            stride,
            steps: traj.steps,
            fields: traj.fields.into_iter().step_by(stride).collect(),
        };
        write_trajectory(dir.join("trajectory.txt"), &strided)?;
    }
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut spec = load_spec(a.config.as_deref(), &a.preset)?;
    if !a.stencil.is_empty() {
        spec.roster = a.stencil.clone();
    }
    apply_grid_overrides(&mut spec, a.nx, a.nt, a.alpha)?;
    if a.out.is_some() {
        spec.out = a.out.clone();
    }
    spec.validate()?;
    let schemes = spec.schemes(a.order.map(Order::from))?;
    if matches!(spec.initial, InitialSpec::Ricker { .. }) {
        return ricker_report(&spec, &schemes);
    }
    let table = run_trig_experiment(&spec, &schemes)?;
    println!("# {} L2 errors", spec.name);
    print!("{}", table.error_table());
    println!("# {} convergence rates", spec.name);
    print!("{}", table.rate_table());
    if let Some(dir) = &spec.out {
        table.write(dir)?;
    }
    Ok(())
}

fn ricker_report(spec: &ExperimentSpec, schemes: &[drpforge::Scheme]) -> Result<()> {
    let setup = RickerSetup::from_spec(spec)?;
    let outcome = run_ricker(&setup, schemes)?;
    print!("{}", outcome.report());
    if let Some(dir) = &spec.out {
        outcome.write(dir)?;
    }
    Ok(())
}

fn cmd_ricker(a: RickerArgs) -> Result<()> {
    let mut spec = load_spec(a.config.as_deref(), "exp3")?;
    if !a.stencil.is_empty() {
        spec.roster = a.stencil.clone();
    }
    apply_grid_overrides(&mut spec, a.nx, a.nt, None)?;
    if let (Some(r), InitialSpec::Ricker { refine, .. }) = (a.refine, &mut spec.initial) {
        *refine = r;
    }
    if a.out.is_some() {
        spec.out = a.out.clone();
    }
    spec.validate()?;
    let schemes = spec.schemes(a.order.map(Order::from))?;
    ricker_report(&spec, &schemes)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let ds = match &a.dataset {
        Some(dir) => Dataset::load(dir)?,
        None => {
            let nt = match a.alpha {
                Some(al) => steps_for_alpha(al, a.nx, a.length, a.t_final, a.speed)?,
                None => a.nt,
            };
            let disc = Discretization::new(a.length, a.nx, nt, a.t_final, a.speed)?;
            generate_dataset(a.seed, a.degree, a.trajectories, &disc)?
        }
    };
    if let Some(dir) = &a.save_dataset {
        ds.save(dir)?;
    }
    let order = Order::from(a.order);
    let cfg = TrainConfig {
        learning_rate: a.learning_rate,
        max_epochs: a.epochs,
        batch: a.batch,
        tolerance: a.tolerance,
        seed: a.seed,
        method: match a.method {
            MethodArg::Bfgs => Method::Bfgs,
            MethodArg::Gd => Method::GradientDescent,
        },
        ..TrainConfig::new(order)
    };
    let out = train(&ds, &cfg)?;
    let stencil = Stencil::build_symmetric(&out.weights);
    write_text(a.out.join("stencil.txt"), &format_stencil(&stencil))?;
    write_text(a.out.join("train_log.csv"), &out.log.to_csv())?;
    let last = out.log.records.last().expect("initial record");
    println!(
        "order {order}: {} epochs, alpha={:.6}, val_loss={:.6e}, params={:?}",
        last.epoch,
        out.log.alpha,
        last.val_loss,
        out.params.theta()
    );
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Unstable { .. } | Error::Diverged { .. } | Error::NonFinite(_) => 3,
        Error::Io { .. } | Error::StencilFormat(_) | Error::TrajectoryFormat(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dispersion(a) => cmd_dispersion(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Train(a) => cmd_train(a),
        Command::Ricker(a) => cmd_ricker(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
