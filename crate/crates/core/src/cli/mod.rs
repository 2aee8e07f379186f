//! The `bsct` command line: argument definitions, the run configuration and
//! the command implementations.

mod config;

pub use config::{MdSettings, RunConfig, ScanSettings};

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chem::xyz;
use crate::dynamics::{self, MdState, RelaxSettings, RunSettings, StabilityConfig};
use crate::metrics::{self, CurveFile, FsdReport, MetricsError, PesKind, SplitPoint};
use crate::potential::{checkpoint, ForceField, Potential, ReferencePotential};
use crate::scanner::{self, BondType, SampleConfig};
use crate::trainer;

/// Usage errors exit with 2, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failed(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "bsct", version, about = "Bond-scan smoothness benchmarking for interatomic potentials")]
pub struct Cli {
    /// Worker threads (also BSCT_JOBS).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Omit the generation time from JSON outputs.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Configuration file with dotted keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set potential.k=12`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or evaluate bond scans.
    #[command(subcommand)]
    Scan(ScanCommand),
    /// Force smoothness deviation between model and reference curves.
    Fsd(FsdArgs),
    /// Train a potential on reference-labelled perturbations of molecules.
    Train(TrainArgs),
    /// Molecular dynamics with a checkpoint or the reference potential.
    Md(MdArgs),
    /// Join FSD and MD outputs into one table.
    Report(ReportArgs),
    /// Print the effective configuration.
    Config,
}

#[derive(Debug, Subcommand)]
pub enum ScanCommand {
    Generate(GenerateArgs),
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Directory of .xyz structures.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated element pairs, e.g. C-C,C-O.
    #[arg(long, value_delimiter = ',')]
    pub bond_types: Vec<String>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scans: PathBuf,
    /// A checkpoint path, or `reference`.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FsdArgs {
    /// Model curves (JSON).
    #[arg(long, required_unless_present = "demo")]
    pub model: Option<PathBuf>,
    /// Reference curves (JSON).
    #[arg(long = "ref", required_unless_present = "demo")]
    pub reference: Option<PathBuf>,
    #[arg(long, required_unless_present = "demo")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Label used by `report`; defaults to the model curves' source.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, value_enum, default_value_t = Split::ReferenceMinimum)]
    pub split: Split,
    /// Print the synthetic-surface comparison instead.
    #[arg(long, value_name = "pes1|pes2")]
    pub demo: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Split {
    ReferenceMinimum,
    Origin,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of .xyz molecules to perturb and label.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint of the EMA parameters.
    #[arg(long)]
    pub out: PathBuf,
    /// Checkpoint of the raw parameters.
    #[arg(long)]
    pub raw_out: Option<PathBuf>,
    /// Loss history CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MdMode {
    Nve,
    Langevin,
}

#[derive(Debug, Args)]
pub struct MdArgs {
    #[arg(value_enum)]
    pub mode: MdMode,
    /// A checkpoint path, or `reference`.
    #[arg(long)]
    pub model: String,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub friction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-step series of the (first) trajectory.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON outputs of `fsd` and `md`.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("usage error: {m}");
            2
        }
        Err(CliError::Failed(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>, CliError> {
    cli.set
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{s}'")))
        })
        .collect()
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs.or_else(crate::util::jobs_from_env) {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // a second call in one process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut ov = overrides(&cli)?;
    let stamp = !cli.no_timestamp;
    let flag = |ov: &mut Vec<(String, String)>, key: &str, v: Option<String>| {
        if let Some(v) = v {
            ov.push((key.to_string(), v));
        }
    };
    match &cli.command {
        Command::Scan(ScanCommand::Generate(a)) => {
            flag(&mut ov, "scan.frames", a.frames.map(|x| x.to_string()));
            flag(&mut ov, "scan.seed", a.seed.map(|x| x.to_string()));
            let cfg = RunConfig::load(cli.config.as_deref(), &ov)?;
            scan_generate(a, &cfg)
        }
        Command::Scan(ScanCommand::Evaluate(a)) => {
            let cfg = RunConfig::load(cli.config.as_deref(), &ov)?;
            scan_evaluate(a, &cfg, stamp)
        }
        Command::Fsd(a) => fsd(a, stamp),
        Command::Train(a) => {
            flag(&mut ov, "train.epochs", a.epochs.map(|x| x.to_string()));
            flag(&mut ov, "train.seed", a.seed.map(|x| x.to_string()));
            let cfg = RunConfig::load(cli.config.as_deref(), &ov)?;
            train(a, &cfg)
        }
        Command::Md(a) => {
            flag(&mut ov, "md.steps", a.steps.map(|x| x.to_string()));
            flag(&mut ov, "md.dt", a.dt.map(|x| format!("{x:?}")));
            flag(&mut ov, "md.temperature", a.temperature.map(|x| format!("{x:?}")));
            flag(&mut ov, "md.friction", a.friction.map(|x| format!("{x:?}")));
            flag(&mut ov, "md.seed", a.seed.map(|x| x.to_string()));
            flag(&mut ov, "md.seeds", a.seeds.map(|x| x.to_string()));
            let cfg = RunConfig::load(cli.config.as_deref(), &ov)?;
            md(a, &cfg, stamp)
        }
        Command::Report(a) => report(a, stamp),
        Command::Config => {
            print!("{}", RunConfig::load(cli.config.as_deref(), &ov)?.to_flat());
            Ok(())
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

/// Pretty JSON, with the generation time added at the top level unless
/// `stamp` is false.
fn to_json<T: Serialize>(value: &T, stamp: bool) -> String {
    let mut v = serde_json::to_value(value).expect("plain data serializes");
    if let (true, Some(obj)) = (stamp, v.as_object_mut()) {
        let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
        obj.insert("generated_at_unix".into(), now.into());
    }
    serde_json::to_string_pretty(&v).expect("plain data serializes") + "\n"
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

fn scan_generate(a: &GenerateArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let s = &cfg.scan;
    let structures = xyz::load_dir(&a.input)?;
    let names = if a.bond_types.is_empty() { &s.bond_types } else { &a.bond_types };
    let bond_types: BTreeSet<BondType> = names.iter().map(|t| t.parse()).collect::<Result<_, _>>()?;
    let sample = SampleConfig {
        bond_types,
        n_frames: s.frames,
        reject_single_atom: s.reject_single_atom,
        jump_threshold: (s.jump_threshold >= 0.0).then_some(s.jump_threshold),
        max_per_type: (s.max_per_type > 0).then_some(s.max_per_type),
        seed: s.seed,
        ..SampleConfig::default()
    };
    let data = scanner::sample_scan_dataset(&structures, &sample)?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::Failed(format!("{}: {e}", a.out.display())))?;
    for (i, st) in structures.iter().enumerate() {
        let accepted: Vec<&scanner::BondScan> = data.scans.iter().filter(|sc| sc.base.tag == st.tag).collect();
        let rejected: Vec<&scanner::Rejection> = data.rejections.iter().filter(|r| r.structure == i).collect();
        if accepted.is_empty() && rejected.is_empty() {
            println!("{}: no bridge bonds of the selected types", st.tag);
        }
        for sc in accepted {
            println!("{}: accept bond {}-{} ({})", st.tag, sc.bond.0, sc.bond.1, sc.bond_type());
            for w in &sc.warnings {
                println!("{}: warning: {w}", st.tag);
            }
        }
        for r in rejected {
            println!("{}: reject bond {}-{}: {}", st.tag, r.bond.0, r.bond.1, r.reason);
        }
    }
    for sc in &data.scans {
        scanner::save_scan(sc, &a.out)?;
    }
    if data.scans.is_empty() {
        eprintln!("warning: no scans were generated");
    }
    println!("{} scans written to {}", data.scans.len(), a.out.display());
    Ok(())
}

enum Model {
    Reference,
    Learned(Potential),
}

fn load_model(spec: &str) -> Result<(Model, String), CliError> {
    if spec == "reference" {
        return Ok((Model::Reference, "reference".into()));
    }
    let path = Path::new(spec);
    let label = path.file_stem().map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
    Ok((Model::Learned(checkpoint::load(path)?), label))
}

/// Runs `f` with the force field `model` provides for structure `base`.
fn with_field<R>(
    model: &Model,
    base: &crate::chem::Structure,
    f: impl FnOnce(&dyn ForceField) -> Result<R, CliError>,
) -> Result<R, CliError> {
    match model {
        Model::Reference => f(&ReferencePotential::new(base)),
        Model::Learned(p) => f(&p.bind(base.species())?),
    }
}

fn scan_evaluate(a: &EvaluateArgs, _cfg: &RunConfig, stamp: bool) -> Result<(), CliError> {
    let (model, label) = load_model(&a.model)?;
    let scans = scanner::load_scans(&a.scans)?;
    if scans.is_empty() {
        return Err(CliError::Failed(format!("no scans found in {}", a.scans.display())));
    }
    let curves = scans
        .par_iter()
        .map(|(id, scan)| {
            with_field(&model, &scan.base, |ff| {
                metrics::scan_curve(scan, id.clone(), label.clone(), ff)
                    .map_err(|e| CliError::Failed(format!("scan {id}: {e}")))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    write(&a.out, &to_json(&CurveFile { curves }, stamp))?;
    println!("{} curves from model '{label}' written to {}", scans.len(), a.out.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FsdOutput {
    kind: String,
    model: String,
    #[serde(flatten)]
    report: FsdReport,
}

fn fsd(a: &FsdArgs, stamp: bool) -> Result<(), CliError> {
    if let Some(kind) = &a.demo {
        let kind: PesKind = kind.parse().map_err(CliError::Usage)?;
        let d = metrics::synth_demo(&scanner::linspace(-1.0, 1.0, 100))?;
        let (fsd, mae, minima) = match kind {
            PesKind::Pes1 => (d.fsd_pes1, d.force_mae_pes1, d.minima_pes1),
            PesKind::Pes2 => (d.fsd_pes2, d.force_mae_pes2, d.minima_pes2),
        };
        println!("surface        FSD (1/A)   force MAE (meV/A)   local minima");
        println!("pes1     {:>14.4} {:>19.2} {:>14}", d.fsd_pes1, d.force_mae_pes1, d.minima_pes1);
        println!("pes2     {:>14.4} {:>19.2} {:>14}", d.fsd_pes2, d.force_mae_pes2, d.minima_pes2);
        println!("selected {kind:?}: FSD {fsd:.4}, force MAE {mae:.2}, minima {minima}");
        println!("FSD ratio pes2/pes1 = {:.2}; force MAE ratio = {:.2}", d.fsd_ratio, d.force_mae_pes2 / d.force_mae_pes1);
        return Ok(());
    }
    let need = |p: &Option<PathBuf>, name: &str| p.clone().ok_or_else(|| CliError::Usage(format!("--{name} is required")));
    let model: CurveFile = read_json(&need(&a.model, "model")?)?;
    let reference: CurveFile = read_json(&need(&a.reference, "ref")?)?;
    let out = need(&a.out, "out")?;
    let split = match a.split {
        Split::ReferenceMinimum => SplitPoint::ReferenceMinimum,
        Split::Origin => SplitPoint::Origin,
    };
    let mut rows = Vec::with_capacity(reference.curves.len());
    for r in &reference.curves {
        let m = model
            .curves
            .iter()
            .find(|m| m.id == r.id)
            .ok_or_else(|| CliError::Failed(format!("scan {} is missing from the model curves", r.id)))?;
        if m.alpha_grid != r.alpha_grid {
            return Err(CliError::Failed(format!("scan {}: {}", r.id, MetricsError::GridMismatch)));
        }
        rows.push(metrics::evaluate_scan(m, r, split));
    }
    let report = metrics::aggregate_report(rows)?;
    let label = a.label.clone().or_else(|| model.curves.first().map(|c| c.source.clone())).unwrap_or_default();
    let agg = &report.aggregate;
    println!(
        "{label}: mean FSD {:.4} over {} scans (compress {}, stretch {})",
        agg.mean_full,
        agg.n_full,
        agg.mean_compress.map_or("n/a".into(), |v| format!("{v:.4}")),
        agg.mean_stretch.map_or("n/a".into(), |v| format!("{v:.4}")),
    );
    if let Some(csv) = &a.csv {
        write(csv, &report.to_csv())?;
    }
    write(&out, &to_json(&FsdOutput { kind: "fsd".into(), model: label, report }, stamp))
}

fn train(a: &TrainArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let molecules = xyz::load_dir(&a.data)?;
    if molecules.is_empty() {
        return Err(CliError::Failed(format!("no .xyz files in {}", a.data.display())));
    }
    let data = trainer::generate_dataset(&molecules, &cfg.dataset)?;
    println!("{} molecules, {} labelled frames", molecules.len(), data.len());
    let r = trainer::train(&data, &cfg.potential, &cfg.train)?;
    for h in &r.history {
        println!("epoch {:>4}  lr {:.3e}  loss {:.5}", h.epoch, h.lr, h.loss);
    }
    checkpoint::save(&r.ema, &a.out)?;
    if let Some(p) = &a.raw_out {
        checkpoint::save(&r.raw, p)?;
    }
    if let Some(p) = &a.history {
        write(p, &r.history_csv())?;
    }
    println!("EMA parameters written to {}", a.out.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MdOutput {
    kind: String,
    model: String,
    mode: String,
    structure: String,
    n_atoms: usize,
    dt: f64,
    steps: usize,
    temperature: f64,
    friction: Option<f64>,
    trajectories: usize,
    aborted: usize,
    /// meV/atom, NVE only.
    energy_drift: Option<f64>,
    /// K; the mean over trajectories for Langevin runs.
    max_temp_jump: Option<f64>,
    per_trajectory: Vec<TrajectoryBrief>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrajectoryBrief {
    seed: usize,
    aborted_at: Option<usize>,
    max_temp_jump: Option<f64>,
    mean_temperature: Option<f64>,
}

fn md(a: &MdArgs, cfg: &RunConfig, stamp: bool) -> Result<(), CliError> {
    let m = &cfg.md;
    let structure = xyz::read_xyz_file(&a.input)?;
    let (model, default_label) = load_model(&a.model)?;
    let label = a.label.clone().unwrap_or(default_label);
    let relax = RelaxSettings { tolerance: m.relax_tolerance, max_steps: m.relax_max_steps };
    let output = match a.mode {
        MdMode::Nve => with_field(&model, &structure, |ff| {
            let mut positions = structure.positions().to_vec();
            if m.relax {
                let r = dynamics::relax(ff, &positions, &relax)?;
                if !r.converged {
                    eprintln!("warning: relaxation stopped at max force {:.4} eV/A", r.max_force);
                }
                positions = r.positions;
            }
            let mut state = MdState::at_rest(positions, structure.masses())?;
            let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
            state.thermalize(m.temperature, &mut rng);
            let settings = RunSettings { dt: m.dt, steps: m.steps, thermostat: None, jump_window: m.jump_window };
            let (rep, _) = dynamics::run(ff, state, &settings, &mut rng)?;
            if let Some(p) = &a.csv {
                write(p, &rep.csv())?;
            }
            let ok = rep.aborted_at.is_none() && rep.energy_drift <= m.drift_budget;
            println!(
                "energy drift {:.4} meV/atom over {} steps ({} the {} meV/atom budget)",
                rep.energy_drift,
                rep.time.len() - 1,
                if ok { "within" } else { "exceeds" },
                m.drift_budget
            );
            if let Some(s) = rep.aborted_at {
                println!("integration blew up at step {s}");
            }
            Ok(MdOutput {
                kind: "md".into(),
                model: label.clone(),
                mode: "nve".into(),
                structure: structure.tag.clone(),
                n_atoms: structure.len(),
                dt: m.dt,
                steps: m.steps,
                temperature: m.temperature,
                friction: None,
                trajectories: 1,
                aborted: usize::from(rep.aborted_at.is_some()),
                energy_drift: Some(rep.energy_drift),
                max_temp_jump: Some(rep.max_temp_jump),
                per_trajectory: vec![TrajectoryBrief {
                    seed: 0,
                    aborted_at: rep.aborted_at,
                    max_temp_jump: Some(rep.max_temp_jump),
                    mean_temperature: Some(rep.temperature.iter().sum::<f64>() / rep.temperature.len() as f64),
                }],
            })
        })?,
        MdMode::Langevin => {
            let sc = StabilityConfig {
                temperatures: vec![m.temperature],
                n_seeds: m.seeds.max(1),
                dt: m.dt,
                equilibration: m.equilibration,
                production: m.steps as f64 * m.dt,
                friction: m.friction,
                jump_window: m.jump_window,
                relax,
                seed: m.seed,
            };
            let one = [structure.clone()];
            let reports = match &model {
                Model::Reference => dynamics::run_stability_protocol(|s| Ok(ReferencePotential::new(s)), &one, &sc)?,
                Model::Learned(p) => dynamics::run_stability_protocol(|s| p.bind(s.species()), &one, &sc)?,
            };
            if reports.iter().all(|r| !r.relaxed) {
                return Err(CliError::Failed("relaxation did not converge; no trajectory was run".into()));
            }
            if let (Some(p), Some(series)) = (&a.csv, reports.iter().find_map(|r| r.production.as_ref())) {
                write(p, &series.csv())?;
            }
            let row = dynamics::summarize(&reports).rows.remove(0);
            println!(
                "{} trajectories at {} K: mean max {} fs temperature jump {} K ({} aborted)",
                row.trajectories,
                m.temperature,
                m.jump_window,
                row.mean_jump.map_or("n/a".into(), |v| format!("{v:.2}")),
                row.aborted
            );
            MdOutput {
                kind: "md".into(),
                model: label,
                mode: "langevin".into(),
                structure: structure.tag.clone(),
                n_atoms: structure.len(),
                dt: m.dt,
                steps: m.steps,
                temperature: m.temperature,
                friction: Some(m.friction),
                trajectories: row.trajectories,
                aborted: row.aborted,
                energy_drift: None,
                max_temp_jump: row.mean_jump,
                per_trajectory: reports
                    .iter()
                    .map(|r| TrajectoryBrief {
                        seed: r.seed,
                        aborted_at: r.aborted_at,
                        max_temp_jump: r.max_temp_jump,
                        mean_temperature: r.mean_temperature,
                    })
                    .collect(),
            }
        }
    };
    if let Some(p) = &a.out {
        write(p, &to_json(&output, stamp))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub fsd_full: Option<f64>,
    pub fsd_compress: Option<f64>,
    pub fsd_stretch: Option<f64>,
    pub n_scans: Option<usize>,
    /// K
    pub max_temp_jump: Option<f64>,
    /// meV/atom
    pub energy_drift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Summary {
    rows: Vec<SummaryRow>,
}

fn report(a: &ReportArgs, stamp: bool) -> Result<(), CliError> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    for path in &a.inputs {
        let v: serde_json::Value = read_json(path)?;
        let kind = v.get("kind").and_then(|k| k.as_str()).unwrap_or_default().to_string();
        let model = v.get("model").and_then(|k| k.as_str()).unwrap_or_default().to_string();
        let idx = match rows.iter().position(|r| r.model == model) {
            Some(i) => i,
            None => {
                rows.push(SummaryRow { model: model.clone(), ..SummaryRow::default() });
                rows.len() - 1
            }
        };
        let row = &mut rows[idx];
        let bad = |e: serde_json::Error| CliError::Failed(format!("{}: {e}", path.display()));
        match kind.as_str() {
            "fsd" => {
                let f: FsdOutput = serde_json::from_value(v).map_err(bad)?;
                row.fsd_full = Some(f.report.aggregate.mean_full);
                row.fsd_compress = f.report.aggregate.mean_compress;
                row.fsd_stretch = f.report.aggregate.mean_stretch;
                row.n_scans = Some(f.report.aggregate.n_scans);
            }
            "md" => {
                let m: MdOutput = serde_json::from_value(v).map_err(bad)?;
                if m.energy_drift.is_some() {
                    row.energy_drift = m.energy_drift;
                }
                if m.mode == "langevin" || row.max_temp_jump.is_none() {
                    row.max_temp_jump = m.max_temp_jump.or(row.max_temp_jump);
                }
            }
            other => {
                return Err(CliError::Failed(format!("{}: not an fsd or md output (kind '{other}')", path.display())))
            }
        }
    }
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!("{:<20} {:>10} {:>10} {:>10} {:>12} {:>12}", "model", "FSD", "compress", "stretch", "max jump K", "drift");
    for r in &rows {
        println!(
            "{:<20} {:>10} {:>10} {:>10} {:>12} {:>12}",
            r.model,
            opt(r.fsd_full),
            opt(r.fsd_compress),
            opt(r.fsd_stretch),
            opt(r.max_temp_jump),
            opt(r.energy_drift)
        );
    }
    if let Some(p) = &a.csv {
        write(p, &crate::util::csv_string(&rows))?;
    }
    write(&a.out, &to_json(&Summary { rows }, stamp))
}
