//! Command-line front end: `latmap compile|verify|observe|scan|replay|stabilizer`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::backend::{compile_target_with, verify_instance, Backend, CompiledInstance, Mode, DEFAULT_BETA_MIN};
use crate::engine::{EngineOptions, Prepared, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::geometry::{Boundary, LatticeGeometry};
use crate::model::SpinModel;
use crate::observables::{
    check_closed, elitzur_max, entropy_with, free_energy, magnetization_with, mean_energy_with, parity_expectation_with,
    wilson_loop_with, ObservableOptions, TwoPath,
};
use crate::quantum::{build_incidence, stabilizer_generators};
use crate::rewrite::{finite_j_deviation, replay, RewriteTrace};

#[derive(Debug, Parser)]
#[command(
    name = "latmap",
    version,
    about = "Compile discrete spin models onto Z2 lattice gauge theories and verify them exactly"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub job: JobArgs,
}

#[derive(Debug, Args)]
pub struct JobArgs {
    /// Inverse temperatures as `a:b:n` (n evenly spaced points) or a comma list.
    #[arg(long, global = true, default_value = "0.1,0.25,0.5,0.75,1.0")]
    pub betas: String,
    /// Tolerance; defaults to 1e-9 for verification and 1e-7 for observables.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Enumeration cap in bits.
    #[arg(long, global = true, default_value_t = DEFAULT_CAP)]
    pub cap: usize,
    /// Recorded in every report.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    /// Comma-separated columns.
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Lgt4d,
    #[value(name = "lgt3d-boundary")]
    Lgt3dBoundary,
    Lgt3d,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Backend {
        match b {
            BackendArg::Lgt4d => Backend::Lgt4d,
            BackendArg::Lgt3dBoundary => Backend::Lgt3dBoundary,
            BackendArg::Lgt3d => Backend::Lgt3d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Superclique,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Observable {
    Energy,
    FreeEnergy,
    Entropy,
    Magnetization,
    Wilson,
    Elitzur,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Open,
    Periodic,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a target model into a lattice instance.
    Compile {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum, default_value_t = BackendArg::Lgt4d)]
        backend: BackendArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Direct)]
        mode: ModeArg,
        /// Also write the blank lattice model the trace starts from.
        #[arg(long)]
        base_out: Option<PathBuf>,
        /// Lowest beta the q-level penalty must hold at.
        #[arg(long, default_value_t = DEFAULT_BETA_MIN)]
        beta_min: f64,
    },
    /// Check an instance against its target by exact enumeration.
    Verify {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        instance: PathBuf,
    },
    /// Compute an observable on the target and, with an instance, through it.
    Observe {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, value_enum)]
        observable: Observable,
        /// Target spins for the magnetization.
        #[arg(long, value_delimiter = ',')]
        sites: Vec<usize>,
        /// Target edges of a Wilson loop.
        #[arg(long = "loop", value_delimiter = ',')]
        loop_edges: Vec<usize>,
        /// Lattice of a gauge-theory target as `x,y,z,w`.
        #[arg(long, value_delimiter = ',')]
        geometry: Vec<usize>,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Open)]
        boundary: BoundaryArg,
    },
    /// Thermodynamics on a beta grid, or the finite-J deviation of one face.
    Scan {
        #[arg(long)]
        target: PathBuf,
        /// Face whose constraint is compared with a large finite coupling.
        #[arg(long)]
        finite_j: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        j_values: Vec<f64>,
    },
    /// Replay a rewrite trace on a base model.
    Replay {
        #[arg(long, conflicts_with = "instance")]
        trace: Option<PathBuf>,
        #[arg(long, requires = "trace")]
        base: Option<PathBuf>,
        /// Replay the trace stored in an instance on its blank lattice.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Incidence rank and stabilizer generators of a lattice.
    Stabilizer {
        #[arg(long, value_delimiter = ',')]
        geometry: Vec<usize>,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Open)]
        boundary: BoundaryArg,
    },
}

/// Parses `a:b:n` or a comma list; values must be positive and distinct.
pub fn parse_betas(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad beta list {s:?}"));
    let betas: Vec<f64> = if let [a, b, n] = s.split(':').collect::<Vec<_>>()[..] {
        let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        match n {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
        }
    } else {
        s.split(',').filter(|x| !x.trim().is_empty()).map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if betas.is_empty() {
        return Err(Error::Config("empty beta grid".into()));
    }
    if betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::Config("betas must be positive".into()));
    }
    let mut sorted = betas.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("betas must be distinct".into()));
    }
    Ok(betas)
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::Config(format!("bad output path {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(s: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(s.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<SpinModel> {
    SpinModel::from_json_str(&read(path)?)
}

fn load_instance(path: &Path) -> Result<CompiledInstance> {
    CompiledInstance::from_json_str(&read(path)?)
}

fn geometry(dims: &[usize], boundary: BoundaryArg) -> Result<LatticeGeometry> {
    let dims: [usize; 4] = match dims.len() {
        2..=4 => {
            let mut d = [0; 4];
            d[..dims.len()].copy_from_slice(dims);
            d
        }
        _ => return Err(Error::Config("--geometry takes 2 to 4 extents".into())),
    };
    let b = match boundary {
        BoundaryArg::Open => Boundary::Open,
        BoundaryArg::Periodic => Boundary::Periodic,
    };
    LatticeGeometry::new(dims, b)
}

/// What a command produced: a document and its text rendering.
pub struct Output {
    pub json: serde_json::Value,
    pub text: String,
    /// Columns for the csv format.
    pub csv: Option<String>,
}

impl Output {
    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(&self.json).expect("report serialises") + "\n",
            Format::Text => self.text.clone(),
            Format::Csv => self.csv.clone().unwrap_or_else(|| self.text.clone()),
        }
    }
}

/// Runs one job. Reports go to `--out` or stdout; a verification failure is
/// reported first and returned as an error afterwards.
pub fn run(cli: &Cli) -> Result<()> {
    let job = &cli.job;
    let engine = EngineOptions { cap: job.cap };
    let (out, failure) = match &cli.command {
        Command::Compile { target, backend, mode, base_out, beta_min } => {
            let out = job.out.as_ref().ok_or_else(|| Error::Config("compile needs --out".into()))?;
            let t = load_model(target)?;
            let mode = match mode {
                ModeArg::Superclique => Mode::Superclique,
                ModeArg::Direct => Mode::Direct,
            };
            let inst = compile_target_with(&t, (*backend).into(), mode, *beta_min)?;
            write_atomic(out, &inst.to_json_string())?;
            if let Some(b) = base_out {
                write_atomic(b, &inst.layout.base_model().to_json_string())?;
            }
            let summary = json!({
                "instance": out,
                "dims": inst.dims(),
                "faces": inst.layout.roles.len(),
                "fixed_edges": inst.layout.fixed.len(),
                "logical_spins": inst.logical_map.len(),
                "accounting": inst.accounting,
                "seed": job.seed,
            });
            let text = format!(
                "compiled {} spins onto dims {:?}: {} faces, {} fixed edges, Z = 2^{} e^(-beta {}) Z_target\n",
                inst.logical_map.len(),
                inst.dims(),
                inst.layout.roles.len(),
                inst.layout.fixed.len(),
                inst.accounting.pow2,
                inst.accounting.offset
            );
            emit(&if job.format == Format::Json { summary.to_string() + "\n" } else { text })?;
            return Ok(());
        }
        Command::Verify { target, instance } => cmd_verify(job, &engine, target, instance)?,
        Command::Observe { target, instance, observable, sites, loop_edges, geometry: dims, boundary } => {
            (cmd_observe(job, &engine, target, instance.as_deref(), *observable, sites, loop_edges, dims, *boundary)?, None)
        }
        Command::Scan { target, finite_j, j_values } => (cmd_scan(job, &engine, target, *finite_j, j_values)?, None),
        Command::Replay { trace, base, instance } => {
            let m = match (trace, base, instance) {
                (Some(t), Some(b), None) => replay(&RewriteTrace::from_json_str(&read(t)?)?, &load_model(b)?)?,
                (None, None, Some(i)) => load_instance(i)?.model()?,
                _ => return Err(Error::Config("replay needs --trace with --base, or --instance".into())),
            };
            let text = m.to_json_string();
            (Output { json: m.to_json(), text: text.clone() + "\n", csv: None }, None)
        }
        Command::Stabilizer { geometry: dims, boundary } => {
            let g = geometry(dims, *boundary)?;
            let a = build_incidence(&g);
            let st = stabilizer_generators(&a)?;
            let json = json!({ "incidence": a.to_json(), "stabilizer": st, "seed": job.seed });
            (Output { json, text: st.table(), csv: None }, None)
        }
    };
    let rendered = out.render(job.format);
    match &job.out {
        Some(p) => write_atomic(p, &rendered)?,
        None => emit(&rendered)?,
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_verify(job: &JobArgs, engine: &EngineOptions, target: &Path, instance: &Path) -> Result<(Output, Option<Error>)> {
    let betas = parse_betas(&job.betas)?;
    let tol = job.tol.unwrap_or(crate::backend::DEFAULT_TOL);
    if tol <= 0.0 {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let t = load_model(target)?;
    let inst = load_instance(instance)?;
    let r = verify_instance(&t, &inst, &betas, tol, engine)?;
    let worst = r.rows.iter().max_by(|a, b| a.residual.total_cmp(&b.residual)).map(|x| x.beta).unwrap_or(0.0);
    let verdict = if r.passed { "PASS" } else { "FAIL" };
    let text = format!(
        "{}fit: a = {} (raw {:.9}), c = {}\nmax residual {:.3e} at beta {worst} (tol {tol:e})\n{verdict}\n",
        r.table(),
        r.pow2,
        r.pow2_fit,
        r.offset + 0.0,
        r.max_residual
    );
    let mut json = serde_json::to_value(&r).expect("report serialises");
    json["worst_beta"] = json!(worst);
    json["seed"] = json!(job.seed);
    let csv = std::iter::once("beta,log_z_instance,log_z_target,log_ratio,predicted,residual".to_string())
        .chain(r.rows.iter().map(|x| {
            format!("{},{},{},{},{},{}", x.beta, x.log_z_instance, x.log_z_target, x.log_ratio, x.predicted, x.residual)
        }))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    let failure = (!r.passed).then(|| Error::Verification(format!("max residual {:.3e} at beta {worst}", r.max_residual)));
    Ok((Output { json, text, csv: Some(csv) }, failure))
}

fn two_path_json(t: &TwoPath) -> serde_json::Value {
    json!({ "ensemble": t.ensemble, "derivative": t.derivative })
}

#[allow(clippy::too_many_arguments)]
fn cmd_observe(
    job: &JobArgs,
    engine: &EngineOptions,
    target: &Path,
    instance: Option<&Path>,
    observable: Observable,
    sites: &[usize],
    loop_edges: &[usize],
    dims: &[usize],
    boundary: BoundaryArg,
) -> Result<Output> {
    let betas = parse_betas(&job.betas)?;
    let opts = ObservableOptions { tol: job.tol.unwrap_or(1e-7), engine: *engine, ..Default::default() };
    let t = load_model(target)?;
    let inst = instance.map(load_instance).transpose()?;
    let inst_model = inst.as_ref().map(|i| i.model()).transpose()?;
    let logical = |xs: &[usize]| -> Result<Vec<usize>> {
        let i = inst.as_ref().expect("instance present");
        xs.iter()
            .map(|&s| i.logical_map.get(s).copied().ok_or_else(|| Error::InvalidArgument(format!("spin {s} out of range"))))
            .collect()
    };
    let geom = (!dims.is_empty()).then(|| geometry(dims, boundary)).transpose()?;
    let need_geom = || geom.as_ref().ok_or_else(|| Error::Config("this observable needs --geometry".into()));

    let mut rows = Vec::new();
    let mut text = format!("{observable:?}\nbeta  target  instance  difference\n");
    for &beta in &betas {
        let direct: TwoPath = match observable {
            Observable::Energy => mean_energy_with(&t, beta, &opts)?,
            Observable::FreeEnergy => {
                let f = free_energy(&t, beta)?;
                TwoPath { ensemble: f, derivative: f }
            }
            Observable::Entropy => {
                let s = entropy_with(&t, beta, &opts)?;
                TwoPath { ensemble: s, derivative: s }
            }
            Observable::Magnetization => magnetization_with(&t, beta, sites, &opts)?,
            Observable::Wilson => wilson_loop_with(&t, need_geom()?, beta, loop_edges, &opts)?,
            Observable::Elitzur => {
                let e = elitzur_max(&t, need_geom()?, beta, engine)?;
                TwoPath { ensemble: e, derivative: e }
            }
        };
        let via: Option<TwoPath> = match (&inst, &inst_model) {
            (Some(i), Some(m)) => {
                let (a, c) = (i.accounting.pow2 as f64, i.accounting.offset);
                let shift = |x: TwoPath, d: f64| TwoPath { ensemble: x.ensemble + d, derivative: x.derivative + d };
                Some(match observable {
                    Observable::Energy => shift(mean_energy_with(m, beta, &opts)?, -c),
                    Observable::FreeEnergy | Observable::Entropy => {
                        let lz = Prepared::new(m, &[], engine)?.log_z(beta)? - a * std::f64::consts::LN_2 + beta * c;
                        let f = -lz / beta;
                        let v = if observable == Observable::FreeEnergy {
                            f
                        } else {
                            let u = mean_energy_with(m, beta, &opts)?.ensemble - c;
                            beta * (u - f)
                        };
                        TwoPath { ensemble: v, derivative: v }
                    }
                    Observable::Magnetization => magnetization_with(m, beta, &logical(sites)?, &opts)?,
                    Observable::Wilson => {
                        check_closed(need_geom()?, loop_edges)?;
                        parity_expectation_with(m, beta, &logical(loop_edges)?, &opts)?
                    }
                    Observable::Elitzur => {
                        return Err(Error::Unsupported("the Elitzur check is defined on the target lattice only".into()))
                    }
                })
            }
            _ => None,
        };
        let diff = via.map(|v| (v.ensemble - direct.ensemble).abs());
        if let Some(d) = diff {
            if d > opts.tol * direct.ensemble.abs().max(1.0) {
                return Err(Error::Disagreement(format!(
                    "{observable:?} at beta {beta}: target {} vs instance {}",
                    direct.ensemble,
                    via.unwrap().ensemble
                )));
            }
        }
        text += &format!(
            "{beta}  {:.12}  {}  {}\n",
            direct.ensemble,
            via.map_or("-".into(), |v| format!("{:.12}", v.ensemble)),
            diff.map_or("-".into(), |d| format!("{d:.3e}"))
        );
        rows.push(json!({
            "beta": beta,
            "target": two_path_json(&direct),
            "instance": via.as_ref().map(two_path_json),
            "difference": diff,
        }));
    }
    let csv = std::iter::once("beta,target,instance".to_string())
        .chain(rows.iter().map(|r| {
            format!("{},{},{}", r["beta"], r["target"]["ensemble"], r["instance"].get("ensemble").unwrap_or(&json!("")))
        }))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    let json = json!({ "observable": format!("{observable:?}"), "tol": opts.tol, "seed": job.seed, "rows": rows });
    Ok(Output { json, text, csv: Some(csv) })
}

fn cmd_scan(job: &JobArgs, engine: &EngineOptions, target: &Path, finite_j: Option<usize>, j_values: &[f64]) -> Result<Output> {
    let betas = parse_betas(&job.betas)?;
    let t = load_model(target)?;
    let opts = ObservableOptions { tol: job.tol.unwrap_or(1e-7), engine: *engine, ..Default::default() };
    let (columns, rows): (Vec<&str>, Vec<Vec<f64>>) = match finite_j {
        Some(face) => {
            if j_values.is_empty() {
                return Err(Error::Config("empty J grid".into()));
            }
            let mut rows = Vec::new();
            for &beta in &betas {
                for &j in j_values {
                    rows.push(vec![beta, j, beta * j, finite_j_deviation(&t, face, j, beta, engine)?]);
                }
            }
            (vec!["beta", "j", "beta_j", "deviation"], rows)
        }
        None => {
            let mut rows = Vec::new();
            for &beta in &betas {
                let lz = Prepared::new(&t, &[], engine)?.log_z(beta)?;
                let u = mean_energy_with(&t, beta, &opts)?.ensemble;
                let f = -lz / beta;
                rows.push(vec![beta, lz, f, u, beta * (u - f)]);
            }
            (vec!["beta", "log_z", "free_energy", "energy", "entropy"], rows)
        }
    };
    let csv = std::iter::once(columns.join(","))
        .chain(rows.iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    let text = csv.replace(',', "  ");
    let json = json!({ "columns": columns, "rows": rows, "seed": job.seed });
    Ok(Output { json, text, csv: Some(csv) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_grids() {
        assert_eq!(parse_betas("0.1:1.0:10").unwrap().len(), 10);
        assert_eq!(parse_betas("0.5, 0.25").unwrap(), vec![0.5, 0.25]);
        assert!(parse_betas("0.1:1:0").is_err());
        assert!(parse_betas("").is_err());
        assert!(parse_betas("0.5,0.5").is_err());
        assert!(parse_betas("-1,2").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
