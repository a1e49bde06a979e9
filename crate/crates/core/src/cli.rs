//! Command-line front end: run configuration, artifact naming, and the
//! subcommands of the `fracheat` binary.
//!
//! Every artifact is named `<command>-<hash>.<ext>`, where `hash` is the
//! first 16 hex digits of the SHA-256 of the canonical JSON configuration,
//! and every CSV row starts with that hash.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::acceptance::{Outcome, Suite, CRITERIA};
use crate::boundary::{default_rho_ladder, hypothesis_scan, pohozaev_residual, quotient_profile};
use crate::domain::{Domain, DomainGrid};
use crate::error::{Error, Result};
use crate::heat::{direct_tail_sum, project, select_k0, tail_bound, uniform_bound_audit, HeatSolution, InitialData};
use crate::measure::{power_concavity, second_difference_certificate, weyl_constant, MeasureDoc, SpectralMeasure, SymbolProfile};
use crate::operator::{assemble_with, indicator_load, DirichletSolver, OperatorMatrices, OperatorOptions};
use crate::potential::{lp_refinement, test_family, KernelProfile, LpCase};
use crate::spectral::{bootstrap_exponents, default_window, eigenpairs, sup_norm_audit, weyl_audit, EigenSystem};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Number of eigenpairs; `0` requests all of them.
    pub m: usize,
    #[serde(flatten)]
    pub operator: OperatorOptions,
    /// Gauss–Jacobi order of the sphere quadrature for planar symbols.
    pub sphere_order: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { m: 60, operator: OperatorOptions::default(), sphere_order: crate::measure::DEFAULT_SPHERE_ORDER }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SymbolConfig {
    /// Frequencies to tabulate; empty selects a default set.
    pub xi: Vec<Vec<f64>>,
    /// Pairs for the second-difference certificate.
    pub trials: usize,
}

impl Default for SymbolConfig {
    fn default() -> Self {
        SymbolConfig { xi: Vec::new(), trials: 10_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WeylConfig {
    pub mc_samples: usize,
    /// Audit window; defaults to `[m/3, 5m/6]`.
    pub k_range: Option<(usize, usize)>,
}

impl Default for WeylConfig {
    fn default() -> Self {
        WeylConfig { mc_samples: 200_000, k_range: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveConfig {
    pub initial: InitialData,
    /// Nodal initial values, one per line; overrides `initial` when set.
    pub initial_csv: Option<PathBuf>,
    pub t0: f64,
    /// Points of the monitored time grid, geometric from `t0` to `t_max`.
    pub points: usize,
    /// Defaults to `6/λ₁`.
    pub t_max: Option<f64>,
    /// Levels of the doubling/halving sweep in the uniform-bound audit.
    pub levels: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            initial: InitialData::Indicator { a: -0.5, b: 0.5 },
            initial_csv: None,
            t0: 0.1,
            points: 50,
            t_max: None,
            levels: 4,
        }
    }
}

/// Function analysed by `boundary` and `pohozaev`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Solution of `Lu = 1`.
    #[default]
    Ball,
    /// `u(·, t)` from the `evolve` initial datum, with `Lu = -∂ₜu`.
    Heat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundaryConfig {
    pub source: Source,
    /// Time for the heat source.
    pub t: f64,
    /// Orders for `u`; defaults to `{s, 1}`.
    pub betas_a: Option<Vec<f64>>,
    /// Orders for `u/δ^s`; defaults to `{α}`.
    pub betas_b: Option<Vec<f64>>,
    /// Defaults to `{2h, 4h, 8h, 16h}`.
    pub rhos: Option<Vec<f64>>,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig { source: Source::Ball, t: 0.1, betas_a: None, betas_b: None, rhos: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    /// Radii for the fundamental solution.
    pub radii: Vec<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            xs: vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0],
            ts: vec![0.01, 0.1, 1.0, 10.0],
            radii: vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LpConfig {
    pub case: LpCase,
    pub p: f64,
    pub family: usize,
    /// Grids `h, h/2, …` in the refinement study.
    pub refinements: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        LpConfig { case: LpCase::C, p: 2.0, family: 20, refinements: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    /// Run the numerical checks twice and compare the artifacts byte for byte.
    pub rerun: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { rerun: true }
    }
}

/// Full configuration of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub measure: MeasureDoc,
    pub domain: Domain,
    pub h: f64,
    pub seed: u64,
    /// `α = s - eps` for quotient seminorms.
    pub eps: f64,
    pub solver: SolverConfig,
    pub symbol: SymbolConfig,
    pub weyl: WeylConfig,
    pub evolve: EvolveConfig,
    pub boundary: BoundaryConfig,
    pub pohozaev: BoundaryConfig,
    pub kernel: KernelConfig,
    pub lp: LpConfig,
    pub audit: AuditConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            measure: MeasureDoc::isotropic(1, 0.5),
            domain: Domain::interval(-1.0, 1.0),
            h: 2f64.powi(-8),
            seed: 0,
            eps: 0.05,
            solver: SolverConfig::default(),
            symbol: SymbolConfig::default(),
            weyl: WeylConfig::default(),
            evolve: EvolveConfig::default(),
            boundary: BoundaryConfig::default(),
            pohozaev: BoundaryConfig::default(),
            kernel: KernelConfig::default(),
            lp: LpConfig::default(),
            audit: AuditConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// JSON with sorted keys and no whitespace.
    pub fn canonical_json(&self) -> String {
        // `Value` maps are ordered by key
        serde_json::to_value(self).map(|v| v.to_string()).unwrap_or_default()
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::canonical_json`].
    pub fn hash(&self) -> String {
        hex16(self.canonical_json().as_bytes())
    }

    /// Hash of the parts that determine the discrete eigensystem.
    pub fn system_hash(&self) -> String {
        let v = json!({"measure": self.measure, "domain": self.domain, "h": self.h, "solver": self.solver});
        hex16(v.to_string().as_bytes())
    }

    fn measure(&self) -> Result<SpectralMeasure> {
        let m = self.measure.build()?;
        if m.dim() != self.domain.dim() {
            return Err(Error::InvalidParameter(format!(
                "measure is {}-dimensional but the domain is {}-dimensional",
                m.dim(),
                self.domain.dim()
            )));
        }
        Ok(m)
    }

    fn profile(&self) -> Result<SymbolProfile> {
        Ok(SymbolProfile::with_order(self.measure()?, self.solver.sphere_order))
    }

    fn setup(&self) -> Result<(SpectralMeasure, DomainGrid, OperatorMatrices)> {
        let measure = self.measure()?;
        let grid = DomainGrid::build(self.domain, self.h)?;
        let ops = assemble_with(&measure, &grid, self.solver.operator)?;
        Ok((measure, grid, ops))
    }

    fn eigen_count(&self, nodes: usize) -> usize {
        if self.solver.m == 0 {
            nodes
        } else {
            self.solver.m.min(nodes)
        }
    }
}

fn hex16(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Parser)]
#[command(name = "fracheat", version, about = "Fractional heat equation toolkit: symbols, spectra, boundary diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub t0: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Tabulate the symbol, ellipticity constants and the second-difference certificate.
    Symbol,
    /// Weyl constant with its sandwich and the eigenvalue audit.
    Weyl,
    /// Dirichlet eigenpairs and the sup-norm audit.
    Eig,
    /// Heat evolution monitors and tail bounds.
    Evolve,
    /// Boundary trace and seminorm scans.
    Boundary,
    /// Pohozaev identity residual.
    Pohozaev,
    /// Integrability ladder and the exponent w.
    Bootstrap,
    /// Heat kernel and fundamental solution on the line.
    Kernel,
    /// Empirical L^p → L^q constants.
    LpCheck {
        /// a, b or c.
        #[arg(long)]
        case: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        /// Number of right-hand sides.
        #[arg(long)]
        family: Option<usize>,
    },
    /// The full acceptance suite.
    AuditAll,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Symbol => "symbol",
            Command::Weyl => "weyl",
            Command::Eig => "eig",
            Command::Evolve => "evolve",
            Command::Boundary => "boundary",
            Command::Pohozaev => "pohozaev",
            Command::Bootstrap => "bootstrap",
            Command::Kernel => "kernel",
            Command::LpCheck { .. } => "lp-check",
            Command::AuditAll => "audit-all",
        }
    }
}

/// Applies command-line overrides on top of a configuration.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.s {
        cfg.measure.s = v;
    }
    if let Some(v) = cli.n {
        cfg.measure.n = v;
    }
    if let Some(v) = cli.h {
        cfg.h = v;
    }
    if let Some(v) = cli.m {
        cfg.solver.m = v;
    }
    if let Some(v) = cli.t0 {
        cfg.evolve.t0 = v;
    }
    if let Some(v) = cli.eps {
        cfg.eps = v;
    }
    if let Command::LpCheck { case, p, family } = &cli.command {
        if let Some(c) = case {
            cfg.lp.case = match c.to_ascii_lowercase().as_str() {
                "a" => LpCase::A,
                "b" => LpCase::B,
                "c" => LpCase::C,
                other => return Err(Error::InvalidParameter(format!("unknown case {other:?}; use a, b or c"))),
            };
        }
        if let Some(p) = p {
            cfg.lp.p = *p;
        }
        if let Some(f) = family {
            cfg.lp.family = *f;
        }
    }
    Ok(cfg)
}

/// A named output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Files written and the JSON printed by a command.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
    /// Exit status on success: `0`, or `3` when `audit-all` has failing checks.
    pub status: i32,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn csv_artifact(name: String, hash: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<Artifact> {
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("config_hash").chain(header.iter().copied())).map_err(io)?;
    for row in rows {
        w.write_record(std::iter::once(hash.to_string()).chain(row)).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(Artifact { name, bytes })
}

fn json_artifact(name: String, hash: &str, value: &Value) -> Result<Artifact> {
    let mut v = value.clone();
    if let Value::Object(map) = &mut v {
        map.insert("config_hash".into(), Value::String(hash.into()));
    }
    let mut bytes = serde_json::to_vec_pretty(&v)?;
    bytes.push(b'\n');
    Ok(Artifact { name, bytes })
}

/// Runs a command and returns its artifacts without touching the disk.
/// `out_dir` is only read, to reuse a cached eigensystem.
pub fn execute(command: &Command, cfg: &RunConfig, out_dir: Option<&Path>) -> Result<CommandOutput> {
    let hash = cfg.hash();
    let name = command.name();
    let ok = |artifacts: Vec<Artifact>, summary: Value| CommandOutput { artifacts, summary, status: 0 };
    match command {
        Command::Symbol => {
            let (artifacts, summary) = run_symbol(cfg, &hash)?;
            Ok(ok(artifacts, summary))
        }
        Command::Weyl => {
            let (artifacts, summary) = run_weyl(cfg, &hash, out_dir)?;
            Ok(ok(artifacts, summary))
        }
        Command::Eig => {
            let (artifacts, summary) = run_eig(cfg, &hash, out_dir)?;
            Ok(ok(artifacts, summary))
        }
        Command::Evolve => {
            let (artifacts, summary) = run_evolve(cfg, &hash, out_dir)?;
            Ok(ok(artifacts, summary))
        }
        Command::Boundary => {
            let (artifacts, summary) = run_boundary(cfg, &hash, out_dir)?;
            Ok(ok(artifacts, summary))
        }
        Command::Pohozaev => {
            let (artifacts, summary) = run_pohozaev(cfg, &hash, out_dir)?;
            Ok(ok(artifacts, summary))
        }
        Command::Bootstrap => {
            let plan = bootstrap_exponents(cfg.measure.n as u32, cfg.measure.s)?;
            let summary = json!({
                "n": plan.n, "s": plan.s.to_string(), "branch": plan.branch, "p": plan.p_f64(),
                "p_exact": plan.p_strings(), "N": plan.steps, "w": plan.w, "reduction": plan.reduction
            });
            let rows = plan.p_f64().iter().zip(plan.p_strings()).enumerate().map(|(k, (p, e))| vec![k.to_string(), num(*p), e]).collect();
            Ok(ok(
                vec![
                    csv_artifact(format!("{name}-{hash}.csv"), &hash, &["k", "p", "p_exact"], rows)?,
                    json_artifact(format!("{name}-{hash}.json"), &hash, &summary)?,
                ],
                summary,
            ))
        }
        Command::Kernel => {
            let (artifacts, summary) = run_kernel(cfg, &hash)?;
            Ok(ok(artifacts, summary))
        }
        Command::LpCheck { .. } => {
            let (artifacts, summary) = run_lp(cfg, &hash)?;
            Ok(ok(artifacts, summary))
        }
        Command::AuditAll => run_audit(cfg, &hash),
    }
}

fn default_xi(n: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        [-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0].iter().map(|x| vec![*x]).collect()
    } else {
        let mut out = vec![vec![0.0, 0.0]];
        for r in [0.5, 1.0, 2.0] {
            for j in 0..24 {
                let th = std::f64::consts::TAU * j as f64 / 24.0;
                out.push(vec![r * th.cos(), r * th.sin()]);
            }
        }
        out
    }
}

fn run_symbol(cfg: &RunConfig, hash: &str) -> Result<(Vec<Artifact>, Value)> {
    let profile = cfg.profile()?;
    let measure = profile.measure().clone();
    let n = measure.dim();
    let s = measure.order();
    let (mu1, mu2) = measure.ellipticity();
    let xis = if cfg.symbol.xi.is_empty() { default_xi(n) } else { cfg.symbol.xi.clone() };
    let mut rows = Vec::new();
    for xi in &xis {
        if xi.len() != n {
            return Err(Error::InvalidParameter(format!("frequency {xi:?} does not have {n} components")));
        }
        let a = profile.symbol(xi);
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt().powf(2.0 * s);
        let second = if n == 2 { num(xi[1]) } else { String::new() };
        rows.push(vec![num(xi[0]), second, num(a), num(mu1 * r), num(mu2 * r)]);
    }
    let cert = second_difference_certificate(&profile, cfg.symbol.trials, cfg.seed);
    let concavity_ok = (1..=200).all(|i| {
        let a = i as f64 / 20.0;
        power_concavity(a, a * 0.37, s) && power_concavity(a, 0.0, s)
    });
    let summary = json!({
        "n": n, "s": s, "mu1": mu1, "mu2": mu2, "lambda2": measure.lambda2(),
        "certificate": {"trials": cert.trials, "violations": cert.violations, "max_excess": cert.max_excess,
                        "min_relative_slack": cert.min_relative_slack, "holds": cert.holds()},
        "concavity_holds": concavity_ok
    });
    Ok((
        vec![
            csv_artifact(format!("symbol-{hash}.csv"), hash, &["xi_0", "xi_1", "symbol", "lower", "upper"], rows)?,
            json_artifact(format!("symbol-{hash}.json"), hash, &summary)?,
        ],
        summary,
    ))
}

const BLOB_MAGIC: &[u8; 8] = b"FHEIG001";

/// Binary eigensystem: magic, `u64` node count, `u64` pair count, the
/// eigenvalues, then the eigenvectors column by column (little-endian `f64`).
pub fn encode_eigensystem(eig: &EigenSystem) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * eig.len() * (eig.nodes() + 1));
    out.extend_from_slice(BLOB_MAGIC);
    out.extend_from_slice(&(eig.nodes() as u64).to_le_bytes());
    out.extend_from_slice(&(eig.len() as u64).to_le_bytes());
    for v in eig.values.iter().chain(eig.vectors.as_slice()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Inverse of [`encode_eigensystem`]; the matrices come from `ops`.
pub fn decode_eigensystem(bytes: &[u8], ops: &OperatorMatrices) -> Result<EigenSystem> {
    let bad = || Error::InvalidParameter("malformed eigensystem blob".into());
    if bytes.len() < 24 || &bytes[..8] != BLOB_MAGIC {
        return Err(bad());
    }
    let word = |i: usize| -> [u8; 8] { bytes[i..i + 8].try_into().expect("eight bytes") };
    let nodes = u64::from_le_bytes(word(8)) as usize;
    let m = u64::from_le_bytes(word(16)) as usize;
    if nodes != ops.len() || bytes.len() != 24 + 8 * m * (nodes + 1) {
        return Err(bad());
    }
    let floats: Vec<f64> = (0..m * (nodes + 1)).map(|k| f64::from_le_bytes(word(24 + 8 * k))).collect();
    Ok(EigenSystem {
        values: floats[..m].to_vec(),
        vectors: DMatrix::from_column_slice(nodes, m, &floats[m..]),
        mass: ops.mass.clone(),
        stiffness: ops.stiffness.clone(),
        n: ops.n,
        s: ops.s,
        h: ops.h,
    })
}

/// Eigensystem for the configuration, reusing `eig-<system hash>.bin` from
/// `out_dir` when present.
fn eigensystem(cfg: &RunConfig, ops: &OperatorMatrices, out_dir: Option<&Path>) -> Result<(EigenSystem, Artifact)> {
    let name = format!("eig-{}.bin", cfg.system_hash());
    if let Some(dir) = out_dir {
        if let Ok(bytes) = fs::read(dir.join(&name)) {
            if let Ok(eig) = decode_eigensystem(&bytes, ops) {
                return Ok((eig, Artifact { name, bytes }));
            }
        }
    }
    let eig = eigenpairs(ops, cfg.eigen_count(ops.len()))?;
    let bytes = encode_eigensystem(&eig);
    Ok((eig, Artifact { name, bytes }))
}

fn run_eig(cfg: &RunConfig, hash: &str, out_dir: Option<&Path>) -> Result<(Vec<Artifact>, Value)> {
    let (measure, grid, ops) = cfg.setup()?;
    let (eig, blob) = eigensystem(cfg, &ops, out_dir)?;
    let plan = bootstrap_exponents(measure.dim() as u32, measure.order())?;
    let audit = sup_norm_audit(&eig, plan.w, cfg.domain.volume());
    let rows = audit
        .table
        .iter()
        .map(|(k, l, sup, l2)| vec![k.to_string(), num(*l), num(*sup), num(*l2)])
        .collect();
    let residual = eig.residuals().into_iter().fold(0.0, f64::max);
    let summary = json!({
        "nodes": grid.len(), "m": eig.len(), "lambda1": eig.values[0],
        "orthonormality_defect": eig.orthonormality_defect(), "max_residual": residual,
        "w": plan.w, "sup_norm_slope": audit.slope, "implied_constant": audit.implied_constant,
        "slope_within_bound": audit.slope_within_bound, "lower_bound_holds": audit.lower_bound_holds,
        "blob": blob.name
    });
    Ok((
        vec![
            csv_artifact(format!("eig-{hash}.csv"), hash, &["k", "lambda", "sup_norm", "l2_norm"], rows)?,
            json_artifact(format!("eig-{hash}.json"), hash, &summary)?,
            blob,
        ],
        summary,
    ))
}

fn run_weyl(cfg: &RunConfig, hash: &str, out_dir: Option<&Path>) -> Result<(Vec<Artifact>, Value)> {
    let (_, _, ops) = cfg.setup()?;
    let (eig, _) = eigensystem(cfg, &ops, out_dir)?;
    let weyl = weyl_constant(&cfg.profile()?, cfg.domain.volume(), cfg.weyl.mc_samples, cfg.seed)?;
    let window = cfg.weyl.k_range.unwrap_or_else(|| default_window(eig.len()));
    let audit = weyl_audit(&eig, &weyl, window)?;
    let e = 2.0 * eig.s / eig.n as f64;
    let rows = eig
        .values
        .iter()
        .enumerate()
        .map(|(i, l)| vec![(i + 1).to_string(), num(*l), num(l * ((i + 1) as f64).powf(-e))])
        .collect();
    let summary = json!({
        "c0": weyl.c0, "c0_sigma": weyl.c0_sigma, "c_mu1": weyl.lower, "c_mu2": weyl.upper,
        "sublevel_volume": weyl.sublevel_volume, "samples": weyl.samples,
        "window": [audit.k_lo, audit.k_hi], "median": audit.median, "drift": audit.drift,
        "relative_error": audit.relative_error, "sandwich_holds": audit.sandwich_holds,
        "discretization_warning": audit.discretization_warning
    });
    Ok((
        vec![
            csv_artifact(format!("weyl-{hash}.csv"), hash, &["k", "lambda", "ratio"], rows)?,
            json_artifact(format!("weyl-{hash}.json"), hash, &summary)?,
        ],
        summary,
    ))
}

fn read_nodal_csv(path: &Path, nodes: usize) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let Some(field) = record.iter().last() else { continue };
        match field.trim().parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() => continue,
            Err(_) => return Err(Error::InvalidParameter(format!("non-numeric value {field:?}"))),
        }
    }
    if values.len() != nodes {
        return Err(Error::InvalidParameter(format!("{} values for {nodes} nodes", values.len())));
    }
    Ok(values)
}

fn heat_solution<'a>(cfg: &RunConfig, eig: &'a EigenSystem, grid: &DomainGrid) -> Result<HeatSolution<'a>> {
    match &cfg.evolve.initial_csv {
        Some(path) => project(eig, &read_nodal_csv(path, grid.len())?),
        None => cfg.evolve.initial.project(eig, grid),
    }
}

fn run_evolve(cfg: &RunConfig, hash: &str, out_dir: Option<&Path>) -> Result<(Vec<Artifact>, Value)> {
    let (measure, grid, ops) = cfg.setup()?;
    let (eig, _) = eigensystem(cfg, &ops, out_dir)?;
    let sol = heat_solution(cfg, &eig, &grid)?;
    let s = measure.order();
    let n = measure.dim();
    let t0 = cfg.evolve.t0;
    if !(t0 > 0.0) || cfg.evolve.points < 2 {
        return Err(Error::InvalidParameter("evolve needs t0 > 0 and at least two time points".into()));
    }
    let t_max = cfg.evolve.t_max.unwrap_or(6.0 / eig.values[0]).max(t0);
    let pts = cfg.evolve.points;
    let ts: Vec<f64> = (0..pts).map(|j| t0 * (t_max / t0).powf(j as f64 / (pts - 1) as f64)).collect();
    let plan = bootstrap_exponents(n as u32, s)?;
    let audit = uniform_bound_audit(&sol, &grid, t0, cfg.eps, plan.w, cfg.evolve.levels)?;
    let norms = sol.l2_decay(&ts);
    let mut rows = Vec::new();
    for (t, l2) in ts.iter().zip(&norms) {
        let u = sol.evaluate(*t);
        let one = uniform_bound_audit_row(&u, &grid, s, cfg.eps);
        rows.push(vec![num(*t), num(*l2), num(one.0), num(one.1)]);
    }
    let weyl = weyl_constant(&cfg.profile()?, cfg.domain.volume(), cfg.weyl.mc_samples, cfg.seed)?;
    let gamma_exp = 2.0 * s / n as f64;
    let k0 = select_k0(&eig.values, weyl.c0, gamma_exp, 10);
    let tail = match k0 {
        Some(k0) => {
            let b = tail_bound(weyl.c0, n, s, plan.w, t0, k0)?;
            json!({"k0": k0, "bound": b.value, "beta": b.beta, "direct": direct_tail_sum(&eig.values, plan.w, t0, k0)})
        }
        None => json!({"k0": null, "note": "computed spectrum never settles inside the Weyl envelope"}),
    };
    let max_coefficient = sol.coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let summary = json!({
        "t0": t0, "t_max": t_max, "w": plan.w, "lambda1": eig.values[0],
        "initial_norm": sol.initial_norm_sq.sqrt(), "coefficient_energy": sol.coefficient_energy(),
        "max_coefficient": max_coefficient,
        "l2_nonincreasing": norms.windows(2).all(|p| p[1] <= p[0]),
        "monitors_maximized_at_t0": audit.maximized_at_t0, "monitors_nonincreasing": audit.nonincreasing,
        "c1": audit.c1, "c2": audit.c2, "blowup_holder": audit.blowup_holder,
        "blowup_quotient": audit.blowup_quotient, "reference_order": audit.reference_order,
        "tail": tail
    });
    Ok((
        vec![
            csv_artifact(format!("evolve-{hash}.csv"), hash, &["t", "l2", "holder", "quotient"], rows)?,
            json_artifact(format!("evolve-{hash}.json"), hash, &summary)?,
        ],
        summary,
    ))
}

/// `([u]_{C^s}, [u/δ^s]_{C^{s-ε}})` of one snapshot, as in the uniform-bound audit.
fn uniform_bound_audit_row(u: &[f64], grid: &DomainGrid, s: f64, eps: f64) -> (f64, f64) {
    let mut pts = grid.points().to_vec();
    let interior = pts.len();
    pts.extend(grid.boundary().points.iter().copied());
    let mut vals = u.to_vec();
    vals.resize(pts.len(), 0.0);
    let holder = crate::boundary::holder_seminorm_points(&pts, &vals, s, 0).value;
    let q = crate::boundary::quotient_values(u, grid, s);
    let quotient = crate::boundary::holder_seminorm_points(&pts[..interior], &q, (s - eps).max(1e-3), 0).value;
    (holder, quotient)
}

/// `(u, Lu)` for the configured source.
fn source_pair(
    cfg: &RunConfig,
    bc: &BoundaryConfig,
    grid: &DomainGrid,
    ops: &OperatorMatrices,
    out_dir: Option<&Path>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    match bc.source {
        Source::Ball => {
            let solver = DirichletSolver::new(ops)?;
            let u = if grid.dim() == 1 {
                let (a, b) = match *grid.domain() {
                    Domain::Interval { a, b } => (a, b),
                    _ => unreachable!("one-dimensional grids live on intervals"),
                };
                solver.solve_load(&indicator_load(grid, a, b))?
            } else {
                solver.solve(&vec![1.0; grid.len()])?
            };
            Ok((u, vec![1.0; grid.len()]))
        }
        Source::Heat => {
            if !(bc.t > 0.0) {
                return Err(Error::InvalidParameter("the heat source needs t > 0".into()));
            }
            let (eig, _) = eigensystem(cfg, ops, out_dir)?;
            let sol = heat_solution(cfg, &eig, grid)?;
            let lu = sol.time_derivative(1, bc.t).iter().map(|v| -v).collect();
            Ok((sol.evaluate(bc.t), lu))
        }
    }
}

fn run_boundary(cfg: &RunConfig, hash: &str, out_dir: Option<&Path>) -> Result<(Vec<Artifact>, Value)> {
    let (measure, grid, ops) = cfg.setup()?;
    let s = measure.order();
    let alpha = s - cfg.eps;
    let bc = &cfg.boundary;
    let (u, lu) = source_pair(cfg, bc, &grid, &ops, out_dir)?;
    let betas_a = bc.betas_a.clone().unwrap_or_else(|| vec![s, 1.0]);
    let betas_b = bc.betas_b.clone().unwrap_or_else(|| vec![alpha]);
    let rhos = bc.rhos.clone().unwrap_or_else(|| default_rho_ladder(&grid));
    let (a, b) = hypothesis_scan(&u, &grid, s, alpha, &betas_a, &betas_b, &rhos)?;
    let mut rows = Vec::new();
    for scan in a.iter().chain(&b) {
        let target = serde_json::to_value(scan.target)?.as_str().unwrap_or_default().to_string();
        for (rho, v) in scan.rhos.iter().zip(&scan.seminorms) {
            rows.push(vec![target.clone(), num(scan.beta), num(*rho), num(*v)]);
        }
    }
    let profile = quotient_profile(&u, &grid, s)?;
    let trace_rows = profile
        .trace
        .iter()
        .map(|t| {
            vec![
                num(t.point[0]),
                num(t.point[1]),
                num(t.normal[0]),
                num(t.normal[1]),
                num(t.value),
                num(t.alternate),
                num(t.uncertainty),
                t.converged.to_string(),
            ]
        })
        .collect();
    let scans: Vec<Value> = a
        .iter()
        .chain(&b)
        .map(|x| json!({"target": x.target, "beta": x.beta, "slope": x.slope, "expected_slope": x.expected_slope,
                        "gradient_surrogate": x.gradient_surrogate, "passes": x.passes}))
        .collect();
    let max_lu = lu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let summary = json!({
        "source": bc.source, "s": s, "alpha": alpha, "scans": scans,
        "trace_converged": profile.all_converged(),
        "hypothesis_c": {"max_abs_lu": max_lu, "bounded": max_lu.is_finite()},
        "advisory": grid.advisory()
    });
    Ok((
        vec![
            csv_artifact(format!("boundary-{hash}.csv"), hash, &["target", "beta", "rho", "seminorm"], rows)?,
            csv_artifact(
                format!("boundary-trace-{hash}.csv"),
                hash,
                &["x_0", "x_1", "nu_0", "nu_1", "trace", "alternate", "uncertainty", "converged"],
                trace_rows,
            )?,
            json_artifact(format!("boundary-{hash}.json"), hash, &summary)?,
        ],
        summary,
    ))
}

fn run_pohozaev(cfg: &RunConfig, hash: &str, out_dir: Option<&Path>) -> Result<(Vec<Artifact>, Value)> {
    let (measure, grid, ops) = cfg.setup()?;
    let bc = &cfg.pohozaev;
    let (u, lu) = source_pair(cfg, bc, &grid, &ops, out_dir)?;
    let r = pohozaev_residual(&measure, &grid, &u, &lu)?;
    let source = serde_json::to_value(bc.source)?.as_str().unwrap_or_default().to_string();
    let rows = vec![vec![
        source,
        num(grid.h()),
        num(r.lhs),
        num(r.rhs),
        num(r.volume_term),
        num(r.boundary_term),
        num(r.residual),
    ]];
    let summary = serde_json::to_value(&r)?;
    Ok((
        vec![
            csv_artifact(
                format!("pohozaev-{hash}.csv"),
                hash,
                &["source", "h", "lhs", "rhs", "volume_term", "boundary_term", "residual"],
                rows,
            )?,
            json_artifact(format!("pohozaev-{hash}.json"), hash, &summary)?,
        ],
        summary,
    ))
}

fn run_kernel(cfg: &RunConfig, hash: &str) -> Result<(Vec<Artifact>, Value)> {
    let profile = KernelProfile::from_measure(&cfg.measure.build()?)?;
    let s = profile.s;
    let mut rows = Vec::new();
    for &t in &cfg.kernel.ts {
        for &x in &cfg.kernel.xs {
            let p = profile.heat_kernel(x, t)?;
            let tau = profile.mu * t;
            let reference = if s == 0.5 { num(tau / (std::f64::consts::PI * (tau * tau + x * x))) } else { String::new() };
            rows.push(vec![num(x), num(t), num(p), num(tau.powf(1.0 / (2.0 * s)) * p), reference]);
        }
    }
    let masses: Vec<Value> = cfg
        .kernel
        .ts
        .iter()
        .map(|&t| profile.heat_kernel_mass(t).map(|m| json!({"t": t, "mass": m})))
        .collect::<Result<_>>()?;
    let mut artifacts = vec![csv_artifact(format!("kernel-{hash}.csv"), hash, &["x", "t", "p", "scaled", "reference"], rows)?];
    let fundamental = if (profile.n as f64) > 2.0 * s {
        let audit = profile.fundamental_audit(&cfg.kernel.radii)?;
        let rows = audit
            .xs
            .iter()
            .zip(&audit.values)
            .zip(&audit.scaled)
            .map(|((x, v), sc)| vec![num(*x), num(*v), num(*sc)])
            .collect();
        artifacts.push(csv_artifact(format!("kernel-fundamental-{hash}.csv"), hash, &["x", "V", "V_scaled"], rows)?);
        json!({"c2": audit.c2, "spread": audit.spread, "homogeneity_defect": audit.homogeneity_defect,
               "closed_form": audit.closed_form})
    } else {
        json!({"available": false, "note": "n ≤ 2s forces n = 1 and s ≥ 1/2; no fundamental solution of the form c|x|^{2s-n}"})
    };
    let summary = json!({"n": profile.n, "s": s, "mu": profile.mu, "masses": masses, "fundamental": fundamental});
    artifacts.push(json_artifact(format!("kernel-{hash}.json"), hash, &summary)?);
    Ok((artifacts, summary))
}

fn run_lp(cfg: &RunConfig, hash: &str) -> Result<(Vec<Artifact>, Value)> {
    let measure = cfg.measure()?;
    let lp = &cfg.lp;
    if lp.refinements < 2 {
        return Err(Error::InvalidParameter("lp-check needs at least two grids".into()));
    }
    let family = test_family(&cfg.domain, lp.family, cfg.seed);
    let hs: Vec<f64> = (0..lp.refinements).map(|j| cfg.h * 0.5f64.powi(j as i32)).collect();
    let r = lp_refinement(&measure, &cfg.domain, &hs, &family, lp.case, lp.p, cfg.solver.operator)?;
    let mut rows = Vec::new();
    for rep in &r.reports {
        for m in &rep.members {
            for (j, q) in rep.qs.iter().enumerate() {
                let q = if q.is_infinite() { "inf".to_string() } else { num(*q) };
                rows.push(vec![num(rep.h), m.index.to_string(), m.kind.to_string(), q, num(m.norm_g), num(m.norms_u[j]), num(m.ratios[j])]);
            }
        }
    }
    let summary = json!({
        "case": lp.case, "p": lp.p, "hs": hs,
        "constants": r.reports.iter().map(|x| x.constants.clone()).collect::<Vec<_>>(),
        "spread": r.spread, "stable_within_10_percent": r.stable_within(0.10),
        "linearity_defect": r.reports.iter().map(|x| x.linearity_defect).fold(0.0, f64::max),
        "scaling_defect": r.reports.iter().map(|x| x.scaling_defect).fold(0.0, f64::max),
        "comparison_defect": r.reports.iter().map(|x| x.comparison_defect).fold(0.0, f64::max),
        "skipped": r.reports.iter().map(|x| x.skipped).collect::<Vec<_>>(),
        "family": family
    });
    Ok((
        vec![
            csv_artifact(format!("lp-check-{hash}.csv"), hash, &["h", "member", "kind", "q", "norm_g", "norm_u", "ratio"], rows)?,
            json_artifact(format!("lp-check-{hash}.json"), hash, &summary)?,
        ],
        summary,
    ))
}

fn audit_artifacts(outcomes: &[Outcome], hash: &str) -> Result<Vec<Artifact>> {
    let rows = outcomes
        .iter()
        .map(|o| vec![o.id.to_string(), o.name.to_string(), o.passed.to_string(), num(o.metric), num(o.threshold)])
        .collect();
    let detail = json!({"criteria": outcomes});
    Ok(vec![
        csv_artifact(format!("audit-all-{hash}.csv"), hash, &["criterion", "name", "passed", "metric", "threshold"], rows)?,
        json_artifact(format!("audit-all-{hash}.json"), hash, &detail)?,
    ])
}

/// Runs the acceptance suite; the last check reruns it and compares bytes.
pub fn audit_outcomes(cfg: &RunConfig) -> Result<Vec<Outcome>> {
    let hash = cfg.hash();
    let mut outcomes = Suite::new(cfg.seed).run_numerical();
    let start = std::time::Instant::now();
    let (passed, detail) = if cfg.audit.rerun {
        let first = audit_artifacts(&outcomes, &hash)?;
        let again = audit_artifacts(&Suite::new(cfg.seed).run_numerical(), &hash)?;
        let same = first == again;
        (same, json!({"identical": same, "files": first.iter().map(|a| a.name.clone()).collect::<Vec<_>>()}))
    } else {
        (true, json!({"identical": null, "note": "rerun disabled; compare artifacts of separate runs"}))
    };
    outcomes.push(Outcome {
        id: CRITERIA,
        name: crate::acceptance::criterion_name(CRITERIA),
        passed,
        metric: if passed { 0.0 } else { 1.0 },
        threshold: 0.0,
        detail,
        runtime: start.elapsed(),
        budget: None,
    });
    Ok(outcomes)
}

fn run_audit(cfg: &RunConfig, hash: &str) -> Result<CommandOutput> {
    let outcomes = audit_outcomes(cfg)?;
    for o in &outcomes {
        println!("{}", o.line());
    }
    let all = outcomes.iter().all(|o| o.passed);
    let summary = json!({
        "passed": outcomes.iter().filter(|o| o.passed).count(),
        "failed": outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect::<Vec<_>>(),
        "total": outcomes.len()
    });
    Ok(CommandOutput { artifacts: audit_artifacts(&outcomes, hash)?, summary, status: if all { 0 } else { 3 } })
}

/// Writes artifacts into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            fs::write(&path, &a.bytes)?;
            Ok(path)
        })
        .collect()
}

/// Exit status for an error: `1` for invalid input, `2` for numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        1
    } else {
        2
    }
}

/// Machine-readable error report.
pub fn error_json(err: &Error) -> Value {
    json!({"error": err.kind(), "message": err.to_string(), "exit_code": exit_code(err)})
}

/// Parses arguments, runs the command, writes artifacts and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let message = e.render().to_string();
            eprintln!("{}", json!({"error": "usage", "message": message.trim_end(), "exit_code": 1}));
            return 1;
        }
        Err(e) => {
            let _ = e.print();
            return 0;
        }
    };
    match run_cli(&cli) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

fn run_cli(cli: &Cli) -> Result<i32> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Error::InvalidParameter("--threads must be positive".into()));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let cfg = resolve_config(cli)?;
    let output = execute(&cli.command, &cfg, Some(&cli.out))?;
    let paths = write_artifacts(&cli.out, &output.artifacts)?;
    let report = json!({
        "command": cli.command.name(),
        "config_hash": cfg.hash(),
        "artifacts": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "summary": output.summary
    });
    println!("{}", if matches!(cli.command, Command::Bootstrap) { output.summary.clone() } else { report });
    Ok(output.status)
}
