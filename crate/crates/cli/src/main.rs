//! `cnls`: construct the synchronized branch of the n-component coupled
//! cubic system, locate its bifurcation points, continue the bifurcating
//! bipartition branches, and export diagram data.

mod config;
mod records;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use cnls_core as core;
use cnls_core::{
    BipartitionSystem, ContinuationSettings, CouplingConfig, DomainSpec, GeneralConfig,
    GroundState, Mesh, Partition, WeightedSpectrum,
};
use config::{Format, RunConfig};
use records::{BranchRecord, ExclusionRecord, PointRecord};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cnls",
    version,
    about = "Bifurcation diagrams for n-component coupled cubic elliptic systems"
)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output formats, comma separated: csv,json.
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Self-couplings mu_1,...,mu_n (n >= 3).
    #[arg(long, global = true, allow_hyphen_values = true)]
    mu: Option<String>,
    #[arg(long = "mesh-points", global = true)]
    mesh_points: Option<usize>,
    /// Interval length L.
    #[arg(long, global = true)]
    length: Option<f64>,
    /// Ball radius R (with --dimension).
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long, global = true)]
    dimension: Option<u8>,
    #[arg(long = "k-max", global = true)]
    k_max: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the positive scalar ground state and certify nondegeneracy.
    GroundState {
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Eigenvalues of the ground-state-weighted problem.
    Spectrum,
    /// Sample the synchronized solution branch.
    Branch {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Locate and classify all bifurcation points on the branch.
    Bifurcations,
    /// Continue bipartition branches from one bifurcation point.
    Continue {
        /// Which bifurcation point to branch from (0 = leftmost).
        #[arg(long = "bifurcation-index", default_value_t = 0)]
        index: usize,
        /// Bipartition A-sets like "1;2;1,2" (1-based; default: all).
        #[arg(long = "branch-sets")]
        branch_sets: Option<String>,
    },
    /// Evaluate the positive-solution nonexistence criteria.
    Nonexistence {
        /// Linear coefficients a_1,...,a_n (default: all -1).
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        /// Principal eigenvalue override (default: computed from the mesh).
        #[arg(long, allow_hyphen_values = true)]
        lambda1: Option<f64>,
    },
    /// Full pipeline: points, branches, exclusions, metadata.
    Diagram,
}

enum CliError {
    Config(anyhow::Error),
    Solver(anyhow::Error),
    Io(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Solver(_) => ExitCode::from(3),
            CliError::Io(_) => ExitCode::from(1),
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(e) => format!("configuration error: {e:#}"),
            CliError::Solver(e) => format!("solver error: {e:#}"),
            CliError::Io(e) => format!("io error: {e:#}"),
        }
    }
}

fn core_err(e: core::Error) -> CliError {
    match &e {
        core::Error::InvalidDomain(_)
        | core::Error::InvalidConfig(_)
        | core::Error::InvalidPartition(_)
        | core::Error::InvalidBeta { .. } => CliError::Config(anyhow!(e)),
        _ => CliError::Solver(anyhow!(e)),
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cnls: {}", e.message());
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    // flag overrides
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(fmt) = &cli.format {
        cfg.formats = config::parse_formats(fmt).map_err(CliError::Config)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(mu) = &cli.mu {
        cfg.mu = config::parse_float_list(mu).map_err(CliError::Config)?;
    }
    if let Some(m) = cli.mesh_points {
        cfg.mesh_points = m;
    }
    if let Some(length) = cli.length {
        cfg.domain = DomainSpec::Interval { length };
    }
    if let Some(radius) = cli.radius {
        cfg.domain = DomainSpec::Ball {
            radius,
            dimension: cli.dimension.unwrap_or(3),
        };
    }
    if let Some(k) = cli.k_max {
        cfg.k_max = k;
    }
    cfg.validate().map_err(CliError::Config)?;

    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("create {}", cfg.out_dir.display()))
        .map_err(CliError::Io)?;

    match cli.command {
        Command::GroundState { tol } => {
            if let Some(t) = tol {
                cfg.ground_tol = t;
            }
            cmd_ground_state(&cfg)
        }
        Command::Spectrum => cmd_spectrum(&cfg),
        Command::Branch { samples } => {
            if let Some(s) = samples {
                cfg.branch_samples = s;
            }
            cmd_branch(&cfg)
        }
        Command::Bifurcations => cmd_bifurcations(&cfg),
        Command::Continue { index, branch_sets } => {
            if let Some(sets) = branch_sets {
                cfg.branch_sets = Some(parse_branch_sets_flag(&sets).map_err(CliError::Config)?);
            }
            cmd_continue(&cfg, index)
        }
        Command::Nonexistence { a, beta, lambda1 } => {
            if let Some(a) = &a {
                cfg.a = Some(config::parse_float_list(a).map_err(CliError::Config)?);
            }
            if let Some(b) = beta {
                cfg.beta = Some(b);
            }
            if let Some(l1) = lambda1 {
                cfg.lambda1 = Some(l1);
            }
            cfg.validate().map_err(CliError::Config)?;
            cmd_nonexistence(&cfg)
        }
        Command::Diagram => cmd_diagram(&cfg),
    }
}

fn parse_branch_sets_flag(s: &str) -> anyhow::Result<Vec<Vec<usize>>> {
    s.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|set| {
            set.split(',')
                .map(|t| {
                    let v: usize = t.trim().parse().context("bad component index")?;
                    anyhow::ensure!(v >= 1, "component indices are 1-based");
                    Ok(v - 1)
                })
                .collect()
        })
        .collect()
}

// ---- shared pipeline stages ----

struct Pipeline {
    mesh: Mesh,
    ground: GroundState,
}

fn build_mesh(cfg: &RunConfig) -> CliResult<Mesh> {
    core::build_mesh(cfg.domain, cfg.mesh_points).map_err(core_err)
}

fn solve_ground(cfg: &RunConfig, mesh: &Mesh) -> CliResult<GroundState> {
    core::solve_omega(mesh, cfg.ground_tol).map_err(core_err)
}

fn pipeline(cfg: &RunConfig) -> CliResult<Pipeline> {
    let mesh = build_mesh(cfg)?;
    let ground = solve_ground(cfg, &mesh)?;
    Ok(Pipeline { mesh, ground })
}

fn spectrum_of(cfg: &RunConfig, p: &Pipeline) -> CliResult<WeightedSpectrum> {
    core::compute_spectrum(&p.mesh, &p.ground, cfg.k_max, cfg.cluster_tol).map_err(core_err)
}

fn coupling_of(cfg: &RunConfig) -> CliResult<CouplingConfig> {
    CouplingConfig::new(cfg.mu.clone()).map_err(core_err)
}

fn continuation_settings(cfg: &RunConfig, ground: &GroundState) -> ContinuationSettings {
    let mut settings = ContinuationSettings {
        ds: cfg.ds,
        ds_min: cfg.ds_min,
        ds_max: cfg.ds_max,
        corrector_tol: cfg.corrector_tol,
        max_steps: cfg.max_steps,
        max_corrector_iters: cfg.max_corrector_iters,
        ..Default::default()
    }
    .with_kick_for(ground);
    if let Some(kick) = cfg.kick_amplitude {
        settings.kick_amplitude = kick;
    }
    settings
}

#[derive(Serialize)]
struct MeshMeta {
    kind: String,
    points: usize,
    spacing: f64,
}

#[derive(Serialize)]
struct Meta {
    version: String,
    command: String,
    seed: u64,
    mesh: MeshMeta,
    tolerances: BTreeMap<String, f64>,
    config: BTreeMap<String, String>,
}

fn write_meta(cfg: &RunConfig, mesh: Option<&Mesh>, command: &str) -> CliResult<()> {
    let mesh_meta = match (mesh, cfg.domain) {
        (Some(m), DomainSpec::Interval { .. }) => MeshMeta {
            kind: "interval".into(),
            points: m.len(),
            spacing: m.spacing,
        },
        (Some(m), DomainSpec::Ball { .. }) => MeshMeta {
            kind: "ball".into(),
            points: m.len(),
            spacing: m.spacing,
        },
        (None, _) => MeshMeta {
            kind: "none".into(),
            points: 0,
            spacing: 0.0,
        },
    };
    let mut tolerances = BTreeMap::new();
    tolerances.insert("ground_state.tol".into(), cfg.ground_tol);
    tolerances.insert("spectrum.cluster_tol".into(), cfg.cluster_tol);
    tolerances.insert("continuation.corrector_tol".into(), cfg.corrector_tol);
    let meta = Meta {
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: cfg.seed,
        mesh: mesh_meta,
        tolerances,
        config: cfg.echo(),
    };
    records::write_json(&cfg.out_dir.join("meta.json"), &meta).map_err(CliError::Io)
}

// ---- subcommands ----

#[derive(Serialize)]
struct GroundStateReport {
    lambda1: f64,
    residual_norm: f64,
    nondegeneracy_margin: f64,
    omega_max: f64,
    nodes: Vec<f64>,
    omega: Vec<f64>,
}

fn cmd_ground_state(cfg: &RunConfig) -> CliResult<()> {
    let p = pipeline(cfg)?;
    let omega_max = p.ground.omega.iter().cloned().fold(0.0f64, f64::max);
    println!(
        "ground state: Lambda_1 = {:.12}, residual = {:.3e}, nondegeneracy margin = {:.6e}, max omega = {:.12}",
        p.ground.lambda1, p.ground.residual_norm, p.ground.nondegeneracy_margin, omega_max
    );
    let report = GroundStateReport {
        lambda1: p.ground.lambda1,
        residual_norm: p.ground.residual_norm,
        nondegeneracy_margin: p.ground.nondegeneracy_margin,
        omega_max,
        nodes: p.mesh.nodes.clone(),
        omega: p.ground.omega.clone(),
    };
    records::write_json(&cfg.out_dir.join("ground_state.json"), &report).map_err(CliError::Io)?;
    write_meta(cfg, Some(&p.mesh), "ground-state")
}

#[derive(Serialize)]
struct SpectrumReport {
    eigenvalues: Vec<f64>,
    multiplicities: Vec<usize>,
    k0: usize,
    cluster_tol: f64,
    ambiguous_clusters: Vec<(usize, f64)>,
}

fn cmd_spectrum(cfg: &RunConfig) -> CliResult<()> {
    let p = pipeline(cfg)?;
    let sp = spectrum_of(cfg, &p)?;
    println!(
        "lambda_1 = {} (lambda_1 + 1 = {:.3e})",
        records::fmt_f64(sp.eigenvalues[0]),
        sp.eigenvalues[0] + 1.0
    );
    for (i, (l, m)) in sp
        .eigenvalues
        .iter()
        .zip(&sp.multiplicities)
        .enumerate()
        .skip(1)
    {
        println!(
            "lambda_{} = {} (n_{} = {})",
            i + 1,
            records::fmt_f64(*l),
            i + 1,
            m
        );
    }
    let report = SpectrumReport {
        eigenvalues: sp.eigenvalues.clone(),
        multiplicities: sp.multiplicities.clone(),
        k0: sp.k0,
        cluster_tol: sp.cluster_tol,
        ambiguous_clusters: sp.ambiguous_clusters.clone(),
    };
    records::write_json(&cfg.out_dir.join("spectrum.json"), &report).map_err(CliError::Io)?;
    write_meta(cfg, Some(&p.mesh), "spectrum")
}

fn branch_records_for_sync(
    cfg: &RunConfig,
    p: &Pipeline,
    coupling: &CouplingConfig,
) -> CliResult<Vec<BranchRecord>> {
    let intervals = core::branch_interval(coupling).map_err(core_err)?;
    let stiffness = core::assemble(&p.mesh, core::Descriptor::Stiffness);
    let label = records::partition_label(&Partition::single_block(coupling.n()));
    let mut out = Vec::new();
    let mut step = 0usize;
    let per_interval = (cfg.branch_samples / intervals.len()).max(2);
    for iv in &intervals {
        let standoff = 1e-4 * (1.0 + iv.hi.abs());
        let hi = iv.hi - standoff;
        let lo = if iv.lo.is_finite() {
            iv.lo + 1e-4 * (1.0 + iv.lo.abs())
        } else {
            iv.hi - 5.0 * (1.0 + iv.hi.abs())
        };
        if lo >= hi {
            continue;
        }
        for i in 0..per_interval {
            let beta = lo + (hi - lo) * i as f64 / (per_interval - 1) as f64;
            let point = match core::branch_point(coupling, beta) {
                Ok(pt) => pt,
                Err(_) => continue,
            };
            let u: Vec<Vec<f64>> = point
                .alphas
                .iter()
                .map(|a| p.ground.omega.iter().map(|o| a * o).collect())
                .collect();
            let residuals = core::full_system_residual(&p.mesh, &stiffness, coupling, beta, &u);
            let residual = residuals
                .iter()
                .map(|r| p.mesh.inner(r, r))
                .sum::<f64>()
                .sqrt();
            out.push(BranchRecord {
                branch_id: "T".into(),
                partition: label.clone(),
                step,
                beta,
                norms: u.iter().map(|c| p.mesh.norm_l2(c)).collect(),
                mins: u
                    .iter()
                    .map(|c| c.iter().cloned().fold(f64::INFINITY, f64::min))
                    .collect(),
                residual,
            });
            step += 1;
        }
    }
    Ok(out)
}

// branches.csv and points.json are the canonical outputs; the other format
// gates the mirror files
fn write_branches(cfg: &RunConfig, records_list: &[BranchRecord], n: usize) -> CliResult<()> {
    let csv = records::branches_csv(records_list, n);
    std::fs::write(cfg.out_dir.join("branches.csv"), csv)
        .context("write branches.csv")
        .map_err(CliError::Io)?;
    if cfg.formats.contains(&Format::Json) {
        records::write_json(&cfg.out_dir.join("branches.json"), &records_list)
            .map_err(CliError::Io)?;
    }
    Ok(())
}

fn cmd_branch(cfg: &RunConfig) -> CliResult<()> {
    let p = pipeline(cfg)?;
    let coupling = coupling_of(cfg)?;
    let recs = branch_records_for_sync(cfg, &p, &coupling)?;
    println!("sampled {} synchronized branch points", recs.len());
    write_branches(cfg, &recs, coupling.n())?;
    write_meta(cfg, Some(&p.mesh), "branch")
}

fn detect_points(
    cfg: &RunConfig,
    p: &Pipeline,
) -> CliResult<(
    CouplingConfig,
    WeightedSpectrum,
    Vec<core::BifurcationPoint>,
)> {
    let coupling = coupling_of(cfg)?;
    let sp = spectrum_of(cfg, p)?;
    let points = core::find_bifurcations(&coupling, &sp).map_err(core_err)?;
    Ok((coupling, sp, points))
}

fn write_points(cfg: &RunConfig, points: &[core::BifurcationPoint]) -> CliResult<()> {
    let recs: Vec<PointRecord> = points.iter().map(PointRecord::from).collect();
    records::write_json(&cfg.out_dir.join("points.json"), &recs).map_err(CliError::Io)?;
    if cfg.formats.contains(&Format::Csv) {
        std::fs::write(cfg.out_dir.join("points.csv"), records::points_csv(&recs))
            .context("write points.csv")
            .map_err(CliError::Io)?;
    }
    Ok(())
}

fn cmd_bifurcations(cfg: &RunConfig) -> CliResult<()> {
    let p = pipeline(cfg)?;
    let (_, _, points) = detect_points(cfg, &p)?;
    println!("found {} bifurcation points", points.len());
    for pt in &points {
        println!(
            "  beta_{} = {} (lambda = {}, kernel dim {}, degenerate: {})",
            pt.k,
            records::fmt_f64(pt.beta_k),
            records::fmt_f64(pt.lambda_k),
            pt.kernel_dim,
            pt.degenerate
        );
    }
    write_points(cfg, &points)?;
    write_meta(cfg, Some(&p.mesh), "bifurcations")
}

fn bipartitions_for(cfg: &RunConfig, n: usize) -> CliResult<Vec<Partition>> {
    match &cfg.branch_sets {
        Some(sets) => sets
            .iter()
            .map(|a| Partition::bipartition(a, n).map_err(core_err))
            .collect(),
        None => Ok(core::enumerate_bipartitions(n)),
    }
}

fn continue_from(
    cfg: &RunConfig,
    p: &Pipeline,
    coupling: &CouplingConfig,
    sp: &WeightedSpectrum,
    origin: &core::BifurcationPoint,
    branch_counter: &mut usize,
    records_out: &mut Vec<BranchRecord>,
) -> CliResult<()> {
    let settings = continuation_settings(cfg, &p.ground);
    for partition in bipartitions_for(cfg, coupling.n())? {
        let system =
            BipartitionSystem::new(&p.mesh, coupling, partition.clone()).map_err(core_err)?;
        let predictor =
            core::branch_switch(&system, origin, &p.ground, sp, &settings).map_err(core_err)?;
        let segment = core::continue_branch(&system, &predictor, &settings).map_err(core_err)?;
        *branch_counter += 1;
        let branch_id = format!("S{}", branch_counter);
        let label = records::partition_label(&partition);
        println!(
            "branch {branch_id} ({label}) from beta_{} = {:.9}: {} points, termination {:?}, folds {}",
            origin.k,
            origin.beta_k,
            segment.points.len(),
            segment.termination,
            segment.folds_passed
        );
        for (step_idx, step) in segment.points.iter().enumerate() {
            let lifted = core::lift_step(coupling, &partition, step).map_err(core_err)?;
            records_out.push(BranchRecord {
                branch_id: branch_id.clone(),
                partition: label.clone(),
                step: step_idx,
                beta: step.beta,
                norms: lifted.iter().map(|c| p.mesh.norm_l2(c)).collect(),
                mins: lifted
                    .iter()
                    .map(|c| c.iter().cloned().fold(f64::INFINITY, f64::min))
                    .collect(),
                residual: step.residual_norm,
            });
        }
    }
    Ok(())
}

fn cmd_continue(cfg: &RunConfig, index: usize) -> CliResult<()> {
    let p = pipeline(cfg)?;
    let (coupling, sp, points) = detect_points(cfg, &p)?;
    if points.is_empty() {
        return Err(CliError::Solver(anyhow!("no bifurcation points found")));
    }
    let origin = points.get(index).ok_or_else(|| {
        CliError::Config(anyhow!(
            "--bifurcation-index {index} out of range: {} points",
            points.len()
        ))
    })?;
    let mut counter = 0usize;
    let mut recs = Vec::new();
    continue_from(cfg, &p, &coupling, &sp, origin, &mut counter, &mut recs)?;
    write_points(cfg, &points)?;
    write_branches(cfg, &recs, coupling.n())?;
    write_meta(cfg, Some(&p.mesh), "continue")
}

#[derive(Serialize)]
struct FiringReport {
    criterion: String,
    witness: Option<Vec<usize>>,
    boundary_marginal: Option<bool>,
}

#[derive(Serialize)]
struct VerdictReport {
    fired: Vec<FiringReport>,
    beta_bar: Option<f64>,
    beta: f64,
    lambda1: f64,
}

fn exclusion_intervals(a: &[f64], mu: &[f64], lambda1: f64) -> CliResult<Vec<ExclusionRecord>> {
    let n = mu.len();
    let mut out = Vec::new();
    if a.iter()
        .zip(mu)
        .any(|(aj, mj)| *aj <= -lambda1 && *mj > 0.0)
    {
        out.push(ExclusionRecord {
            criterion: "i".into(),
            beta_lo: Some(0.0),
            beta_hi: None,
        });
    }
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if a[j] <= a[i] && mu[i] < mu[j] {
                pairs.push((mu[i], mu[j]));
            }
        }
    }
    pairs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in pairs {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    for (lo, hi) in merged {
        out.push(ExclusionRecord {
            criterion: "ii".into(),
            beta_lo: Some(lo),
            beta_hi: Some(hi),
        });
    }
    if mu[0] > 0.0 && a.iter().all(|aj| *aj <= -lambda1) {
        let coupling = CouplingConfig::new(mu.to_vec()).map_err(core_err)?;
        let bb = core::beta_bar(&coupling).map_err(core_err)?;
        out.push(ExclusionRecord {
            criterion: "iii".into(),
            beta_lo: Some(bb),
            beta_hi: None,
        });
    }
    if mu[0] <= 0.0 && mu[n - 1] >= 0.0 && a[n - 1] <= a[0] && a[0] <= -lambda1 {
        out.push(ExclusionRecord {
            criterion: "iv".into(),
            beta_lo: Some(mu[0]),
            beta_hi: None,
        });
    }
    Ok(out)
}

fn resolved_lambda1(cfg: &RunConfig) -> CliResult<f64> {
    if let Some(l1) = cfg.lambda1 {
        return Ok(l1);
    }
    let mesh = build_mesh(cfg)?;
    let s = core::assemble(&mesh, core::Descriptor::Stiffness);
    let m = core::assemble(&mesh, core::Descriptor::Mass);
    Ok(core::principal_eigenpair(&s, &m).map_err(core_err)?.0)
}

fn cmd_nonexistence(cfg: &RunConfig) -> CliResult<()> {
    let beta = cfg
        .beta
        .ok_or_else(|| CliError::Config(anyhow!("nonexistence needs --beta")))?;
    let a = cfg.a.clone().unwrap_or_else(|| vec![-1.0; cfg.mu.len()]);
    let lambda1 = resolved_lambda1(cfg)?;
    let general = GeneralConfig::new(a.clone(), cfg.mu.clone(), beta, lambda1).map_err(core_err)?;
    let verdict = core::evaluate(&general);
    let fired: Vec<FiringReport> = verdict
        .fired
        .iter()
        .map(|f| match f {
            core::Firing::I { j } => FiringReport {
                criterion: "i".into(),
                witness: Some(vec![*j]),
                boundary_marginal: None,
            },
            core::Firing::II { i, j } => FiringReport {
                criterion: "ii".into(),
                witness: Some(vec![*i, *j]),
                boundary_marginal: None,
            },
            core::Firing::III { boundary_marginal } => FiringReport {
                criterion: "iii".into(),
                witness: None,
                boundary_marginal: Some(*boundary_marginal),
            },
            core::Firing::IV => FiringReport {
                criterion: "iv".into(),
                witness: None,
                boundary_marginal: None,
            },
        })
        .collect();
    let report = VerdictReport {
        fired,
        beta_bar: verdict.beta_bar,
        beta,
        lambda1,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report)
            .context("serialize verdict")
            .map_err(CliError::Io)?
    );
    records::write_json(&cfg.out_dir.join("verdict.json"), &report).map_err(CliError::Io)?;
    let exclusions = exclusion_intervals(general.a(), general.mu(), lambda1)?;
    records::write_json(&cfg.out_dir.join("exclusions.json"), &exclusions).map_err(CliError::Io)?;
    write_meta(cfg, None, "nonexistence")
}

fn cmd_diagram(cfg: &RunConfig) -> CliResult<()> {
    let p = pipeline(cfg)?;
    let (coupling, sp, points) = detect_points(cfg, &p)?;
    println!(
        "{} bifurcation points on the synchronized branch",
        points.len()
    );
    write_points(cfg, &points)?;

    let mut recs = branch_records_for_sync(cfg, &p, &coupling)?;
    let mut counter = 0usize;
    let origins: Vec<&core::BifurcationPoint> = points
        .iter()
        .filter(|pt| !pt.degenerate && pt.n_k == 1)
        .take(cfg.max_bifurcations)
        .collect();
    for origin in origins {
        continue_from(cfg, &p, &coupling, &sp, origin, &mut counter, &mut recs)?;
    }
    write_branches(cfg, &recs, coupling.n())?;

    let a = cfg.a.clone().unwrap_or_else(|| vec![-1.0; coupling.n()]);
    let lambda1 = cfg.lambda1.unwrap_or(p.ground.lambda1);
    let general = GeneralConfig::new(a, coupling.mu().to_vec(), 0.0, lambda1).map_err(core_err)?;
    let exclusions = exclusion_intervals(general.a(), general.mu(), lambda1)?;
    records::write_json(&cfg.out_dir.join("exclusions.json"), &exclusions).map_err(CliError::Io)?;
    write_meta(cfg, Some(&p.mesh), "diagram")
}
