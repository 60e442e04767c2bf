//! Experiment runner behind the CLI: every subcommand is a library function
//! so outputs (and their determinism) are testable without spawning the
//! binary. All CSV files start with `# config_sha256` / `# seed` comment
//! lines followed by a named-column header; a JSON manifest records the
//! run metadata.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::bounds;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fem::{self, Mesh};
use crate::norms;
use crate::signchanging::{self, PiecewiseScalarField};
use crate::uq::{self, ProjectionVariant, Reference};

/// Grid density for pointwise coefficient checks (sup norms, coercivity).
const GRID: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Solve,
    Poincare,
    InverseNorm,
    Convergence,
    McMoments,
    McFemError,
    Bounds,
    SignChanging,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Solve => "solve",
            Subcommand::Poincare => "poincare",
            Subcommand::InverseNorm => "inverse-norm",
            Subcommand::Convergence => "convergence",
            Subcommand::McMoments => "mc-moments",
            Subcommand::McFemError => "mc-fem-error",
            Subcommand::Bounds => "bounds",
            Subcommand::SignChanging => "sign-changing",
        }
    }
}

/// Parsed configuration plus provenance for one run.
pub struct RunContext {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunContext {
    /// Parse the config text, apply the optional seed override (which
    /// replaces both the model seed and the experiment seed), and resolve
    /// the output directory (`out_override` wins over `[output] dir`).
    pub fn new(
        config_text: &str,
        seed_override: Option<u64>,
        out_override: Option<&Path>,
    ) -> Result<Self> {
        let mut config = ExperimentConfig::parse(config_text)?;
        let config_hash = hex_digest(config_text.as_bytes());
        if let Some(s) = seed_override {
            if let Some(m) = &mut config.model {
                m.seed = s;
            }
            config.experiment.seed = s;
        }
        let seed = config.model.as_ref().map(|m| m.seed).unwrap_or(config.experiment.seed);
        let out_dir = out_override
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from(&config.output.dir));
        Ok(Self { config, config_hash, seed, out_dir })
    }

    fn meshes(&self) -> Result<Vec<Mesh<f64>>> {
        let dom = self.config.domain()?;
        self.config
            .mesh_schedule()
            .iter()
            .map(|&n| fem::build_mesh(&dom, n, self.config.mesh.degree))
            .collect()
    }

    fn base_mesh(&self) -> Result<Mesh<f64>> {
        let dom = self.config.domain()?;
        fem::build_mesh(&dom, self.config.mesh.n_per_subdomain, self.config.mesh.degree)
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

/// Shortest round-trip decimal for a float; stable across runs.
fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_csv(
    ctx: &RunContext,
    name: &str,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<PathBuf> {
    let mut body = String::new();
    body.push_str(&format!("# config_sha256 = {}\n", ctx.config_hash));
    body.push_str(&format!("# seed = {}\n", ctx.seed));
    body.push_str(&columns.join(","));
    body.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        body.push_str(&row.join(","));
        body.push('\n');
    }
    let path = ctx.out_dir.join(name);
    fs::write(&path, body)?;
    Ok(path)
}

/// Outcome of a run: the files written plus structured extras (fits,
/// chosen exponents, warnings) that also land in the manifest.
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub extra: serde_json::Value,
}

/// Execute one subcommand and write its artifacts plus `run.json`.
pub fn run(sub: Subcommand, ctx: &RunContext) -> Result<RunSummary> {
    fs::create_dir_all(&ctx.out_dir)?;
    let started = Instant::now();
    let mut summary = match sub {
        Subcommand::Solve => run_solve(ctx)?,
        Subcommand::Poincare => run_poincare(ctx)?,
        Subcommand::InverseNorm => run_inverse_norm(ctx)?,
        Subcommand::Convergence => run_convergence(ctx)?,
        Subcommand::McMoments => run_mc_moments(ctx)?,
        Subcommand::McFemError => run_mc_fem_error(ctx)?,
        Subcommand::Bounds => run_bounds(ctx)?,
        Subcommand::SignChanging => run_sign_changing(ctx)?,
    };
    let manifest = json!({
        "subcommand": sub.name(),
        "config_sha256": ctx.config_hash,
        "seed": ctx.seed,
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_ms": started.elapsed().as_millis() as u64,
        "outputs": summary
            .outputs
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect::<Vec<_>>(),
        "details": summary.extra,
    });
    let manifest_path = ctx.out_dir.join("run.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    summary.outputs.push(manifest_path);
    Ok(summary)
}

fn run_solve(ctx: &RunContext) -> Result<RunSummary> {
    let a = ctx.config.coefficients()?;
    let data = ctx.config.data()?;
    let mesh = ctx.base_mesh()?;
    let u = fem::solve_transmission(&a, &data, &mesh)?;

    let mut rows = Vec::new();
    let dom = &mesh.dom;
    for j in 0..dom.n_subdomains() {
        let (lo, hi) = dom.subdomain(j + 1);
        let npts = ctx.config.mesh.n_per_subdomain * mesh.degree;
        for i in 0..=npts {
            let x = lo + (hi - lo) * (i as f64) / (npts as f64);
            // approach the point from inside the subdomain
            let from_left = i > 0;
            let val = u.eval(x, 0, from_left)?;
            let dval = u.eval(x, 1, from_left)?;
            rows.push(vec![fmt(x), j.to_string(), fmt(val), fmt(dval)]);
        }
    }
    let solution = write_csv(ctx, "solution.csv", &["x", "subdomain", "u", "du"], &rows)?;

    let report = fem::conormal_jump(&a, &u, &mesh)?;
    let mut crows = vec![
        vec!["left_boundary".into(), fmt(report.d_nu_left)],
        vec!["right_boundary".into(), fmt(report.d_nu_right)],
    ];
    for (i, &j) in report.interface_jumps.iter().enumerate() {
        crows.push(vec![format!("interface_{i}"), fmt(j)]);
    }
    let conormal = write_csv(ctx, "conormal.csv", &["location", "value"], &crows)?;
    Ok(RunSummary {
        outputs: vec![solution, conormal],
        extra: json!({ "h1_norm": u.h1_norm(), "dim_sn": mesh.dim_sn() }),
    })
}

fn run_poincare(ctx: &RunContext) -> Result<RunSummary> {
    let mut rows = Vec::new();
    let mut last = f64::NAN;
    for mesh in ctx.meshes()? {
        let eta = norms::poincare_constant(&mesh)?;
        rows.push(vec![mesh.n_per_subdomain.to_string(), mesh.dim_sn().to_string(), fmt(eta)]);
        last = eta;
    }
    let path = write_csv(ctx, "poincare.csv", &["n_per_subdomain", "dim_sn", "eta"], &rows)?;
    Ok(RunSummary { outputs: vec![path], extra: json!({ "eta_finest": last }) })
}

fn run_inverse_norm(ctx: &RunContext) -> Result<RunSummary> {
    let a = ctx.config.coefficients()?;
    let k = ctx.config.experiment.k;
    if !(0..=1).contains(&k) {
        return Err(Error::Validation("inverse-norm supports k in {0, 1}".into()));
    }
    let gamma = a.coercivity_constant(GRID).gamma_full;
    let mut rows = Vec::new();
    for mesh in ctx.meshes()? {
        let value = norms::discrete_inverse_norm(&a, &mesh, k as usize)?;
        rows.push(vec![
            k.to_string(),
            mesh.n_per_subdomain.to_string(),
            mesh.dim_sn().to_string(),
            fmt(value),
            fmt(gamma),
            fmt(1.0 / gamma),
        ]);
    }
    let path = write_csv(
        ctx,
        "inverse_norm.csv",
        &["k", "n_per_subdomain", "dim_sn", "inverse_norm", "gamma_full", "coercivity_bound"],
        &rows,
    )?;
    Ok(RunSummary { outputs: vec![path], extra: json!({}) })
}

fn run_convergence(ctx: &RunContext) -> Result<RunSummary> {
    let a = ctx.config.coefficients()?;
    let data = ctx.config.data()?;
    let meshes = ctx.meshes()?;
    if meshes.len() < 2 {
        return Err(Error::Validation(
            "convergence needs mesh.refinements >= 2 for a rate fit".into(),
        ));
    }
    let reference = Reference::FineSolve { factor: ctx.config.experiment.fine_factor };
    let errs = uq::projection_errors(&a, &data, &reference, &meshes, ProjectionVariant::H1)?;
    let rows: Vec<Vec<String>> = errs
        .iter()
        .map(|&(dim, e)| vec![dim.to_string(), fmt(e)])
        .collect();
    let path = write_csv(ctx, "convergence.csv", &["dim_sn", "h1_error"], &rows)?;
    let dims: Vec<usize> = errs.iter().map(|&(d, _)| d).collect();
    let vals: Vec<f64> = errs.iter().map(|&(_, e)| e).collect();
    let fit = uq::fit_log_log(&dims, &vals)?;
    Ok(RunSummary {
        outputs: vec![path],
        extra: json!({ "fit": { "c_rate": fit.c_rate, "mu": fit.mu, "residual": fit.residual } }),
    })
}

fn run_mc_moments(ctx: &RunContext) -> Result<RunSummary> {
    let model = ctx.config.model()?;
    let hyp = model.validate_hypotheses(GRID);
    if !hyp.all_ok() {
        return Err(Error::Validation(format!(
            "log-normal model hypotheses violated: {}",
            hyp.failures.join("; ")
        )));
    }
    let e = &ctx.config.experiment;
    let mesh = ctx.base_mesh()?;
    let report = uq::mc_moment(&model, e.p, e.r, e.s, e.k, e.n_samples, &mesh, GRID)?;
    let mut rows: Vec<Vec<String>> = report
        .batches
        .iter()
        .map(|&(n, m, se)| vec!["batch".into(), n.to_string(), fmt(m), fmt(se)])
        .collect();
    rows.push(vec![
        "final".into(),
        report.n_samples.to_string(),
        fmt(report.mean),
        fmt(report.stderr),
    ]);
    let path = write_csv(ctx, "moments.csv", &["kind", "n", "mean", "stderr"], &rows)?;
    Ok(RunSummary {
        outputs: vec![path],
        extra: json!({
            "label": report.label,
            "n_excluded": report.n_excluded,
            "heavy_tail_warning": report.heavy_tail_warning,
        }),
    })
}

fn run_mc_fem_error(ctx: &RunContext) -> Result<RunSummary> {
    let model = ctx.config.model()?;
    let data = ctx.config.data()?;
    let e = &ctx.config.experiment;
    let meshes = ctx.meshes()?;
    let variant = if e.energy_projection { ProjectionVariant::Energy } else { ProjectionVariant::H1 };
    let reference = Reference::FineSolve { factor: e.fine_factor };
    let rows_data =
        uq::mc_fem_error_moment(&model, &data, e.p, &meshes, e.n_samples, variant, &reference, GRID)?;
    let rows: Vec<Vec<String>> = rows_data
        .iter()
        .map(|r| {
            vec![r.dim_sn.to_string(), fmt(r.moment), fmt(r.stderr), r.n_excluded.to_string()]
        })
        .collect();
    let path = write_csv(
        ctx,
        "fem_error_moments.csv",
        &["dim_sn", "moment", "stderr", "n_excluded"],
        &rows,
    )?;
    let dims: Vec<usize> = rows_data.iter().map(|r| r.dim_sn).collect();
    let vals: Vec<f64> = rows_data.iter().map(|r| r.moment).collect();
    let fit = uq::fit_log_log(&dims, &vals)?;
    Ok(RunSummary {
        outputs: vec![path],
        extra: json!({
            "p": e.p,
            "variant": if e.energy_projection { "energy" } else { "h1" },
            "fit": { "c_rate": fit.c_rate, "mu": fit.mu, "residual": fit.residual },
        }),
    })
}

fn run_bounds(ctx: &RunContext) -> Result<RunSummary> {
    let dom = ctx.config.domain()?;
    let e = &ctx.config.experiment;
    let k = e.k;
    if !(0..=1).contains(&k) {
        return Err(Error::Validation("bounds supports k in {0, 1}".into()));
    }
    let mesh = ctx.base_mesh()?;
    let mut rows = Vec::new();
    let mut env_rows = Vec::new();
    for case in 0..e.cases {
        let seed = e.seed.wrapping_add(case as u64);
        let a = bounds::random_coefficient_field(&dom, 1, 0.2, seed);
        let u = bounds::random_solution(&dom, 3, seed);
        let rep = bounds::jk_report(&a, &u, k as usize, &mesh)?;
        rows.push(vec![
            case.to_string(),
            rep.k.to_string(),
            fmt(rep.gamma),
            fmt(rep.a_norm),
            fmt(rep.lhs),
            fmt(rep.rhs),
            fmt(rep.ratio),
        ]);
        // the k = 0 envelope compares level-1 norms, which need quadratics
        let env_ks: &[i64] = if ctx.config.mesh.degree >= 2 { &[-1, 0] } else { &[-1] };
        for &env_k in env_ks {
            let env = bounds::inverse_norm_envelope(&a, env_k, &mesh)?;
            env_rows.push(vec![
                case.to_string(),
                env.k.to_string(),
                env.k_exponent.to_string(),
                fmt(env.lhs),
                fmt(env.rhs),
                fmt(env.ratio),
            ]);
        }
    }
    let max_ratio = rows
        .iter()
        .map(|r| r[6].parse::<f64>().unwrap())
        .fold(0.0f64, f64::max);
    let bounds_path = write_csv(
        ctx,
        "bounds.csv",
        &["case", "k", "gamma_full", "a_norm", "lhs", "rhs", "ratio"],
        &rows,
    )?;
    let env_path = write_csv(
        ctx,
        "envelope.csv",
        &["case", "k", "k_exponent", "lhs", "rhs", "ratio"],
        &env_rows,
    )?;
    Ok(RunSummary {
        outputs: vec![bounds_path, env_path],
        extra: json!({ "corpus_constant": max_ratio, "cases": e.cases }),
    })
}

fn run_sign_changing(ctx: &RunContext) -> Result<RunSummary> {
    let dom = ctx.config.domain()?;
    let e = &ctx.config.experiment;
    if e.scalar_values.is_empty() {
        return Err(Error::Validation(
            "sign-changing needs experiment.scalar_values (one per subdomain)".into(),
        ));
    }
    let a = PiecewiseScalarField::new(dom.clone(), e.scalar_values.clone())?;
    let mesh = ctx.base_mesh()?;
    let mut outputs = Vec::new();

    // resolvent norms along the shift values
    if !e.t_values.is_empty() {
        let mut rows = Vec::new();
        for &t in &e.t_values {
            let norm = signchanging::resolvent_norm(&a, t, &mesh)?;
            let bound = if t == 0.0 { f64::INFINITY } else { 1.0 / t.abs() };
            rows.push(vec![fmt(t), fmt(norm), fmt(bound)]);
        }
        outputs.push(write_csv(ctx, "resolvent.csv", &["t", "resolvent_norm", "shift_bound"], &rows)?);
    }

    // critical-contrast condition sweep: second value moved to -a_1 + eps
    if !e.epsilons.is_empty() {
        if dom.n_subdomains() < 2 {
            return Err(Error::Validation(
                "the critical-contrast sweep needs at least two subdomains".into(),
            ));
        }
        let mut rows = Vec::new();
        for &eps in &e.epsilons {
            let mut vals = e.scalar_values.clone();
            vals[1] = -vals[0] + eps;
            let near = PiecewiseScalarField::new(dom.clone(), vals)?;
            let cond = signchanging::stiffness_condition(&near, &mesh)?;
            rows.push(vec![fmt(eps), fmt(cond)]);
        }
        outputs.push(write_csv(ctx, "condition.csv", &["epsilon", "condition"], &rows)?);
    }

    // parametric regularity probe over a manufactured corpus
    let k = e.k.max(1) as usize;
    let mut probes = Vec::new();
    let mut rows = Vec::new();
    for case in 0..e.cases {
        let u = bounds::random_solution(&dom, 3, e.seed.wrapping_add(case as u64));
        let q = signchanging::param_regularity_probe(&a, &u, k, &mesh)?;
        rows.push(vec![
            case.to_string(),
            fmt(q.u_norm),
            fmt(q.nn),
            fmt(q.a_norm),
            fmt(q.data_norm),
        ]);
        probes.push(q);
    }
    outputs.push(write_csv(
        ctx,
        "probe.csv",
        &["case", "u_norm", "nn", "a_norm", "data_norm"],
        &rows,
    )?);
    let exponents = signchanging::smallest_bounded_exponents(&probes, 6, 10.0);
    Ok(RunSummary {
        outputs,
        extra: json!({
            "admissible": a.admissible(),
            "probe_k": k,
            "smallest_exponents": exponents.map(|(p, q)| vec![p, q]),
        }),
    })
}
