use std::path::{Path, PathBuf};

use nonmarkov::coefficients::Rates;
use nonmarkov::lindblad::{evolve_boson, evolve_fermion, Evolution, RateSchedule};
use nonmarkov::oracle::{compare_trajectory, unitarity_check, ExactPropagator};
use nonmarkov::probe::{revival_peaks, run_probe, ProbeResult};
use nonmarkov::volterra::{CoefficientTrajectory, TrajectoryOptions};
use nonmarkov::{Error, MatSeq, Statistics};
use rayon::prelude::*;

use crate::config::{Config, Format};
use crate::error::{core_error, CliError};
use crate::output::{Cell, Table};

pub struct Ctx<'a> {
    pub config: &'a Config,
    pub dir: &'a Path,
    pub format: Format,
}

impl Ctx<'_> {
    fn rows(&self, n: usize) -> impl Iterator<Item = usize> {
        (0..n).step_by(self.config.output.stride)
    }
}

/// Column names for a matrix quantity: `name` for Hermitian scalars,
/// `re_name`/`im_name` otherwise, with `_i_j` suffixes above one mode.
fn matrix_columns(cols: &mut Vec<String>, name: &str, dim: usize, hermitian: bool) {
    if dim == 1 {
        if hermitian {
            cols.push(name.into());
        } else {
            cols.push(format!("re_{name}"));
            cols.push(format!("im_{name}"));
        }
        return;
    }
    for i in 0..dim {
        for j in 0..dim {
            cols.push(format!("re_{name}_{i}_{j}"));
            cols.push(format!("im_{name}_{i}_{j}"));
        }
    }
}

fn matrix_cells(row: &mut Vec<Cell>, seq: &MatSeq, k: usize, hermitian: bool) {
    let dim = seq.dim();
    if dim == 1 {
        let z = seq.at(k, 0, 0);
        row.push(Cell::Num(z.re));
        if !hermitian {
            row.push(Cell::Num(z.im));
        }
        return;
    }
    for i in 0..dim {
        for j in 0..dim {
            let z = seq.at(k, i, j);
            row.push(Cell::Num(z.re));
            row.push(Cell::Num(z.im));
        }
    }
}

/// Isolated interior singular samples are tolerated (the master equation
/// interpolates over them); anything longer is a failure.
fn check_singular(rates: &Rates, times: &[f64]) -> Result<(), CliError> {
    let n = rates.valid.len();
    let mut k = 0;
    while k < n {
        if rates.valid[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < n && !rates.valid[k] {
            k += 1;
        }
        if k - start > 1 || start == 0 || k == n {
            return Err(CliError::Numerical {
                op: "coefficients",
                source: Error::SingularW {
                    t: times[start],
                    condition: rates.condition[start],
                },
            });
        }
    }
    Ok(())
}

pub fn coefficients(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let model = ctx.config.model()?;
    let grid = ctx.config.grid()?;
    let traj = CoefficientTrajectory::compute(&model, grid, TrajectoryOptions::default())
        .map_err(|e| core_error("coefficients", e))?;
    let dim = traj.n_sys();
    let mut cols = vec!["t".to_string()];
    matrix_columns(&mut cols, "w", dim, false);
    matrix_columns(&mut cols, "gamma", dim, true);
    matrix_columns(&mut cols, "gamma_tilde", dim, true);
    matrix_columns(&mut cols, "omega_tilde", dim, true);
    matrix_columns(&mut cols, "v", dim, true);
    cols.push("valid".into());
    let mut table = Table::with_columns(cols);
    let times = grid.times();
    for k in ctx.rows(times.len()) {
        let mut row = vec![Cell::Num(times[k])];
        matrix_cells(&mut row, &traj.w, k, false);
        matrix_cells(&mut row, &traj.rates.gamma, k, true);
        matrix_cells(&mut row, &traj.rates.gamma_tilde, k, true);
        matrix_cells(&mut row, &traj.rates.omega_tilde, k, true);
        matrix_cells(&mut row, &traj.v, k, true);
        row.push(Cell::Int(traj.rates.valid[k] as i64));
        table.push(row);
    }
    let path = table.write(ctx.dir, "coefficients", ctx.format)?;
    check_singular(&traj.rates, &times)?;
    Ok(vec![path])
}

pub const PROBE_COLUMNS: [&str; 12] = [
    "t",
    "re_d",
    "im_d",
    "abs_d",
    "re_d0",
    "im_d0",
    "abs_d0",
    "re_d_markov",
    "im_d_markov",
    "abs_d_markov",
    "pi_g",
    "pi_e",
];

fn probe_table(ctx: &Ctx, r: &ProbeResult) -> Table {
    let mut table = Table::new(&PROBE_COLUMNS);
    for k in ctx.rows(r.times.len()) {
        let (d, d0, dm) = (r.d[k], r.d0[k], r.d_markov[k]);
        table.push_nums(&[
            r.times[k],
            d.re,
            d.im,
            d.norm(),
            d0.re,
            d0.im,
            d0.norm(),
            dm.re,
            dm.im,
            dm.norm(),
            r.pi_g[k],
            r.pi_e[k],
        ]);
    }
    table
}

pub fn probe(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let cfg = ctx.config.probe(None)?;
    let result = run_probe(&cfg).map_err(|e| core_error("probe", e))?;
    Ok(vec![probe_table(ctx, &result).write(ctx.dir, "probe", ctx.format)?])
}

pub fn sweep(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let s = ctx
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [sweep] section".into()))?;
    let mut lambdas = s.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    if lambdas.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config("[sweep] lambdas must be distinct".into()));
    }
    let configs = lambdas
        .iter()
        .map(|&l| ctx.config.probe(Some(l)))
        .collect::<Result<Vec<_>, _>>()?;

    // Each point owns its scenario and output file; results come back in λ order.
    let points: Vec<(f64, PathBuf, Vec<(f64, f64)>)> = configs
        .par_iter()
        .map(|cfg| {
            let r = run_probe(cfg).map_err(|e| core_error("probe", e))?;
            let path = probe_table(ctx, &r).write(ctx.dir, &format!("probe_lambda_{}", cfg.lambda), ctx.format)?;
            let abs: Vec<f64> = r.d.iter().map(|z| z.norm()).collect();
            Ok((cfg.lambda, path, revival_peaks(&r.times, &abs, cfg.delta, s.peaks)))
        })
        .collect::<Result<_, CliError>>()?;

    let mut cols = vec!["lambda".to_string(), "file".to_string()];
    for p in 1..=s.peaks {
        cols.push(format!("peak{p}_t"));
        cols.push(format!("peak{p}_abs_d"));
    }
    let mut index = Table::with_columns(cols);
    let mut files = Vec::with_capacity(points.len() + 1);
    for (lambda, path, peaks) in points {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let mut row = vec![Cell::Num(lambda), Cell::Text(name)];
        for p in 0..s.peaks {
            let (t, v) = peaks.get(p).copied().unwrap_or((f64::NAN, f64::NAN));
            row.push(Cell::Num(t));
            row.push(Cell::Num(v));
        }
        index.push(row);
        files.push(path);
    }
    files.push(index.write(ctx.dir, "sweep-index", ctx.format)?);
    Ok(files)
}

pub fn evolve(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let cfg = ctx.config;
    let opts = cfg
        .evolve
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [evolve] section".into()))?;
    let model = cfg.model()?;
    let rho0 = cfg.initial_state()?;
    let grid = cfg.grid()?;
    let traj = CoefficientTrajectory::compute(&model, grid, TrajectoryOptions::default())
        .map_err(|e| core_error("evolve", e))?;
    let schedule = RateSchedule::from_trajectory(&traj).map_err(|e| core_error("evolve", e))?;
    let ev: Evolution = match model.statistics {
        Statistics::Bose => evolve_boson(&schedule, &rho0),
        Statistics::Fermi => evolve_fermion(&schedule, &rho0),
    }
    .map_err(|e| core_error("evolve", e))?;

    let rows: Vec<usize> = ctx.rows(ev.times.len()).collect();
    let mut cols = vec![
        "t",
        "trace",
        "purity",
        "mean_number",
        "re_mean_a",
        "im_mean_a",
        "min_eigenvalue",
    ];
    // ⟨a†a⟩(t) = |W|²⟨a†a⟩₀ + Σ_l |T_l|² f_l and ⟨a⟩(t) = W⟨a⟩₀ for any
    // initial system state and a thermal bath.
    let predicted: Option<Vec<[f64; 3]>> = if opts.oracle {
        cols.extend(["oracle_mean_number", "oracle_re_mean_a", "oracle_im_mean_a"]);
        let exact_model = cfg.oracle_model(&model, opts.oracle_modes)?;
        let oracle = ExactPropagator::new(&exact_model).map_err(|e| core_error("oracle", e))?;
        let f = exact_model.bath_occupations().map_err(|e| core_error("oracle", e))?;
        let (n0, a0) = (rho0.mean_number(), rho0.mean_a());
        Some(
            rows.par_iter()
                .map(|&k| {
                    let t = ev.times[k];
                    let w = oracle.w(t)[(0, 0)];
                    let tb = oracle.t_block(t);
                    let v: f64 = tb.iter().zip(&f).map(|(z, f)| z.norm_sqr() * f).sum();
                    let a = w * a0;
                    [w.norm_sqr() * n0 + v, a.re, a.im]
                })
                .collect(),
        )
    } else {
        None
    };

    let mut table = Table::new(&cols);
    for (r, &k) in rows.iter().enumerate() {
        let mut row = vec![
            ev.times[k],
            ev.trace[k],
            ev.purity[k],
            ev.mean_number[k],
            ev.mean_a[k].re,
            ev.mean_a[k].im,
            ev.min_eigenvalue[k],
        ];
        if let Some(p) = &predicted {
            row.extend(p[r]);
        }
        table.push_nums(&row);
    }
    Ok(vec![table.write(ctx.dir, "evolve", ctx.format)?])
}

pub fn oracle_check(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let cfg = ctx.config;
    if !cfg.bath.is_discrete() {
        return Err(CliError::Config(
            "oracle-check needs a discrete or random bath".into(),
        ));
    }
    let opts = cfg.oracle.clone().unwrap_or_default();
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let traj = CoefficientTrajectory::compute(
        &model,
        grid,
        TrajectoryOptions {
            with_t: true,
            ..TrajectoryOptions::default()
        },
    )
    .map_err(|e| core_error("oracle-check", e))?;
    let oracle = ExactPropagator::new(&model).map_err(|e| core_error("oracle-check", e))?;
    let n = grid.n_steps();
    let samples = opts.samples.clamp(2, n + 1);
    let mut indices: Vec<usize> = (0..samples).map(|i| i * n / (samples - 1)).collect();
    indices.dedup();
    let errs = compare_trajectory(&traj, &model, &oracle, &indices).map_err(|e| core_error("oracle-check", e))?;

    let mut checks: Vec<(&str, f64, f64)> = vec![("w_max_error", errs.w, opts.tolerance)];
    if let Some(t) = errs.t {
        checks.push(("t_max_error", t, opts.tolerance));
    }
    checks.push(("v_max_error", errs.v, opts.tolerance));
    checks.push(("v_hermiticity", traj.v_hermiticity_residual, opts.unitarity_tolerance));
    match oracle.blocks(grid.t_max()) {
        Ok(blocks) => {
            let u = unitarity_check(&blocks);
            checks.push(("unitarity_system_rows", u.system_rows, opts.unitarity_tolerance));
            checks.push(("unitarity_bath_rows", u.bath_rows, opts.unitarity_tolerance));
            checks.push(("unitarity_cross", u.cross, opts.unitarity_tolerance));
        }
        Err(Error::Unsupported(_)) => {}
        Err(e) => return Err(core_error("oracle-check", e)),
    }

    let mut table = Table::new(&["check", "value", "tolerance", "pass"]);
    let mut failed = Vec::new();
    for (name, value, tol) in &checks {
        let pass = *value <= *tol;
        if !pass {
            failed.push(format!("{name} = {value:.3e} > {tol:.1e}"));
        }
        table.push(vec![
            Cell::Text(name.to_string()),
            Cell::Num(*value),
            Cell::Num(*tol),
            Cell::Int(pass as i64),
        ]);
    }
    let path = table.write(ctx.dir, "oracle-check", ctx.format)?;
    if !failed.is_empty() {
        return Err(CliError::CheckFailed(format!(
            "oracle-check: residuals over budget: {}",
            failed.join(", ")
        )));
    }
    Ok(vec![path])
}
