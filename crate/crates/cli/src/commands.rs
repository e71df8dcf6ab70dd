//! Subcommand implementations. Each writes its outputs under the output
//! directory and returns a [`Status`].

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use nalgebra::DMatrix;
use qpresp::averaging::{find_equilibrium, prepare, AveragingSummary};
use qpresp::kam::ledger::{step_constants, StepConstants};
use qpresp::kam::pipeline::{solve, SolveSummary};
use qpresp::kam::{KamReport, ScheduleStep};
use qpresp::reductions::{degenerate_scale, rescale_general, second_order_reduce, BranchReport, DegenerateSpec, ExponentPlan, SecondOrderSpec};
use qpresp::resonance::{excluded_parameters, measure_fit, CellRecord, MeasureFit, ScanOptions};
use qpresp::spectra::FrameSummary;
use qpresp::system::{field_records, CoeffRecord, SystemRecord, SystemSpec};
use qpresp::torus::{FourierSeries, TaylorFourierField};
use qpresp::verify::{integrate_oracle, linear_fourier_oracle, residual};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Problem, RunConfig, SystemSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
}

pub struct RunContext {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub strict_ledger: bool,
    pub seed: Option<u64>,
}

impl RunContext {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.cfg.seed)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

#[derive(Serialize)]
struct AverageOutput {
    kind: &'static str,
    eps: f64,
    engine_eps: f64,
    eps_hat: f64,
    x_star: Vec<f64>,
    equilibrium_residual: f64,
    jacobian: Vec<Vec<f64>>,
    spectrum: FrameSummary,
    averaging: AveragingSummary,
    f_bar: Vec<CoeffRecord>,
}

pub fn average(ctx: &RunContext) -> Result<Status> {
    let p = ctx.cfg.problem()?;
    let eps = ctx.cfg.epsilon_value()?;
    let e = p.engine_eps(eps);
    let opts = ctx.cfg.solve_options(&p.spec, ctx.strict_ledger, ctx.seed)?;
    let (avg, eq, frame, _) = prepare(&p.spec, e, &p.x_init, &opts.averaging, opts.margin_fraction)?;
    let out = AverageOutput {
        kind: p.kind,
        eps,
        engine_eps: e,
        eps_hat: avg.eps_hat,
        x_star: eq.x.iter().zip(&p.spec.center).map(|(a, c)| a + c).collect(),
        equilibrium_residual: eq.residual,
        jacobian: matrix_rows(&eq.jacobian),
        spectrum: frame.summary(),
        averaging: avg.summary(p.spec.rho, p.spec.r)?,
        f_bar: field_records(&avg.f_bar),
    };
    write_json(&ctx.path(&ctx.cfg.output.average), &out)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct NormalFormOutput {
    kind: &'static str,
    eps: f64,
    engine_eps: f64,
    eps_hat: f64,
    x_star: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: FourierSeries,
    p: FourierSeries,
    h: TaylorFourierField,
    frame: FrameSummary,
}

pub fn normal_form(ctx: &RunContext) -> Result<Status> {
    let p = ctx.cfg.problem()?;
    let eps = ctx.cfg.epsilon_value()?;
    let e = p.engine_eps(eps);
    let opts = ctx.cfg.solve_options(&p.spec, ctx.strict_ledger, ctx.seed)?;
    let (_, _, frame, nf) = prepare(&p.spec, e, &p.x_init, &opts.averaging, opts.margin_fraction)?;
    let out = NormalFormOutput {
        kind: p.kind,
        eps,
        engine_eps: e,
        eps_hat: nf.eps,
        x_star: nf.x_star.iter().zip(&p.spec.center).map(|(a, c)| a + c).collect(),
        a: matrix_rows(&nf.a),
        b: nf.b,
        p: nf.p,
        h: nf.h,
        frame: frame.summary(),
    };
    write_json(&ctx.path(&ctx.cfg.output.normal_form), &out)?;
    Ok(Status::Ok)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualCheck {
    pub grid: usize,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleCheck {
    /// Largest coefficient distance between the response and the exact
    /// linear solution.
    pub coefficient_distance: f64,
    pub oracle_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShadowingCheck {
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub distance: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
}

/// Contents of the `run` report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: String,
    pub eps: f64,
    pub engine_eps: f64,
    pub converged: bool,
    pub m_final: usize,
    /// Fourier series of the response `x(theta)`.
    pub response: FourierSeries,
    pub residual: ResidualCheck,
    pub oracle: Option<OracleCheck>,
    pub shadowing: Option<ShadowingCheck>,
    pub summary: SolveSummary,
    pub timing: Timing,
}

/// `(A, v)` when `f` is `A x + v(theta)` with constant `A` and `g = 0`.
fn linear_data(spec: &SystemSpec) -> Option<(DMatrix<f64>, FourierSeries)> {
    if !spec.g.is_empty() || spec.f.max_degree() > 1 || spec.a != 1.0 {
        return None;
    }
    let lin = spec.f.linear_matrix().ok()?;
    if lin.iter().any(|(k, _)| k.iter().any(|&c| c != 0)) {
        return None;
    }
    Some((lin.mean_matrix().map(|c| c.re), spec.f.constant_term()))
}

fn oracle_check(spec: &SystemSpec, response: &FourierSeries, eps: f64, grid: usize) -> Result<Option<OracleCheck>> {
    let Some((a, v)) = linear_data(spec) else { return Ok(None) };
    let mut x = linear_fourier_oracle(&a, &v, eps, &spec.freq)?;
    x = x.add(&FourierSeries::from_real_vector(spec.dim(), &spec.center, x.rho()))?;
    Ok(Some(OracleCheck { coefficient_distance: response.max_coeff_distance(&x), oracle_residual: residual(spec, &x, eps, grid)? }))
}

fn shadowing_check(ctx: &RunContext, p: &Problem, response: &FourierSeries, eps: f64) -> Result<Option<ShadowingCheck>> {
    let o = &ctx.cfg.oracles;
    let Some(int) = &o.integrate else { return Ok(None) };
    let x0 = match &o.x0 {
        Some(x) => x.clone(),
        None => response.eval_real(&vec![0.0; p.spec.dim()]),
    };
    if x0.len() != p.spec.n {
        return Err(ConfigError(format!("oracles.x0 has length {}, expected {}", x0.len(), p.spec.n)).into());
    }
    let traj = integrate_oracle(&p.spec, &x0, eps, int, Some(response))?;
    let distance = traj.shadowing.unwrap_or(f64::INFINITY);
    Ok(Some(ShadowingCheck { x0, t_end: int.t_end, dt: int.dt, distance, bound: o.shadowing_bound, passed: distance <= o.shadowing_bound }))
}

fn iteration_rows(report: &KamReport) -> Vec<IterationRow> {
    let ledger_ok = |m: usize| report.ledger.steps.iter().find(|s| s.measured.m == m).map(|s| s.checks.iter().all(|c| c.holds));
    let mut rows: Vec<IterationRow> = report
        .steps
        .iter()
        .map(|s| IterationRow {
            m: s.m,
            s: s.s,
            p_decay: s.p_decay,
            b_decay: s.b_decay,
            norm_p: s.norm_p,
            norm_b: s.norm_b,
            norm_u: Some(s.norm_u),
            norm_s: Some(s.norm_s),
            r: s.r,
            k_curv: s.k_curv,
            homological_residual: Some(s.homological_residual),
            sylvester_residual: Some(s.sylvester_residual),
            conjugacy_defect: s.conjugacy_defect,
            eigen_margin: s.eigen_check.worst.as_ref().map(|w| w.ratio()),
            difference_margin: s.difference_check.worst.as_ref().map(|w| w.ratio()),
            ledger_ok: ledger_ok(s.m),
        })
        .collect();
    let f = &report.final_state;
    rows.push(IterationRow {
        m: f.m,
        s: f.s,
        p_decay: f.p_decay,
        b_decay: f.b_decay,
        norm_p: f.norm_p,
        norm_b: f.norm_b,
        norm_u: None,
        norm_s: None,
        r: f.r,
        k_curv: f.k_curv,
        homological_residual: None,
        sylvester_residual: None,
        conjugacy_defect: None,
        eigen_margin: None,
        difference_margin: None,
        ledger_ok: None,
    });
    rows
}

#[derive(Serialize)]
struct IterationRow {
    m: usize,
    s: f64,
    p_decay: f64,
    b_decay: f64,
    norm_p: f64,
    norm_b: f64,
    norm_u: Option<f64>,
    norm_s: Option<f64>,
    r: f64,
    k_curv: f64,
    homological_residual: Option<f64>,
    sylvester_residual: Option<f64>,
    conjugacy_defect: Option<f64>,
    eigen_margin: Option<f64>,
    difference_margin: Option<f64>,
    ledger_ok: Option<bool>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(ctx: &RunContext) -> Result<Status> {
    let start = Instant::now();
    let p = ctx.cfg.problem()?;
    let eps = ctx.cfg.epsilon_value()?;
    let e = p.engine_eps(eps);
    let opts = ctx.cfg.solve_options(&p.spec, ctx.strict_ledger, ctx.seed)?;
    let sol = solve(&p.spec, e, &p.x_init, &opts)?;
    let response = sol.response_series(&opts.averaging.trunc)?;
    let grid = ctx.cfg.oracles.grid;
    let bound = ctx.cfg.oracles.residual_bound;
    let value = residual(&p.spec, &response, e, grid)?;
    let oracle = oracle_check(&p.spec, &response, e, grid)?;
    let shadowing = shadowing_check(ctx, &p, &response, e)?;
    let summary = sol.summary()?;
    let report = RunReport {
        kind: p.kind.into(),
        eps,
        engine_eps: e,
        converged: sol.report.converged,
        m_final: sol.report.m_final,
        response,
        residual: ResidualCheck { grid, value, bound, passed: value <= bound },
        oracle,
        shadowing,
        summary,
        timing: Timing { total_ms: start.elapsed().as_secs_f64() * 1e3 },
    };
    write_csv(&ctx.path(&ctx.cfg.output.iterations), &iteration_rows(&sol.report))?;
    write_json(&ctx.path(&ctx.cfg.output.report), &report)?;
    let ok = report.converged && report.residual.passed && report.shadowing.as_ref().is_none_or(|s| s.passed);
    Ok(if ok { Status::Ok } else { Status::VerificationFailed })
}

#[derive(Serialize)]
struct CsvCell<'a> {
    eps_lo: f64,
    eps_hi: f64,
    m: usize,
    worst_k: &'a str,
    lhs: f64,
    rhs: f64,
    flagged: bool,
    excluded: f64,
}

#[derive(Serialize)]
struct SweepOutput {
    kind: &'static str,
    eps_lo: f64,
    eps_hi: f64,
    cells: usize,
    flagged: usize,
    failed: usize,
    excluded_measure: f64,
    excluded_fraction: f64,
    mu_star: f64,
    fit: Option<MeasureFit>,
    failures: Vec<CellRecord>,
}

pub fn sweep(ctx: &RunContext) -> Result<Status> {
    let p = ctx.cfg.problem()?;
    let (lo, hi, cells) = ctx.cfg.epsilon_range()?;
    if p.eps_power != 1.0 {
        return Err(ConfigError("`sweep` supports first- and second-order systems only".into()).into());
    }
    let opts = ctx.cfg.solve_options(&p.spec, false, ctx.seed)?;
    let sw = &ctx.cfg.sweep;
    let scan = excluded_parameters(&p.spec, hi, &opts, &ScanOptions { eps_lo: lo, cells, m_cap: sw.m_cap, x_init: p.x_init.clone() })?;
    let fit = (lo == 0.0 && scan.mu_star.is_finite()).then(|| measure_fit(&scan, &p.spec.freq, &opts.engine.schedule, sw.m_cap, sw.a1, sw.a2, sw.a3));
    let rows: Vec<CsvCell> = scan
        .cells
        .iter()
        .map(|c| CsvCell { eps_lo: c.eps_lo, eps_hi: c.eps_hi, m: c.m, worst_k: &c.worst_k, lhs: c.lhs, rhs: c.rhs, flagged: c.flagged, excluded: c.excluded })
        .collect();
    write_csv(&ctx.path(&ctx.cfg.output.sweep_csv), &rows)?;
    let out = SweepOutput {
        kind: p.kind,
        eps_lo: lo,
        eps_hi: hi,
        cells,
        flagged: scan.flagged,
        failed: scan.failed,
        excluded_measure: scan.excluded_measure,
        excluded_fraction: scan.excluded_fraction,
        mu_star: scan.mu_star,
        fit,
        failures: scan.cells.iter().filter(|c| c.failure.is_some()).cloned().collect(),
    };
    write_json(&ctx.path(&ctx.cfg.output.sweep), &out)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct VerifyOutput {
    response_file: String,
    eps: f64,
    engine_eps: f64,
    residual: ResidualCheck,
    oracle: Option<OracleCheck>,
    shadowing: Option<ShadowingCheck>,
    passed: bool,
}

/// Reads a response from a `run` report or a bare series file.
pub fn read_response(path: &Path) -> Result<FourierSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read response {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ConfigError(format!("response {}: {e}", path.display())))?;
    let series = value.get("response").cloned().unwrap_or(value);
    serde_json::from_value(series).map_err(|e| ConfigError(format!("response {}: {e}", path.display())).into())
}

pub fn verify(ctx: &RunContext, response: Option<&Path>) -> Result<Status> {
    let p = ctx.cfg.problem()?;
    let eps = ctx.cfg.epsilon_value()?;
    let e = p.engine_eps(eps);
    let path = match (response, &ctx.cfg.response) {
        (Some(r), _) => r.to_path_buf(),
        (None, Some(r)) => PathBuf::from(r),
        (None, None) => return Err(ConfigError("`verify` needs a response file (--response or `response` in the config)".into()).into()),
    };
    let x = read_response(&path)?;
    if x.dim() != p.spec.dim() || x.shape() != qpresp::torus::Shape::vector(p.spec.n) {
        return Err(ConfigError(format!("response in {} does not match the system dimensions", path.display())).into());
    }
    let grid = ctx.cfg.oracles.grid;
    let bound = ctx.cfg.oracles.residual_bound;
    let value = residual(&p.spec, &x, e, grid)?;
    let oracle = oracle_check(&p.spec, &x, e, grid)?;
    let shadowing = shadowing_check(ctx, &p, &x, e)?;
    let passed = value <= bound && shadowing.as_ref().is_none_or(|s| s.passed);
    let out = VerifyOutput {
        response_file: path.display().to_string(),
        eps,
        engine_eps: e,
        residual: ResidualCheck { grid, value, bound, passed: value <= bound },
        oracle,
        shadowing,
        passed,
    };
    write_json(&ctx.path(&ctx.cfg.output.verify), &out)?;
    Ok(if passed { Status::Ok } else { Status::VerificationFailed })
}

#[derive(Serialize)]
struct ReduceOutput {
    kind: &'static str,
    plan: ExponentPlan,
    /// Engine parameter as a power of the configured one.
    eps_power: f64,
    first_order: SystemRecord,
    identity_defect: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    branches: Option<BranchReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    homogeneity_defect: Option<f64>,
}

fn samples(seed: u64, d: usize, n: usize, r: f64, e: (f64, f64)) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..16)
        .map(|_| {
            let theta = (0..d).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            let y = (0..n).map(|_| rng.gen_range(-0.5 * r..0.5 * r)).collect();
            (theta, y, rng.gen_range(e.0..e.1))
        })
        .collect()
}

pub fn reduce(ctx: &RunContext) -> Result<Status> {
    let cfg = &ctx.cfg;
    let wrap = |e: qpresp::Error| anyhow::Error::from(ConfigError(format!("system: {e}")));
    let out = match &cfg.system {
        SystemSource::Demo(_) | SystemSource::FirstOrder(_) => {
            let p = cfg.problem()?;
            let opts = cfg.solve_options(&p.spec, false, ctx.seed)?;
            let (plan, sys) = rescale_general(&p.spec, &opts.averaging)?;
            let defect = sys.identity_defect(&samples(ctx.seed(), p.spec.dim(), p.spec.n, p.spec.r, (0.01, 0.05)))?;
            ReduceOutput { kind: "first_order", plan, eps_power: 1.0, first_order: p.spec.to_record(), identity_defect: defect, x_star: None, branches: None, homogeneity_defect: None }
        }
        SystemSource::SecondOrder(rec) => {
            let so = SecondOrderSpec::from_record(rec).map_err(wrap)?;
            let x = cfg.x_init.clone().unwrap_or_else(|| so.center.clone());
            let red = second_order_reduce(&so, &x).map_err(wrap)?;
            let spec = &red.first_order;
            let worst = red.identity_defect(&so, &samples(ctx.seed(), spec.dim(), spec.n, spec.r, (0.01, 0.05)))?;
            ReduceOutput {
                kind: "second_order",
                plan: red.plan.clone(),
                eps_power: 1.0,
                first_order: red.first_order.to_record(),
                identity_defect: worst,
                x_star: Some(red.x_star.clone()),
                branches: Some(red.branches.clone()),
                homogeneity_defect: None,
            }
        }
        SystemSource::Degenerate(rec) => {
            let ds = DegenerateSpec::from_record(rec).map_err(wrap)?;
            let sys = degenerate_scale(&ds, ctx.seed()).map_err(wrap)?;
            let defect = sys.identity_defect(&ds, &samples(ctx.seed(), ds.freq.dim(), ds.n, ds.r, (0.05, 0.5)))?;
            ReduceOutput {
                kind: "degenerate",
                plan: sys.plan.clone(),
                eps_power: 1.0 / sys.l as f64,
                first_order: sys.spec.to_record(),
                identity_defect: defect,
                x_star: None,
                branches: None,
                homogeneity_defect: Some(sys.homogeneity_defect),
            }
        }
    };
    write_json(&ctx.path(&cfg.output.reduce), &out)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct BoundsOutput {
    eps: f64,
    engine_eps: f64,
    eps_hat: f64,
    frame: FrameSummary,
    schedule: Vec<ScheduleStep>,
    rho_inf: f64,
    constants: Vec<StepConstants>,
}

/// Ledger constants for every step of the schedule, without iterating.
pub fn bounds(ctx: &RunContext) -> Result<Status> {
    let p = ctx.cfg.problem()?;
    let eps = ctx.cfg.epsilon_value()?;
    let e = p.engine_eps(eps);
    let opts = ctx.cfg.solve_options(&p.spec, false, ctx.seed)?;
    let local: Vec<f64> = p.x_init.iter().zip(&p.spec.center).map(|(x, c)| x - c).collect();
    let avg = qpresp::averaging::averaging_transform(&p.spec, e, &opts.averaging)?;
    let eq = find_equilibrium(&avg.f_bar, &local, 1e-13, 100)?;
    let frame = qpresp::spectra::diagonalize(&eq.jacobian, opts.margin_fraction)?;
    let sched = &opts.engine.schedule;
    let d = p.spec.dim();
    let constants = (0..=sched.m_max)
        .map(|m| step_constants(sched, d, m, frame.beta0, frame.mu, avg.eps_hat, &opts.engine.ledger_constants))
        .collect::<qpresp::Result<Vec<_>>>()?;
    let out = BoundsOutput {
        eps,
        engine_eps: e,
        eps_hat: avg.eps_hat,
        frame: frame.summary(),
        schedule: (0..=sched.m_max).map(|m| sched.step(m)).collect(),
        rho_inf: sched.rho_inf(),
        constants,
    };
    write_json(&ctx.path(&ctx.cfg.output.bounds), &out)?;
    Ok(Status::Ok)
}
