//! Voltage sweeps, zero-crossing refinement and derivative-free FSS
//! minimization.
//!
//! Sweep points are independent; they run either sequentially or on the rayon
//! pool. Results are collected in input order, so the output is bitwise
//! identical for any worker count.

use crate::device::{DeviceSpec, Grid2D};
use crate::error::{Result, SimError};
use crate::excitonics::{evaluate_configuration, ExcitonReport, SolverOptions};
use crate::field::fmt_sig9;
use crate::poisson::GateVoltages;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Quadrupole drive with optional left-right / top-bottom asymmetry terms.
///
/// Sign convention: positive `v` pushes both carriers off the x-axis arms and
/// squeezes the x-elongated exciton round, i.e. the FSS-erasing direction for
/// the default dot. `v = -0.5` reproduces the polarity with top and bottom
/// gates at +0.5 V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrupoleParam {
    pub v: f64,
    pub dv_rl: f64,
    pub dv_tb: f64,
}

impl QuadrupoleParam {
    pub fn pure(v: f64) -> Self {
        QuadrupoleParam {
            v,
            dv_rl: 0.0,
            dv_tb: 0.0,
        }
    }

    pub fn gate_voltages(&self) -> GateVoltages {
        GateVoltages {
            v_top: -self.v,
            v_bottom: -self.v + self.dv_tb,
            v_left: self.v,
            v_right: self.v - self.dv_rl,
        }
    }
}

/// Single positive potential on the left gate, all others grounded.
pub fn lateral_gates(v: f64) -> GateVoltages {
    GateVoltages {
        v_top: 0.0,
        v_bottom: 0.0,
        v_left: v,
        v_right: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        ExecMode::Parallel
    }
}

/// Maps `eval` over the points, in parallel when requested and compiled in.
/// Output order always matches input order.
pub fn run_points<T, U, F>(points: &[T], mode: ExecMode, eval: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        ExecMode::Sequential => points.iter().map(eval).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                points.par_iter().map(eval).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                points.iter().map(eval).collect()
            }
        }
    }
}

/// One sweep row: the drive parameters, the gates they map to, and either the
/// full report or the failure message. Point failures never abort a sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub v: f64,
    pub dv_rl: f64,
    pub dv_tb: f64,
    pub gates: GateVoltages,
    pub result: std::result::Result<ExcitonReport, String>,
}

impl SweepRecord {
    pub fn status(&self) -> &str {
        match &self.result {
            Ok(_) => "ok",
            Err(_) => "failed",
        }
    }

    pub fn report(&self) -> Option<&ExcitonReport> {
        self.result.as_ref().ok()
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(SimError::Config(format!(
            "invalid sweep range [{lo}, {hi}] with {n} points"
        )));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

fn record_for(
    spec: &DeviceSpec,
    grid: &Grid2D,
    param: QuadrupoleParam,
    gates: GateVoltages,
    opts: &SolverOptions,
) -> SweepRecord {
    let result = evaluate_configuration(spec, grid, &gates, opts).map_err(|e| e.to_string());
    SweepRecord {
        v: param.v,
        dv_rl: param.dv_rl,
        dv_tb: param.dv_tb,
        gates,
        result,
    }
}

pub fn sweep_quadrupole(
    spec: &DeviceSpec,
    grid: &Grid2D,
    v_range: (f64, f64),
    n_points: usize,
    opts: &SolverOptions,
    mode: ExecMode,
) -> Result<Vec<SweepRecord>> {
    let vs = linspace(v_range.0, v_range.1, n_points)?;
    Ok(run_points(&vs, mode, |&v| {
        let p = QuadrupoleParam::pure(v);
        record_for(spec, grid, p, p.gate_voltages(), opts)
    }))
}

pub fn sweep_lateral(
    spec: &DeviceSpec,
    grid: &Grid2D,
    v_range: (f64, f64),
    n_points: usize,
    opts: &SolverOptions,
    mode: ExecMode,
) -> Result<Vec<SweepRecord>> {
    let vs = linspace(v_range.0, v_range.1, n_points)?;
    Ok(run_points(&vs, mode, |&v| {
        record_for(
            spec,
            grid,
            QuadrupoleParam::pure(v),
            lateral_gates(v),
            opts,
        )
    }))
}

/// Rectangular scan over the two asymmetry terms at fixed quadrupole drive.
/// Records are stored row-major: index `j * n_rl + i` for (rl_i, tb_j).
#[derive(Debug, Clone)]
pub struct GridSweep {
    pub v_fixed: f64,
    pub rl: Vec<f64>,
    pub tb: Vec<f64>,
    pub records: Vec<SweepRecord>,
}

impl GridSweep {
    /// Successful record with the smallest FSS.
    pub fn min_record(&self) -> Option<&SweepRecord> {
        self.records
            .iter()
            .filter(|r| r.report().is_some())
            .min_by(|a, b| {
                let fa = a.report().unwrap().fss_uev;
                let fb = b.report().unwrap().fss_uev;
                fa.total_cmp(&fb)
            })
    }
}

pub fn sweep_grid_asymmetric(
    spec: &DeviceSpec,
    grid: &Grid2D,
    v_fixed: f64,
    rl_range: (f64, f64),
    tb_range: (f64, f64),
    n_rl: usize,
    n_tb: usize,
    opts: &SolverOptions,
    mode: ExecMode,
) -> Result<GridSweep> {
    let rl = linspace(rl_range.0, rl_range.1, n_rl)?;
    let tb = linspace(tb_range.0, tb_range.1, n_tb)?;
    let mut points = Vec::with_capacity(n_rl * n_tb);
    for &dtb in &tb {
        for &drl in &rl {
            points.push(QuadrupoleParam {
                v: v_fixed,
                dv_rl: drl,
                dv_tb: dtb,
            });
        }
    }
    let records = run_points(&points, mode, |&p| {
        record_for(spec, grid, p, p.gate_voltages(), opts)
    });
    Ok(GridSweep {
        v_fixed,
        rl,
        tb,
        records,
    })
}

/// A refined delta = 0 crossing.
#[derive(Debug, Clone)]
pub struct ZeroCrossing {
    /// Bracket from the coarse sweep.
    pub v_lo: f64,
    pub v_hi: f64,
    /// Refined location.
    pub v_zero: f64,
    pub report: ExcitonReport,
}

/// Scans consecutive successful sweep records for sign changes of delta and
/// bisects each bracket with `eval` until |delta| < `tol_uev` (or the bracket
/// is numerically exhausted).
pub fn refine_zero_crossings<F>(
    records: &[SweepRecord],
    eval: F,
    tol_uev: f64,
) -> Result<Vec<ZeroCrossing>>
where
    F: Fn(f64) -> Result<ExcitonReport>,
{
    let mut crossings = Vec::new();
    let ok: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.report().map(|rep| (r.v, rep.delta_uev)))
        .collect();
    for pair in ok.windows(2) {
        let (v_a, d_a) = pair[0];
        let (v_b, d_b) = pair[1];
        if d_a == 0.0 || d_a.signum() == d_b.signum() {
            continue;
        }
        let (mut lo, mut hi, mut d_lo) = (v_a, v_b, d_a);
        let mut best: Option<(f64, ExcitonReport)> = None;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let rep = eval(mid)?;
            let d = rep.delta_uev;
            let better = best
                .as_ref()
                .map(|(_, b)| d.abs() < b.delta_uev.abs())
                .unwrap_or(true);
            if better {
                best = Some((mid, rep.clone()));
            }
            if d.abs() < tol_uev || hi - lo < 1e-12 {
                break;
            }
            if d.signum() == d_lo.signum() {
                lo = mid;
                d_lo = d;
            } else {
                hi = mid;
            }
        }
        let (v_zero, report) = best.expect("bisection ran at least once");
        crossings.push(ZeroCrossing {
            v_lo: v_a,
            v_hi: v_b,
            v_zero,
            report,
        });
    }
    Ok(crossings)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeOptions {
    pub bounds_lo: [f64; 3],
    pub bounds_hi: [f64; 3],
    pub max_evals: usize,
    pub target_fss_uev: f64,
    pub simplex_tol_v: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            bounds_lo: [0.3, 0.0, 0.0],
            bounds_hi: [0.7, 0.2, 0.2],
            max_evals: 200,
            target_fss_uev: 0.01,
            simplex_tol_v: 1e-4,
            max_restarts: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TracePoint {
    pub eval: usize,
    pub param: QuadrupoleParam,
    pub fss_uev: f64,
    pub best_fss_uev: f64,
}

pub struct OptimizeOutcome {
    pub best: QuadrupoleParam,
    pub report: ExcitonReport,
    pub trace: Vec<TracePoint>,
    /// True when the run terminated on a tolerance, false on eval budget.
    pub converged: bool,
}

fn clamp3(x: [f64; 3], lo: &[f64; 3], hi: &[f64; 3]) -> [f64; 3] {
    [
        x[0].clamp(lo[0], hi[0]),
        x[1].clamp(lo[1], hi[1]),
        x[2].clamp(lo[2], hi[2]),
    ]
}

fn simplex_diameter(pts: &[[f64; 3]]) -> f64 {
    let mut d = 0.0f64;
    for a in pts {
        for b in pts {
            let s = (a[0] - b[0])
                .hypot(a[1] - b[1])
                .hypot(a[2] - b[2]);
            d = d.max(s);
        }
    }
    d
}

/// Bounded Nelder-Mead with jittered restarts on simplex collapse.
/// Deterministic for a fixed seed. Objective failures count as +inf.
fn nelder_mead<F>(
    objective: F,
    initial: [f64; 3],
    opts: &OptimizeOptions,
) -> (Vec<TracePoint>, [f64; 3], f64, bool)
where
    F: Fn([f64; 3]) -> Option<f64>,
{
    let lo = &opts.bounds_lo;
    let hi = &opts.bounds_hi;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut trace: Vec<TracePoint> = Vec::new();
    let mut best_x = clamp3(initial, lo, hi);
    let mut best_f = f64::INFINITY;
    let mut evals = 0usize;

    let eval = |x: [f64; 3],
                    trace: &mut Vec<TracePoint>,
                    best_x: &mut [f64; 3],
                    best_f: &mut f64,
                    evals: &mut usize|
     -> f64 {
        let f = objective(x).unwrap_or(f64::INFINITY);
        *evals += 1;
        if f < *best_f {
            *best_f = f;
            *best_x = x;
        }
        trace.push(TracePoint {
            eval: *evals,
            param: QuadrupoleParam {
                v: x[0],
                dv_rl: x[1],
                dv_tb: x[2],
            },
            fss_uev: f,
            best_fss_uev: *best_f,
        });
        f
    };

    let mut converged = false;
    'restarts: for restart in 0..=opts.max_restarts {
        // Initial simplex around the current best point, jittered after the
        // first collapse so restarts explore a different orientation.
        let center = if restart == 0 { clamp3(initial, lo, hi) } else { best_x };
        let mut pts: Vec<[f64; 3]> = vec![center];
        for d in 0..3 {
            let span = hi[d] - lo[d];
            let mut step = 0.1 * span;
            if restart > 0 {
                step *= 0.5 + rng.gen::<f64>();
            }
            let mut p = center;
            p[d] += if p[d] + step <= hi[d] { step } else { -step };
            pts.push(clamp3(p, lo, hi));
        }
        let mut fs: Vec<f64> = pts
            .iter()
            .map(|&p| eval(p, &mut trace, &mut best_x, &mut best_f, &mut evals))
            .collect();

        loop {
            if best_f <= opts.target_fss_uev {
                converged = true;
                break 'restarts;
            }
            if evals >= opts.max_evals {
                break 'restarts;
            }
            if simplex_diameter(&pts) < opts.simplex_tol_v {
                if restart == opts.max_restarts {
                    converged = true;
                    break 'restarts;
                }
                continue 'restarts;
            }

            let mut order: Vec<usize> = (0..4).collect();
            order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
            let (ib, iw, is) = (order[0], order[3], order[2]);
            let centroid = {
                let mut c = [0.0; 3];
                for &i in &order[..3] {
                    for d in 0..3 {
                        c[d] += pts[i][d] / 3.0;
                    }
                }
                c
            };
            let towards = |alpha: f64| -> [f64; 3] {
                let mut p = [0.0; 3];
                for d in 0..3 {
                    p[d] = centroid[d] + alpha * (centroid[d] - pts[iw][d]);
                }
                clamp3(p, lo, hi)
            };

            let xr = towards(1.0);
            let fr = eval(xr, &mut trace, &mut best_x, &mut best_f, &mut evals);
            if fr < fs[ib] {
                let xe = towards(2.0);
                let fe = eval(xe, &mut trace, &mut best_x, &mut best_f, &mut evals);
                if fe < fr {
                    pts[iw] = xe;
                    fs[iw] = fe;
                } else {
                    pts[iw] = xr;
                    fs[iw] = fr;
                }
            } else if fr < fs[is] {
                pts[iw] = xr;
                fs[iw] = fr;
            } else {
                let xc = towards(if fr < fs[iw] { 0.5 } else { -0.5 });
                let fc = eval(xc, &mut trace, &mut best_x, &mut best_f, &mut evals);
                if fc < fs[iw].min(fr) {
                    pts[iw] = xc;
                    fs[iw] = fc;
                } else {
                    // shrink towards the best vertex
                    for i in 0..4 {
                        if i == ib {
                            continue;
                        }
                        for d in 0..3 {
                            pts[i][d] = pts[ib][d] + 0.5 * (pts[i][d] - pts[ib][d]);
                        }
                        pts[i] = clamp3(pts[i], lo, hi);
                        fs[i] = eval(pts[i], &mut trace, &mut best_x, &mut best_f, &mut evals);
                        if evals >= opts.max_evals {
                            break 'restarts;
                        }
                    }
                }
            }
        }
    }

    (trace, best_x, best_f, converged)
}

/// Minimizes FSS over (v, dv_rl, dv_tb) within bounds.
pub fn minimize_fss(
    spec: &DeviceSpec,
    grid: &Grid2D,
    initial: QuadrupoleParam,
    opts: &OptimizeOptions,
    solver: &SolverOptions,
) -> Result<OptimizeOutcome> {
    let objective = |x: [f64; 3]| -> Option<f64> {
        let p = QuadrupoleParam {
            v: x[0],
            dv_rl: x[1],
            dv_tb: x[2],
        };
        evaluate_configuration(spec, grid, &p.gate_voltages(), solver)
            .ok()
            .map(|r| r.fss_uev)
    };
    let (trace, best_x, best_f, converged) =
        nelder_mead(objective, [initial.v, initial.dv_rl, initial.dv_tb], opts);
    if !best_f.is_finite() {
        return Err(SimError::NonConvergence {
            stage: "fss optimizer",
            iterations: trace.len(),
            residual: f64::NAN,
        });
    }
    let best = QuadrupoleParam {
        v: best_x[0],
        dv_rl: best_x[1],
        dv_tb: best_x[2],
    };
    let report = evaluate_configuration(spec, grid, &best.gate_voltages(), solver)?;
    Ok(OptimizeOutcome {
        best,
        report,
        trace,
        converged,
    })
}

const RECORD_COLUMNS: &str = "fss_ueV,beta,xi,l_x_eh_nm,l_y_eh_nm,eps_e,eps_h,status";

fn record_fields(r: &SweepRecord) -> String {
    match r.report() {
        Some(rep) => format!(
            "{},{},{},{},{},{},{},ok",
            fmt_sig9(rep.fss_uev),
            fmt_sig9(rep.beta),
            fmt_sig9(rep.xi),
            fmt_sig9(rep.l_x_eh_nm),
            fmt_sig9(rep.l_y_eh_nm),
            fmt_sig9(rep.eps_e),
            fmt_sig9(rep.eps_h),
        ),
        None => ",,,,,,,failed".to_string(),
    }
}

/// One-parameter sweep CSV: `v_V` column plus the standard record columns.
pub fn write_sweep_csv(records: &[SweepRecord], out: &mut dyn std::io::Write) -> Result<()> {
    writeln!(out, "v_V,{RECORD_COLUMNS}")?;
    for r in records {
        writeln!(out, "{},{}", fmt_sig9(r.v), record_fields(r))?;
    }
    Ok(())
}

/// Grid sweep long-form CSV: one row per (dv_rl, dv_tb) point.
pub fn write_grid_csv(sweep: &GridSweep, out: &mut dyn std::io::Write) -> Result<()> {
    writeln!(out, "dv_rl_V,dv_tb_V,{RECORD_COLUMNS}")?;
    for r in &sweep.records {
        writeln!(
            out,
            "{},{},{}",
            fmt_sig9(r.dv_rl),
            fmt_sig9(r.dv_tb),
            record_fields(r)
        )?;
    }
    Ok(())
}

/// Dense FSS matrix for greyscale maps: rows are dv_tb, columns dv_rl,
/// first row/column carry the axis values. Failed points are empty cells.
pub fn write_grid_matrix_csv(sweep: &GridSweep, out: &mut dyn std::io::Write) -> Result<()> {
    let header: Vec<String> = std::iter::once("dv_tb_V\\dv_rl_V".to_string())
        .chain(sweep.rl.iter().map(|&v| fmt_sig9(v)))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (j, &tb) in sweep.tb.iter().enumerate() {
        let mut row = vec![fmt_sig9(tb)];
        for i in 0..sweep.rl.len() {
            let r = &sweep.records[j * sweep.rl.len() + i];
            row.push(
                r.report()
                    .map(|rep| fmt_sig9(rep.fss_uev))
                    .unwrap_or_default(),
            );
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Optimizer trace CSV.
pub fn write_trace_csv(trace: &[TracePoint], out: &mut dyn std::io::Write) -> Result<()> {
    writeln!(out, "eval,v_V,dv_rl_V,dv_tb_V,fss_ueV,best_fss_ueV")?;
    for t in trace {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            t.eval,
            fmt_sig9(t.param.v),
            fmt_sig9(t.param.dv_rl),
            fmt_sig9(t.param.dv_tb),
            if t.fss_uev.is_finite() {
                fmt_sig9(t.fss_uev)
            } else {
                "inf".to_string()
            },
            fmt_sig9(t.best_fss_uev),
        )?;
    }
    Ok(())
}
