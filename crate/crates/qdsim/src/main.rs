use clap::{Parser, Subcommand, ValueEnum};
use qdsim::config::RunConfig;
use qdsim::excitonics::{evaluate_configuration, solve_fields};
use qdsim::field::fmt_sig9;
use qdsim::sweep::{
    lateral_gates, minimize_fss, refine_zero_crossings, sweep_grid_asymmetric, sweep_lateral,
    sweep_quadrupole, write_grid_csv, write_grid_matrix_csv, write_sweep_csv, write_trace_csv,
    QuadrupoleParam, SweepRecord, ZeroCrossing,
};
use qdsim::Result;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "qdsim", version, about = "Gate-tunable quantum dot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one gate configuration and print the exciton report as JSON.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        v_top: Option<f64>,
        #[arg(long)]
        v_bottom: Option<f64>,
        #[arg(long)]
        v_left: Option<f64>,
        #[arg(long)]
        v_right: Option<f64>,
    },
    /// Run a voltage sweep; writes CSV files and prints a summary JSON.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: SweepMode,
    },
    /// Minimize the FSS over (v, dv_rl, dv_tb); writes a trace CSV and
    /// prints the best point as JSON.
    Optimize {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Solve the configured gate voltages and dump one field as CSV to stdout.
    ExportFields {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        what: FieldChoice,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepMode {
    Quadrupole,
    Lateral,
    Grid,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FieldChoice {
    Potential,
    PsiE,
    PsiH,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_path(p),
        None => Ok(RunConfig::default()),
    }
}

#[cfg(feature = "parallel")]
fn init_workers(workers: usize) {
    if workers > 1 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn init_workers(_workers: usize) {}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            config,
            v_top,
            v_bottom,
            v_left,
            v_right,
        } => {
            let cfg = load_config(&config)?;
            let mut gates = cfg.gate_voltages();
            if let Some(v) = v_top {
                gates.v_top = v;
            }
            if let Some(v) = v_bottom {
                gates.v_bottom = v;
            }
            if let Some(v) = v_left {
                gates.v_left = v;
            }
            if let Some(v) = v_right {
                gates.v_right = v;
            }
            gates.validate()?;
            let report = evaluate_configuration(
                &cfg.device_spec(),
                &cfg.grid2d(),
                &gates,
                &cfg.solver_options(),
            )?;
            println!("{}", report.to_json());
            Ok(())
        }
        Command::Sweep { config, mode } => {
            let cfg = load_config(&config)?;
            init_workers(cfg.workers);
            run_sweep(&cfg, mode)
        }
        Command::Optimize { config } => {
            let cfg = load_config(&config)?;
            init_workers(cfg.workers);
            run_optimize(&cfg)
        }
        Command::ExportFields { config, what } => {
            let cfg = load_config(&config)?;
            let fields = solve_fields(
                &cfg.device_spec(),
                &cfg.grid2d(),
                &cfg.gate_voltages(),
                &cfg.solver_options(),
            )?;
            let stdout = std::io::stdout();
            let lock = stdout.lock();
            match what {
                FieldChoice::Potential => fields.potential.write_csv(lock, "phi_V"),
                FieldChoice::PsiE => fields.electron.wavefunction.write_csv(lock, "psi_e"),
                FieldChoice::PsiH => fields.hole.wavefunction.write_csv(lock, "psi_h"),
            }
        }
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    let dir = Path::new(&cfg.output.dir);
    std::fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

fn write_file(path: &Path, write: impl FnOnce(&mut dyn std::io::Write) -> Result<()>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write(&mut f)?;
    use std::io::Write as _;
    f.flush()?;
    Ok(())
}

fn crossings_json(crossings: &[ZeroCrossing]) -> String {
    let items: Vec<String> = crossings
        .iter()
        .map(|c| {
            format!(
                "{{\"v_lo_V\": {}, \"v_hi_V\": {}, \"v_zero_V\": {}, \"fss_ueV\": {}, \"beta\": {}}}",
                fmt_sig9(c.v_lo),
                fmt_sig9(c.v_hi),
                fmt_sig9(c.v_zero),
                fmt_sig9(c.report.fss_uev),
                fmt_sig9(c.report.beta)
            )
        })
        .collect();
    format!("[{}]", items.join(", "))
}

fn min_fss_record(records: &[SweepRecord]) -> Option<&SweepRecord> {
    records
        .iter()
        .filter(|r| r.report().is_some())
        .min_by(|a, b| {
            a.report()
                .unwrap()
                .fss_uev
                .total_cmp(&b.report().unwrap().fss_uev)
        })
}

fn run_sweep(cfg: &RunConfig, mode: SweepMode) -> Result<()> {
    let spec = cfg.device_spec();
    let grid = cfg.grid2d();
    let opts = cfg.solver_options();
    let sw = &cfg.sweep;
    match mode {
        SweepMode::Quadrupole | SweepMode::Lateral => {
            let lateral = matches!(mode, SweepMode::Lateral);
            let records = if lateral {
                sweep_lateral(
                    &spec,
                    &grid,
                    (sw.v_min, sw.v_max),
                    sw.n_points,
                    &opts,
                    cfg.exec_mode(),
                )?
            } else {
                sweep_quadrupole(
                    &spec,
                    &grid,
                    (sw.v_min, sw.v_max),
                    sw.n_points,
                    &opts,
                    cfg.exec_mode(),
                )?
            };
            let csv = out_path(cfg, &cfg.output.sweep_csv)?;
            write_file(&csv, |w| write_sweep_csv(&records, w))?;
            let crossings = refine_zero_crossings(
                &records,
                |v| {
                    let gates = if lateral {
                        lateral_gates(v)
                    } else {
                        QuadrupoleParam::pure(v).gate_voltages()
                    };
                    evaluate_configuration(&spec, &grid, &gates, &opts)
                },
                sw.crossing_tol_uev,
            )?;
            let min = min_fss_record(&records);
            let min_json = match min {
                Some(r) => {
                    let rep = r.report().unwrap();
                    format!(
                        "{{\"v_V\": {}, \"fss_ueV\": {}, \"beta\": {}}}",
                        fmt_sig9(r.v),
                        fmt_sig9(rep.fss_uev),
                        fmt_sig9(rep.beta)
                    )
                }
                None => "null".to_string(),
            };
            println!(
                "{{\n  \"mode\": \"{}\",\n  \"n_points\": {},\n  \"csv\": \"{}\",\n  \"zero_crossings\": {},\n  \"min_fss\": {}\n}}",
                if lateral { "lateral" } else { "quadrupole" },
                records.len(),
                csv.display(),
                crossings_json(&crossings),
                min_json
            );
            Ok(())
        }
        SweepMode::Grid => {
            let sweep = sweep_grid_asymmetric(
                &spec,
                &grid,
                sw.v_fixed,
                (sw.dv_rl_min, sw.dv_rl_max),
                (sw.dv_tb_min, sw.dv_tb_max),
                sw.n_rl,
                sw.n_tb,
                &opts,
                cfg.exec_mode(),
            )?;
            let csv = out_path(cfg, &cfg.output.grid_csv)?;
            write_file(&csv, |w| write_grid_csv(&sweep, w))?;
            let matrix_csv = out_path(cfg, &cfg.output.grid_matrix_csv)?;
            write_file(&matrix_csv, |w| write_grid_matrix_csv(&sweep, w))?;
            let min_json = match sweep.min_record() {
                Some(r) => {
                    let rep = r.report().unwrap();
                    format!(
                        "{{\"dv_rl_V\": {}, \"dv_tb_V\": {}, \"fss_ueV\": {}, \"beta\": {}}}",
                        fmt_sig9(r.dv_rl),
                        fmt_sig9(r.dv_tb),
                        fmt_sig9(rep.fss_uev),
                        fmt_sig9(rep.beta)
                    )
                }
                None => "null".to_string(),
            };
            println!(
                "{{\n  \"mode\": \"grid\",\n  \"v_fixed_V\": {},\n  \"csv\": \"{}\",\n  \"matrix_csv\": \"{}\",\n  \"min_fss\": {}\n}}",
                fmt_sig9(sweep.v_fixed),
                csv.display(),
                matrix_csv.display(),
                min_json
            );
            Ok(())
        }
    }
}

fn run_optimize(cfg: &RunConfig) -> Result<()> {
    let outcome = minimize_fss(
        &cfg.device_spec(),
        &cfg.grid2d(),
        cfg.optimize_start(),
        &cfg.optimize_options(),
        &cfg.solver_options(),
    )?;
    let trace_csv = out_path(cfg, &cfg.output.trace_csv)?;
    write_file(&trace_csv, |w| write_trace_csv(&outcome.trace, w))?;
    println!(
        "{{\n  \"v_V\": {},\n  \"dv_rl_V\": {},\n  \"dv_tb_V\": {},\n  \"fss_ueV\": {},\n  \"beta\": {},\n  \"xi\": {},\n  \"converged\": {},\n  \"evaluations\": {},\n  \"trace_csv\": \"{}\"\n}}",
        fmt_sig9(outcome.best.v),
        fmt_sig9(outcome.best.dv_rl),
        fmt_sig9(outcome.best.dv_tb),
        fmt_sig9(outcome.report.fss_uev),
        fmt_sig9(outcome.report.beta),
        fmt_sig9(outcome.report.xi),
        outcome.converged,
        outcome.trace.len(),
        trace_csv.display()
    );
    Ok(())
}
