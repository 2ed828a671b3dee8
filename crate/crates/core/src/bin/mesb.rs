use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use mesb::denoise::protocol::{DenoiseRequest, Response};
use mesb::denoise::ExternalDenoiser;
use mesb::harness::{fmt_num, run_experiment, sweep, to_csv, ExperimentResult, SweepParam, Task};
use mesb::io::{parse_number_list, write_f32, write_pgm, RunConfig, DEFAULT_DENOISER_TIMEOUT_MS};
use mesb::par::Parallelism;
use mesb::schedule::NoiseSchedule;
use mesb::theory::{run_check, CHECK_NAMES};
use mesb::{Error, Tensor};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "mesb", version, about = "Schrodinger-bridge samplers for linear inverse problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sampler on every phantom and write images and metrics.csv.
    Run {
        config: PathBuf,
        /// Overrides [output] directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Run phantoms one after another instead of on the thread pool.
        #[arg(long)]
        sequential: bool,
    },
    /// Vary k_y or k_E and write one averaged row per value to sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values; `inf` is accepted.
        #[arg(long)]
        values: String,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Run a named numerical check and report whether it meets its tolerance.
    Verify {
        #[arg(long)]
        check: String,
        #[arg(long, default_value_t = mesb::schedule::DEFAULT_BETA_MIN)]
        beta_min: f64,
        #[arg(long, default_value_t = mesb::schedule::DEFAULT_BETA_MAX)]
        beta_max: f64,
    },
    /// Send one probe frame to an external denoiser and validate the reply.
    DenoiserCheck {
        #[arg(long)]
        command: String,
        #[arg(long, default_value_t = DEFAULT_DENOISER_TIMEOUT_MS)]
        timeout_ms: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_RUNTIME,
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> mesb::Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_image(dir: &Path, stem: &str, img: &Tensor) -> mesb::Result<()> {
    let pgm = dir.join(format!("{stem}.pgm"));
    write_pgm(&pgm, img).map_err(|e| match e {
        Error::Io(io) => io_err(&pgm, io),
        e => e,
    })?;
    let raw = dir.join(format!("{stem}.f32"));
    write_f32(&raw, img).map_err(|e| match e {
        Error::Io(io) => io_err(&raw, io),
        e => e,
    })
}

fn prepare_dir(cfg: &RunConfig, over: Option<PathBuf>) -> mesb::Result<PathBuf> {
    let dir = over.unwrap_or_else(|| cfg.output.directory.clone());
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn metadata(cfg: &RunConfig, result: &ExperimentResult, extra: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "task = {}", cfg.task.kind);
    let _ = writeln!(s, "size = {}", cfg.task.size);
    let _ = writeln!(s, "n_phantoms = {}", cfg.n_phantoms);
    let _ = writeln!(s, "noise_percent = {}", fmt_num(cfg.task.noise_percent));
    let _ = writeln!(s, "noise_convention = sigma_noise = noise_percent/100 * max|A x_true|");
    let _ = writeln!(s, "phantom_seed = {}", cfg.task.phantom_seed);
    let _ = writeln!(s, "sampler = {}", cfg.sampler.kind);
    let _ = writeln!(s, "beta_min = {}", fmt_num(cfg.beta_min));
    let _ = writeln!(s, "beta_max = {}", fmt_num(cfg.beta_max));
    let _ = writeln!(s, "grid = {:?}", cfg.grid_density);
    let _ = writeln!(s, "denoiser = {}", cfg.denoiser.kind_name());
    let _ = writeln!(s, "metrics_data_range = 1");
    s.push_str(extra);
    for r in result.errors() {
        let idx = r.phantom_index.map_or("mean".to_string(), |i| i.to_string());
        let _ = writeln!(s, "error[{}:{idx}] = {}", r.sampler, r.error.as_deref().unwrap_or(""));
    }
    s
}

fn report_errors(result: &ExperimentResult) -> bool {
    let mut any = false;
    for r in result.errors() {
        any = true;
        let idx = r.phantom_index.map_or("mean".to_string(), |i| i.to_string());
        eprintln!("error: {} on phantom {idx}: {}", r.sampler, r.error.as_deref().unwrap_or(""));
    }
    any
}

fn factory(cfg: &RunConfig, schedule: Arc<NoiseSchedule>) -> impl Fn(&Task) -> mesb::Result<Arc<dyn mesb::denoise::Denoiser>> + Sync + '_ {
    move |task: &Task| cfg.denoiser.build(task, &schedule)
}

fn cmd_run(config: &Path, output_dir: Option<PathBuf>, sequential: bool) -> mesb::Result<bool> {
    let cfg = RunConfig::load(config)?;
    let dir = prepare_dir(&cfg, output_dir)?;
    let mut exp = cfg.experiment()?;
    if sequential {
        exp.parallelism = Parallelism::Sequential;
    }
    let result = run_experiment(&exp, factory(&cfg, exp.schedule.clone()))?;

    for p in &result.phantoms {
        write_image(&dir, &format!("phantom_{:03}_true", p.index), &p.x_true)?;
        write_image(&dir, &format!("phantom_{:03}_corrupt", p.index), &p.x_corrupt)?;
    }
    for run in &result.runs {
        let i = run.row.phantom_index.unwrap_or(0);
        if let Some(x) = &run.output {
            write_image(&dir, &format!("phantom_{i:03}_{}", run.row.sampler), x)?;
        }
        if let Some(traj) = &run.trajectory {
            let mut csv = String::from("n,t,cg_residual,data_residual\n");
            for st in &traj.steps {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    st.n,
                    fmt_num(st.t),
                    st.cg_residual.map_or(String::new(), fmt_num),
                    st.data_residual.map_or(String::new(), fmt_num),
                );
                write_image(&dir, &format!("phantom_{i:03}_step_{:03}_x0", st.n), &st.x0_new)?;
            }
            write_file(&dir.join(format!("phantom_{i:03}_trajectory.csv")), csv.as_bytes())?;
        }
    }
    write_file(&dir.join("metrics.csv"), to_csv(result.rows()).as_bytes())?;
    write_file(&dir.join("metadata.txt"), metadata(&cfg, &result, "").as_bytes())?;
    println!("wrote {} rows to {}", result.runs.len(), dir.join("metrics.csv").display());
    Ok(!report_errors(&result))
}

fn cmd_sweep(
    config: &Path,
    param: &str,
    values: &str,
    output_dir: Option<PathBuf>,
    sequential: bool,
) -> mesb::Result<bool> {
    let cfg = RunConfig::load(config)?;
    let param: SweepParam = param.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let values = parse_number_list(values)?;
    let dir = prepare_dir(&cfg, output_dir)?;
    let mut exp = cfg.experiment()?;
    exp.keep_outputs = false;
    exp.keep_trajectories = false;
    if sequential {
        exp.parallelism = Parallelism::Sequential;
    }
    let result = sweep(&exp, param, &values, factory(&cfg, exp.schedule.clone())).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::Config(m),
        e => e,
    })?;
    let extra = format!(
        "sweep_param = {param}\nsweep_values = {}\n",
        values.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(",")
    );
    write_file(&dir.join("sweep.csv"), to_csv(&result.cells).as_bytes())?;
    write_file(&dir.join("sweep_metadata.txt"), metadata(&cfg, &result, &extra).as_bytes())?;
    print!("{}", to_csv(&result.cells));
    Ok(!report_errors(&result))
}

fn cmd_verify(check: &str, beta_min: f64, beta_max: f64) -> mesb::Result<bool> {
    if !CHECK_NAMES.contains(&check) {
        return Err(Error::Config(format!(
            "unknown check `{check}`; available checks: {}",
            CHECK_NAMES.join(", ")
        )));
    }
    let schedule = NoiseSchedule::symmetric(beta_min, beta_max).map_err(|e| Error::Config(e.to_string()))?;
    let out = run_check(check, &schedule)?;
    println!("check {}", out.name);
    for l in &out.lines {
        println!("{l}");
    }
    println!("{}", if out.passed { "PASS" } else { "FAIL" });
    Ok(out.passed)
}

fn cmd_denoiser_check(command: &str, timeout_ms: u64) -> mesb::Result<bool> {
    let den = ExternalDenoiser::new(command, timeout_ms)?;
    let shape = [4usize, 4];
    let req = DenoiseRequest {
        t: 0.5,
        x_t: Tensor::from_fn(&shape, |i| i as f64 / 16.0)?,
        x_corrupt: Tensor::full(&shape, 0.25)?,
    };
    match den.round_trip(&req)? {
        Response::Eps(eps) if eps.shape() == shape && eps.is_finite() => {
            println!("ok: `{}` answered a {}x{} probe with a finite reply of matching shape", den.command(), shape[0], shape[1]);
            Ok(true)
        }
        Response::Eps(eps) => Err(Error::Protocol(format!(
            "probe reply has shape {:?} (expected {shape:?}) or non-finite values",
            eps.shape()
        ))),
        Response::Error(m) => Err(Error::ExternalDenoiser {
            message: format!("denoiser reported an error for the probe: {m}"),
            diagnostics: String::new(),
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run {
            config,
            output_dir,
            sequential,
        } => cmd_run(&config, output_dir, sequential),
        Command::Sweep {
            config,
            param,
            values,
            output_dir,
            sequential,
        } => cmd_sweep(&config, &param, &values, output_dir, sequential),
        Command::Verify {
            check,
            beta_min,
            beta_max,
        } => cmd_verify(&check, beta_min, beta_max),
        Command::DenoiserCheck { command, timeout_ms } => cmd_denoiser_check(&command, timeout_ms),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_RUNTIME),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
