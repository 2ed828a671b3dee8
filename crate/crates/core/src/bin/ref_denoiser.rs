//! Reference denoiser server for the stdio protocol. Reads request frames
//! from stdin and answers on stdout until stdin closes.

use std::io::{self, BufReader, BufWriter, Write};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, ValueEnum};

use mesb::denoise::protocol::{read_request, write_response, Response};
use mesb::denoise::{Conditioning, Denoiser, GaussianAnalyticDenoiser};
use mesb::schedule::{NoiseSchedule, DEFAULT_BETA_MAX, DEFAULT_BETA_MIN};
use mesb::{Error, Tensor};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    /// Always predict zero noise.
    Zeros,
    /// Exact posterior mean for a Gaussian prior.
    Gaussian,
}

#[derive(Parser)]
#[command(name = "mesb-ref-denoiser", version)]
struct Args {
    #[arg(long, value_enum, default_value_t = Mode::Zeros)]
    mode: Mode,
    /// Prior mean: a number, or `corrupt` to centre on the request's corrupt image.
    #[arg(long, default_value = "corrupt")]
    mu0: String,
    #[arg(long, default_value_t = 0.01)]
    s0sq: f64,
    #[arg(long, default_value_t = DEFAULT_BETA_MIN)]
    beta_min: f64,
    #[arg(long, default_value_t = DEFAULT_BETA_MAX)]
    beta_max: f64,
    /// Exit with status 7 after answering this many requests.
    #[arg(long)]
    exit_after: Option<usize>,
    /// Stop answering (but stay alive) after this many requests.
    #[arg(long)]
    stall_after: Option<usize>,
    /// Reply with bytes that are not a valid frame after this many requests.
    #[arg(long)]
    garbage_after: Option<usize>,
    /// Reply with a protocol error message after this many requests.
    #[arg(long)]
    error_after: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let schedule = match NoiseSchedule::symmetric(args.beta_min, args.beta_max) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("bad schedule: {e}");
            return ExitCode::from(2);
        }
    };
    let fixed_mu = match args.mu0.as_str() {
        "corrupt" => None,
        s => match s.parse::<f64>() {
            Ok(v) => Some(v),
            Err(_) => {
                eprintln!("--mu0 must be a number or `corrupt`, got `{s}`");
                return ExitCode::from(2);
            }
        },
    };

    let mut input = BufReader::new(io::stdin().lock());
    let mut output = BufWriter::new(io::stdout().lock());
    let mut served = 0usize;
    loop {
        let req = match read_request(&mut input) {
            Ok(r) => r,
            Err(Error::Protocol(m)) if m.starts_with("stream ended") => return ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("cannot read request: {e}");
                return ExitCode::from(3);
            }
        };
        if args.exit_after.is_some_and(|k| served >= k) {
            eprintln!("exiting after {served} requests as instructed");
            return ExitCode::from(7);
        }
        if args.stall_after.is_some_and(|k| served >= k) {
            eprintln!("stalling after {served} requests as instructed");
            loop {
                std::thread::sleep(Duration::from_secs(3600));
            }
        }
        if args.garbage_after.is_some_and(|k| served >= k) {
            let _ = output.write_all(b"this is not a frame at all\n");
            let _ = output.flush();
            served += 1;
            continue;
        }
        let resp = if args.error_after.is_some_and(|k| served >= k) {
            Response::Error(format!("refusing request {served}"))
        } else {
            match answer(args.mode, fixed_mu, args.s0sq, &schedule, &req.x_t, req.t, &req.x_corrupt) {
                Ok(eps) => Response::Eps(eps),
                Err(e) => Response::Error(e.to_string()),
            }
        };
        if write_response(&mut output, &resp).is_err() || output.flush().is_err() {
            return ExitCode::from(3);
        }
        served += 1;
    }
}

fn answer(
    mode: Mode,
    fixed_mu: Option<f64>,
    s0sq: f64,
    schedule: &Arc<NoiseSchedule>,
    x_t: &Tensor,
    t: f64,
    x_corrupt: &Tensor,
) -> mesb::Result<Tensor> {
    match mode {
        Mode::Zeros => Tensor::zeros(x_t.shape()),
        Mode::Gaussian => {
            let mu0 = match fixed_mu {
                Some(m) => Tensor::from_vec(vec![m])?,
                None => x_corrupt.clone(),
            };
            let den = GaussianAnalyticDenoiser::new(mu0, s0sq, schedule.clone())?;
            den.predict_eps(x_t, t, &Conditioning::new(x_corrupt.clone()))
        }
    }
}
