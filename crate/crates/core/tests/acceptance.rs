//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line
//! (run with `--nocapture` to see them) and then asserts.

use std::sync::Arc;
use std::time::{Duration, Instant};

use mesb::denoise::{x0_hat, Conditioning, Denoiser, ExternalDenoiser, GaussianAnalyticDenoiser, OracleDenoiser};
use mesb::harness::{make_task, run_experiment, sweep, to_csv, Experiment, SweepParam, Task, TaskKind, TaskSpec};
use mesb::io::{DenoiserSpec, PriorMean};
use mesb::par::Parallelism;
use mesb::samplers::{ddpm_posterior_sample, forward_sample, reverse_run, ReverseInputs, SamplerConfig, SamplerKind};
use mesb::schedule::{NoiseSchedule, TimeGrid, DEFAULT_BETA_MAX, DEFAULT_BETA_MIN};
use mesb::theory::run_check;
use mesb::{Error, SeededRng, Tensor};

const SERVER: &str = env!("CARGO_BIN_EXE_mesb-ref-denoiser");

/// Prior variance of the analytic denoiser used by the desk-scale criteria.
const PRIOR_VAR: f64 = 0.01;
const C7_MARGIN_DB: f64 = 0.5;
const C8_KY: [f64; 6] = [1.0, 4.0, 16.0, 32.0, 64.0, 1e6];
const C9_REL_TOL: f64 = 1e-5;
const C5_TOL: f64 = 1e-8;
const SE_BOUND: f64 = 3.0;
const MC_DRAWS: usize = 10_000;

fn schedule() -> Arc<NoiseSchedule> {
    Arc::new(NoiseSchedule::symmetric(DEFAULT_BETA_MIN, DEFAULT_BETA_MAX).unwrap())
}

fn report(n: u32, pass: bool, detail: &str, elapsed: Duration, budget_s: f64) -> bool {
    let in_time = elapsed.as_secs_f64() < budget_s;
    let ok = pass && in_time;
    println!(
        "criterion {n}: {} ({detail}; {:.2} s of {budget_s} s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    ok
}

fn analytic_factory(s: Arc<NoiseSchedule>) -> impl Fn(&Task) -> mesb::Result<Arc<dyn Denoiser>> + Sync {
    let spec = DenoiserSpec::GaussianAnalytic {
        mean: PriorMean::Corrupt,
        variance: PRIOR_VAR,
    };
    move |task: &Task| spec.build(task, &s)
}

fn inputs(task: &Task) -> ReverseInputs {
    ReverseInputs {
        x_corrupt: task.x_corrupt.clone(),
        y: task.y.clone(),
        op: task.op.clone(),
    }
}

fn check_outcome(n: u32, names: &[&str], budget_s: f64) {
    let start = Instant::now();
    let s = schedule();
    let mut pass = true;
    let mut detail = Vec::new();
    for name in names {
        let out = run_check(name, &s).unwrap();
        for l in &out.lines {
            println!("  {l}");
        }
        pass &= out.passed;
        detail.push(format!("{name} {}", if out.passed { "ok" } else { "failed" }));
    }
    assert!(report(n, pass, &detail.join(", "), start.elapsed(), budget_s));
}

#[test]
fn criterion_01_formulation_equivalence() {
    check_outcome(1, &["equivalence"], 5.0);
}

#[test]
fn criterion_02_cddb_is_a_proximal_step() {
    check_outcome(2, &["theorem2"], 5.0);
}

#[test]
fn criterion_03_potential_pde_residuals() {
    check_outcome(3, &["psi_pde", "psi_hat_pde", "grad_log_psi"], 10.0);
}

#[test]
fn criterion_04_degeneracy_lattice() {
    let start = Instant::now();
    let s = schedule();
    let mut pass = true;
    let mut cases = 0;
    for (kind, noise) in [(TaskKind::DeblurGauss, 0.0), (TaskKind::SrBlock, 1.0), (TaskKind::Inpaint, 0.5)] {
        let task = make_task(&TaskSpec::new(kind, 16).with_noise(noise), &mut SeededRng::new(4)).unwrap();
        let inp = inputs(&task);
        let den = GaussianAnalyticDenoiser::new(task.x_corrupt.clone(), PRIOR_VAR, s.clone()).unwrap();
        for n in [1, 10] {
            let grid = TimeGrid::quadratic(n).unwrap();
            for seed in [0u64, 31] {
                let run = |c: SamplerConfig| reverse_run(&den, &inp, &c.with_seed(seed), &s, &grid).unwrap().output;
                pass &= run(SamplerConfig::new(SamplerKind::I2sb, n)) == run(SamplerConfig::mesb(n, 0.0, 0.0));
                pass &= run(SamplerConfig::new(SamplerKind::Project, n))
                    == run(SamplerConfig::mesb(n, f64::INFINITY, 0.0));
                cases += 2;
            }
        }
    }
    assert!(report(4, pass, &format!("{cases} bitwise comparisons"), start.elapsed(), 5.0));
}

#[test]
fn criterion_05_oracle_fixed_point() {
    let start = Instant::now();
    let s = schedule();
    let task = make_task(&TaskSpec::new(TaskKind::DeblurGauss, 32), &mut SeededRng::new(5)).unwrap();
    let inp = inputs(&task);
    let den = OracleDenoiser::new(task.x_true.clone(), (*s).clone());
    let grid = TimeGrid::quadratic(10).unwrap();
    let mut worst: f64 = 0.0;
    for kind in SamplerKind::ALL {
        let cfg = match kind {
            SamplerKind::Mesb => SamplerConfig::mesb(10, f64::INFINITY, 20.0),
            k => SamplerConfig::new(k, 10),
        }
        .deterministic();
        let out = reverse_run(&den, &inp, &cfg, &s, &grid).unwrap().output;
        let err = out.sub(&task.x_true).unwrap().max_abs();
        println!("  {kind}: max error {err:e}");
        worst = worst.max(err);
    }
    assert!(report(5, worst <= C5_TOL, &format!("worst max error {worst:e} <= {C5_TOL:e}"), start.elapsed(), 5.0));
}

struct Moments {
    mean: f64,
    var: f64,
}

fn moments(v: &[f64]) -> Moments {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Moments { mean, var }
}

/// Whether sample moments of `n` normal draws sit within three standard errors
/// of the expected mean and variance.
fn moments_ok(m: &Moments, mean: f64, var: f64, n: usize) -> (bool, String) {
    let se_mean = (var / n as f64).sqrt();
    let se_var = var * (2.0 / (n as f64 - 1.0)).sqrt();
    let zm = (m.mean - mean) / se_mean;
    let zv = (m.var - var) / se_var;
    (
        zm.abs() <= SE_BOUND && zv.abs() <= SE_BOUND,
        format!("z_mean {zm:+.2}, z_var {zv:+.2}"),
    )
}

/// Self-normalised importance estimate of `E[X_0 | X_t = x]` for one coordinate,
/// drawing `X_0` from the prior. Returns the estimate and its standard error.
fn mc_conditional_mean(
    mu0: f64,
    s0sq: f64,
    x1: f64,
    x: f64,
    t: f64,
    s: &NoiseSchedule,
    rng: &mut SeededRng,
) -> (f64, f64) {
    let s2 = s.sigma2(t).unwrap();
    let sb2 = s.sigma_bar2(t).unwrap();
    let (a, b, v) = (sb2 / (s2 + sb2), s2 / (s2 + sb2), s2 * sb2 / (s2 + sb2));
    let draws: Vec<(f64, f64)> = (0..MC_DRAWS)
        .map(|_| {
            let x0 = mu0 + s0sq.sqrt() * rng.standard_normal();
            let r = x - a * x0 - b * x1;
            (x0, -r * r / (2.0 * v))
        })
        .collect();
    let top = draws.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = draws.iter().map(|d| (d.1 - top).exp()).collect();
    let sw: f64 = w.iter().sum();
    let est = draws.iter().zip(&w).map(|(d, w)| w * d.0).sum::<f64>() / sw;
    let se = draws.iter().zip(&w).map(|(d, w)| (w * (d.0 - est)).powi(2)).sum::<f64>().sqrt() / sw;
    (est, se)
}

#[test]
fn criterion_06_gaussian_oracle_statistics() {
    let start = Instant::now();
    let s = schedule();
    let mut rng = SeededRng::new(6);
    let mut pass = true;
    let shape = [MC_DRAWS];

    for (x0v, x1v, t) in [(0.2, 0.9, 0.5), (-1.0, 1.0, 0.1), (0.5, 0.5, 0.8)] {
        let x0 = Tensor::full(&shape, x0v).unwrap();
        let x1 = Tensor::full(&shape, x1v).unwrap();
        let xt = forward_sample(&x0, &x1, t, &s, &mut rng).unwrap();
        let (s2, sb2) = (s.sigma2(t).unwrap(), s.sigma_bar2(t).unwrap());
        let mean = (sb2 * x0v + s2 * x1v) / (s2 + sb2);
        let var = s2 * sb2 / (s2 + sb2);
        let (ok, d) = moments_ok(&moments(xt.as_slice()), mean, var, MC_DRAWS);
        println!("  forward t={t}: {d}");
        pass &= ok;
    }

    let grid = TimeGrid::quadratic(10).unwrap();
    for n in [2, 5, 10] {
        let (x0v, xnv) = (0.3, -0.4);
        let x0 = Tensor::full(&shape, x0v).unwrap();
        let xn = Tensor::full(&shape, xnv).unwrap();
        let out = ddpm_posterior_sample(&x0, &xn, n, &grid, &s, &mut rng, true).unwrap();
        let a2 = s.alpha2(grid.t(n - 1), grid.t(n)).unwrap();
        let s2 = s.sigma2(grid.t(n - 1)).unwrap();
        let mean = (a2 * x0v + s2 * xnv) / (a2 + s2);
        let var = s2 * a2 / (a2 + s2);
        let (ok, d) = moments_ok(&moments(out.as_slice()), mean, var, MC_DRAWS);
        println!("  posterior n={n}: {d}");
        pass &= ok;
    }

    for (mu0, x1, t) in [
        (vec![0.4], vec![0.1], 0.5),
        (vec![0.4, -0.2], vec![0.1, 0.6], 0.3),
        (vec![1.0, 0.0], vec![0.0, 1.0], 0.85),
    ] {
        let s0sq = 0.05;
        let d = mu0.len();
        let mu_t = Tensor::from_vec(mu0.clone()).unwrap();
        let x1_t = Tensor::from_vec(x1.clone()).unwrap();
        let den = GaussianAnalyticDenoiser::new(mu_t.clone(), s0sq, s.clone()).unwrap();
        let mut x0_draw = mu_t.clone();
        for (v, m) in x0_draw.as_mut_slice().iter_mut().zip(&mu0) {
            *v = m + s0sq.sqrt() * rng.standard_normal();
        }
        let x = forward_sample(&x0_draw, &x1_t, t, &s, &mut rng).unwrap();
        let got = x0_hat(&den, &x, t, &Conditioning::new(x1_t.clone()), &s).unwrap();
        for i in 0..d {
            let (est, se) = mc_conditional_mean(mu0[i], s0sq, x1[i], x.as_slice()[i], t, &s, &mut rng);
            let z = (got.as_slice()[i] - est) / se;
            println!("  analytic d={d} t={t} coord {i}: z {z:+.2}");
            pass &= z.abs() <= SE_BOUND;
        }
    }
    assert!(report(6, pass, "all statistics within 3 standard errors", start.elapsed(), 60.0));
}

fn deblur_experiment(s: &Arc<NoiseSchedule>) -> Experiment {
    let samplers = [10, 20]
        .into_iter()
        .flat_map(|n| {
            [
                SamplerConfig::new(SamplerKind::I2sb, n).deterministic(),
                SamplerConfig::mesb(n, f64::INFINITY, 20.0).deterministic(),
            ]
        })
        .collect();
    Experiment::new(TaskSpec::new(TaskKind::DeblurGauss, 32), samplers, 20, s.clone())
}

#[test]
fn criterion_07_mesb_beats_i2sb_on_deblur() {
    let start = Instant::now();
    let s = schedule();
    let r = run_experiment(&deblur_experiment(&s), analytic_factory(s.clone())).unwrap();
    assert_eq!(r.errors().count(), 0);
    let mut pass = true;
    let mut detail = Vec::new();
    for pair in r.cells.chunks(2) {
        let (i2sb, mesb) = (&pair[0], &pair[1]);
        println!(
            "  N={}: I2SB {:.3} dB res {:.4}, MESB {:.3} dB res {:.4}",
            i2sb.steps, i2sb.psnr_db, i2sb.data_residual, mesb.psnr_db, mesb.data_residual
        );
        pass &= mesb.psnr_db >= i2sb.psnr_db + C7_MARGIN_DB;
        pass &= mesb.data_residual < i2sb.data_residual;
        detail.push(format!("N={} gain {:+.2} dB", mesb.steps, mesb.psnr_db - i2sb.psnr_db));
    }
    assert!(report(7, pass, &detail.join(", "), start.elapsed(), 120.0));
}

fn sr_sweep_experiment(s: &Arc<NoiseSchedule>) -> Experiment {
    let base = SamplerConfig::mesb(10, 1.0, 0.0);
    Experiment::new(TaskSpec::new(TaskKind::SrBlock, 32).with_noise(1.0), vec![base], 10, s.clone())
}

/// Best swept `k_y` and its margin over the `1e6` endpoint.
fn best_k_y(exp: &Experiment, s: &Arc<NoiseSchedule>) -> (f64, f64, Vec<f64>) {
    let r = sweep(exp, SweepParam::KY, &C8_KY, analytic_factory(s.clone())).unwrap();
    assert_eq!(r.errors().count(), 0);
    let psnr: Vec<f64> = r.cells.iter().map(|c| c.psnr_db).collect();
    let mut best = 0;
    for (i, p) in psnr.iter().enumerate() {
        if *p > psnr[best] {
            best = i;
        }
    }
    let finite_best = psnr[..psnr.len() - 1].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (C8_KY[best], finite_best - psnr[psnr.len() - 1], psnr)
}

#[test]
fn criterion_08_interior_k_y_optimum() {
    let start = Instant::now();
    let s = schedule();
    let exp = sr_sweep_experiment(&s);
    let (best, margin, psnr) = best_k_y(&exp, &s);
    for (k, p) in C8_KY.iter().zip(&psnr) {
        println!("  k_y={k}: {p:.10} dB");
    }
    let pass = best < C8_KY[C8_KY.len() - 1];
    let elapsed = start.elapsed();

    let seeds = 10u64;
    let holds = (0..seeds)
        .filter(|&seed| {
            let mut e = exp.clone();
            e.samplers[0].seed = seed;
            let (b, m, _) = best_k_y(&e, &s);
            println!("  sampler seed {seed}: best k_y {b}, finite minus endpoint {m:+.2e} dB");
            b < C8_KY[C8_KY.len() - 1]
        })
        .count();
    let detail = format!("best k_y = {best}, margin {margin:+.2e} dB; holds for {holds} of {seeds} sampler seeds");
    assert!(report(8, pass, &detail, elapsed, 120.0));
}

#[test]
fn criterion_09_external_denoiser_protocol() {
    let start = Instant::now();
    let s = schedule();
    let mut pass = true;
    let mut rng = SeededRng::new(9);

    let ext = ExternalDenoiser::new(&format!("'{SERVER}' --mode gaussian --mu0 corrupt --s0sq 0.02"), 10_000).unwrap();
    let mut worst: f64 = 0.0;
    for t in [0.02, 0.25, 0.5, 0.75, 1.0] {
        let x_t = Tensor::gaussian(&[8, 8], &mut rng).unwrap();
        let xc = Tensor::gaussian(&[8, 8], &mut rng).unwrap();
        let local = GaussianAnalyticDenoiser::new(xc.clone(), 0.02, s.clone()).unwrap();
        let cond = Conditioning::new(xc);
        let want = local.predict_eps(&x_t, t, &cond).unwrap();
        let got = ext.predict_eps(&x_t, t, &cond).unwrap();
        worst = worst.max(got.sub(&want).unwrap().max_abs() / want.max_abs());
    }
    println!("  agreement: worst relative difference {worst:e}");
    pass &= worst <= C9_REL_TOL;

    let probe = Tensor::gaussian(&[4, 4], &mut rng).unwrap();
    let cond = Conditioning::new(probe.clone());
    let clean = |e: mesb::Result<Tensor>, what: &str| -> bool {
        match e {
            Err(Error::ExternalDenoiser { message, .. }) => {
                println!("  {what}: {message}");
                true
            }
            other => {
                println!("  {what}: unexpected {:?}", other.map(|_| ()));
                false
            }
        }
    };
    let killed = ExternalDenoiser::new(&format!("'{SERVER}' --exit-after 1"), 5_000).unwrap();
    pass &= killed.predict_eps(&probe, 0.5, &cond).is_ok();
    pass &= clean(killed.predict_eps(&probe, 0.5, &cond), "kill");

    let t0 = Instant::now();
    let stalled = ExternalDenoiser::new(&format!("'{SERVER}' --stall-after 0"), 500).unwrap();
    pass &= clean(stalled.predict_eps(&probe, 0.5, &cond), "timeout");
    pass &= t0.elapsed() < Duration::from_secs(5);

    let garbage = ExternalDenoiser::new(&format!("'{SERVER}' --garbage-after 0"), 5_000).unwrap();
    pass &= clean(garbage.predict_eps(&probe, 0.5, &cond), "garbage");

    assert!(report(9, pass, &format!("agreement {worst:.1e}, failures reported cleanly"), start.elapsed(), 30.0));
}

#[test]
fn criterion_10_byte_identical_reruns() {
    let start = Instant::now();
    let s = schedule();
    let mut pass = true;

    let stochastic_all: Vec<SamplerConfig> = SamplerKind::ALL
        .into_iter()
        .map(|k| match k {
            SamplerKind::Mesb => SamplerConfig::mesb(6, 4.0, 20.0),
            k => SamplerConfig::new(k, 6),
        })
        .map(|c| c.with_seed(10))
        .collect();
    for kind in TaskKind::ALL {
        let exp = Experiment::new(TaskSpec::new(kind, 16).with_noise(1.0), stochastic_all.clone(), 3, s.clone());
        let a = to_csv(run_experiment(&exp, analytic_factory(s.clone())).unwrap().rows());
        let b = to_csv(run_experiment(&exp, analytic_factory(s.clone())).unwrap().rows());
        let seq = exp.clone().with_parallelism(Parallelism::Sequential);
        let c = to_csv(run_experiment(&seq, analytic_factory(s.clone())).unwrap().rows());
        let same = a == b && a == c;
        println!("  {kind}: {} rows, reruns identical: {same}", a.lines().count() - 1);
        pass &= same;
    }

    let exp = deblur_experiment(&s);
    let a = to_csv(&run_experiment(&exp, analytic_factory(s.clone())).unwrap().cells);
    let b = to_csv(&run_experiment(&exp, analytic_factory(s.clone())).unwrap().cells);
    pass &= a == b;

    let exp = sr_sweep_experiment(&s);
    let a = to_csv(&sweep(&exp, SweepParam::KY, &C8_KY, analytic_factory(s.clone())).unwrap().cells);
    let b = to_csv(&sweep(&exp, SweepParam::KY, &C8_KY, analytic_factory(s.clone())).unwrap().cells);
    pass &= a == b;

    assert!(report(10, pass, "experiment, deblur table and k_y sweep CSVs", start.elapsed(), 600.0));
}
