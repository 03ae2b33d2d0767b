//! Acceptance criteria A1-A8. Prints one PASS/FAIL/SKIP line per criterion
//! (indented lines underneath are detail) and exits nonzero if any fails.
//!
//! Arguments: criterion ids (`A4 A6`) restrict the run; `--include-ignored`,
//! `--ignored` or `NDO_ACCEPTANCE_SLOW=1` enables the slow criteria.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::{
    accept_only_law, bulk_marginal, c, chi_square, dense_normalized_cost, exact_diagonal_probs,
    exact_pair_probs, histogram, kron_liouvillian, random_chain, random_ndo, Mat,
};
use ndo_core::oracle::{default_dt, find_steady_state_default, Rk4Integrator};
use ndo_core::sampling::stream_rng;
use ndo_core::training::{run_training_with, trailing_moving_average};
use ndo_core::{
    draw_batch, estimate_gradient, find_steady_state, sample_exact, BatchKind, ChainParameters64,
    Complex64, DenseDensityMatrix, NdoParameters, SamplerConfig, Strategy, TrainingConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
            details: Vec::new(),
        }
    }

    fn with_details(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    slow: bool,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: "A1", title: "oracle matches kernel; trace and hermiticity kept", slow: false, run: a1 },
    Criterion { id: "A2", title: "symmetric N=10 product fixed point", slow: false, run: a2 },
    Criterion { id: "A3", title: "gradient matches finite differences", slow: false, run: a3 },
    Criterion { id: "A4", title: "exact-mapping training, N=6 within 1%", slow: false, run: a4 },
    Criterion { id: "A5", title: "accept-only beats metropolis, symmetric N=10", slow: false, run: a5 },
    Criterion { id: "A6", title: "boundary overshoot under regular sampling, N=6", slow: false, run: a6 },
    Criterion { id: "A7", title: "hybrid sampling, N=10 boundaries within 2%", slow: true, run: a7 },
    Criterion { id: "A8", title: "sampler distributions, chi-square", slow: false, run: a8 },
];

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for c in CRITERIA {
            println!("{}: test", c.id);
        }
        return ExitCode::SUCCESS;
    }
    let slow = args.iter().any(|a| a == "--include-ignored" || a == "--ignored")
        || std::env::var_os("NDO_ACCEPTANCE_SLOW").is_some_and(|v| v != "0");
    let filters: Vec<&str> = args
        .iter()
        .filter(|a| !a.starts_with('-'))
        .map(String::as_str)
        .collect();

    let (mut passed, mut failed, mut skipped) = (0, 0, 0);
    for c in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| c.id.eq_ignore_ascii_case(f)) {
            continue;
        }
        if c.slow && !slow {
            skipped += 1;
            println!("{} SKIP {} (slow; pass --include-ignored)", c.id, c.title);
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Outcome::new(false, format!("panicked: {msg}"))
            });
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "{} {verdict} {}: {} [{:.0}s]",
            c.id,
            c.title,
            outcome.summary,
            start.elapsed().as_secs_f64()
        );
        for d in &outcome.details {
            println!("    {d}");
        }
        if outcome.pass {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

// ---------------------------------------------------------------- helpers

fn training_seeds(seed: u64) -> (u64, u64) {
    (seed, seed + 1)
}

fn config(strategy: Strategy, n_samples: usize, rate: f64, iterations: usize, seed: u64) -> TrainingConfig<f64> {
    let (params, sampler) = training_seeds(seed);
    let mut cfg = TrainingConfig::new(rate, iterations, SamplerConfig::new(strategy, n_samples, sampler));
    cfg.seed = params;
    cfg
}

/// Excited populations per iteration, `pops[t][i]`.
fn train_populations(chain: &ChainParameters64, cfg: &TrainingConfig<f64>) -> Vec<Vec<f64>> {
    try_train_populations(chain, cfg).expect("training failed")
}

fn try_train_populations(
    chain: &ChainParameters64,
    cfg: &TrainingConfig<f64>,
) -> Result<Vec<Vec<f64>>, ndo_core::Error> {
    let mut pops = Vec::with_capacity(cfg.n_iterations);
    run_training_with(chain, cfg, |r, _| {
        pops.push(r.site_excited_population.clone());
        Ok(())
    })?;
    Ok(pops)
}

/// `smoothed[i][t]`: trailing moving average of the relative deviation of site `i`.
fn smoothed_relative_deviation(pops: &[Vec<f64>], bench: &[f64], window: usize) -> Vec<Vec<f64>> {
    (0..bench.len())
        .map(|i| {
            let d: Vec<f64> = pops.iter().map(|p| (p[i] - bench[i]) / bench[i]).collect();
            trailing_moving_average(&d, window)
        })
        .collect()
}

#[derive(serde::Deserialize)]
struct Fixture {
    chain: ChainParameters64,
    site_excited_population: Vec<f64>,
}

fn fixture(name: &str) -> Fixture {
    let path = format!("{}/../core/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn chain_message(e: &dyn std::error::Error) -> String {
    let mut msg = e.to_string();
    let mut src = e.source();
    while let Some(s) = src {
        msg = format!("{msg}: {s}");
        src = s.source();
    }
    msg
}

fn pct(x: f64) -> String {
    format!("{:.3}%", 100.0 * x)
}

// ---------------------------------------------------------------- A1

/// Solves `M x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Mat, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let t = a[col][k];
                a[r][k] -= f * t;
            }
            let t = b[col];
            b[r] -= f * t;
        }
    }
    let mut x = vec![c(0.0, 0.0); n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for k in r + 1..n {
            acc -= a[r][k] * x[k];
        }
        x[r] = acc / a[r][r];
    }
    x
}

/// Steady state from the Kronecker superoperator with the trace condition
/// replacing the first row.
fn kernel_steady_state(chain: &ChainParameters64) -> Vec<Complex64> {
    let d = 1usize << chain.n_sites;
    let mut m = kron_liouvillian(chain);
    let mut b = vec![c(0.0, 0.0); d * d];
    m[0] = (0..d * d)
        .map(|k| if k / d == k % d { c(1.0, 0.0) } else { c(0.0, 0.0) })
        .collect();
    b[0] = c(1.0, 0.0);
    solve(m, b)
}

fn random_density_matrix(n: usize, seed: u64) -> DenseDensityMatrix<f64> {
    let d = 1usize << n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<Complex64> = (0..d * d)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut rho = vec![c(0.0, 0.0); d * d];
    for r in 0..d {
        for s in 0..d {
            rho[r * d + s] = (0..d).map(|k| a[r * d + k] * a[s * d + k].conj()).sum();
        }
    }
    let tr: f64 = (0..d).map(|k| rho[k * d + k].re).sum();
    rho.iter_mut().for_each(|z| *z /= tr);
    DenseDensityMatrix::from_data(n, rho).unwrap()
}

fn a1() -> Outcome {
    let mut worst_kernel = 0.0f64;
    let mut worst_trace = 0.0f64;
    let mut worst_herm = 0.0f64;
    let mut renorm = 0;
    let mut details = Vec::new();
    for k in 0..10u64 {
        let n = 1 + (k as usize % 4);
        let chain = random_chain(n, 1000 + k);
        let kernel = kernel_steady_state(&chain);
        let rho0 = DenseDensityMatrix::maximally_mixed(n).unwrap();
        let rk4 = find_steady_state(&chain, rho0, default_dt(&chain), 1e-12, 20_000_000).unwrap();
        let err = rk4
            .rho
            .as_slice()
            .iter()
            .zip(&kernel)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        worst_kernel = worst_kernel.max(err);

        let mut integ = Rk4Integrator::new(&chain, default_dt(&chain)).unwrap();
        let mut rho = random_density_matrix(n, 77 + k);
        for step in 1..=100_000 {
            integ.step(&mut rho).unwrap();
            if step % 100 == 0 {
                worst_trace = worst_trace.max((rho.trace() - c(1.0, 0.0)).norm());
                worst_herm = worst_herm.max(rho.hermiticity_error());
            }
        }
        renorm += integ.renormalizations();
        details.push(format!(
            "set {k}: N={n}, J={:.3}, max |rk4 - kernel| = {err:.2e} after {} steps",
            chain.coupling_j, rk4.steps_taken
        ));
    }
    let pass = worst_kernel <= 1e-6 && worst_trace <= 1e-8 && worst_herm <= 1e-8 && renorm == 0;
    Outcome::new(
        pass,
        format!(
            "max kernel error {worst_kernel:.2e} (tol 1e-6); over 1e5 steps trace error {worst_trace:.2e}, \
             hermiticity error {worst_herm:.2e} (tol 1e-8), {renorm} trace renormalisations"
        ),
    )
    .with_details(details)
}

// ---------------------------------------------------------------- A2

fn a2() -> Outcome {
    let chain = ChainParameters64::uniform(10, 0.42, 0.21, 0.20).unwrap();
    let r = find_steady_state_default(&chain).unwrap();
    let worst = r
        .site_excited_population
        .iter()
        .fold(0.0f64, |m, p| m.max((p - 0.512195).abs()));
    let mz_err = (r.magnetization_z - 0.024390).abs();
    Outcome::new(
        worst <= 1e-6 && mz_err <= 1e-6,
        format!(
            "max |n_i - 0.512195| = {worst:.2e}, |m_z - 0.024390| = {mz_err:.2e} (tol 1e-6), residual {:.1e}",
            r.residual
        ),
    )
}

// ---------------------------------------------------------------- A3

fn a3() -> Outcome {
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut where_ = String::new();
    for seed in 0..20u64 {
        let n = 2 + (seed as usize % 2);
        let chain = random_chain(n, 500 + seed);
        let p = random_ndo(n, n, n, 0.3, 900 + seed);
        let batch = sample_exact(&p, n, BatchKind::FullPair).unwrap();
        let g = estimate_gradient(&p, &batch, &chain).unwrap();
        let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let flat = p.flatten();
        for l in 0..flat.len() {
            let mut plus = flat.clone();
            let mut minus = flat.clone();
            plus[l] += h;
            minus[l] -= h;
            let cp = dense_normalized_cost(&chain, &NdoParameters::unflatten(p.layout(), &plus).unwrap());
            let cm = dense_normalized_cost(&chain, &NdoParameters::unflatten(p.layout(), &minus).unwrap());
            let fd = (cp - cm) / (2.0 * h);
            // components far below the gradient's scale are compared against it
            let err = (fd - g[l]).abs() / g[l].abs().max(1e-3 * scale);
            if err > worst {
                worst = err;
                where_ = format!("seed {seed}, N={n}, {}", p.layout().block_name(l));
            }
        }
    }
    Outcome::new(
        worst <= 1e-4,
        format!("max relative error {worst:.2e} (tol 1e-4) at {where_}; 20 seeds, N in {{2,3}}, M=K=N"),
    )
}

// ---------------------------------------------------------------- A4

fn a4() -> Outcome {
    let fx = fixture("boundary_driven_n6.json");
    let cfg = config(Strategy::Exact, 1, 0.1, 2000, 0);
    let pops = train_populations(&fx.chain, &cfg);
    let rel = |p: &[f64]| {
        p.iter()
            .zip(&fx.site_excited_population)
            .fold(0.0f64, |m, (x, b)| m.max((x - b).abs() / b))
    };
    let last = rel(pops.last().unwrap());
    let first_within = pops.iter().position(|p| rel(p) <= 0.01);
    let details = vec![
        format!("oracle {:?}", fx.site_excited_population),
        format!(
            "trained {:?}",
            pops.last().unwrap().iter().map(|x| (x * 1e6).round() / 1e6).collect::<Vec<_>>()
        ),
    ];
    Outcome::new(
        last <= 0.01,
        format!(
            "max relative deviation after {} iterations {} (tol 1%); first within 1% at iteration {:?}",
            pops.len(),
            pct(last),
            first_within.map(|t| t + 1)
        ),
    )
    .with_details(details)
}

// ---------------------------------------------------------------- A5

/// Larger of the relative deviations of the site-averaged excited and
/// ground populations.
fn site_averaged_deviation(pops: &[f64], bench: f64) -> f64 {
    let avg = pops.iter().sum::<f64>() / pops.len() as f64;
    let excited = (avg - bench).abs() / bench;
    let ground = (avg - bench).abs() / (1.0 - bench);
    excited.max(ground)
}

fn a5() -> Outcome {
    let chain = ChainParameters64::uniform(10, 0.42, 0.21, 0.20).unwrap();
    let bench = 0.21 / 0.41;
    let mut wins = 0;
    let mut worst_ao = 0.0f64;
    let mut failed = 0;
    let mut details = Vec::new();
    for seed in 0..10 {
        // a run that aborts counts as infinitely far off
        let dev = |strategy| match try_train_populations(&chain, &config(strategy, 20_000, 0.1, 100, seed)) {
            Ok(pops) => (site_averaged_deviation(pops.last().unwrap(), bench), String::new()),
            Err(e) => (f64::INFINITY, format!(" ({})", chain_message(&e))),
        };
        let ((m, m_err), (ao, ao_err)) = (dev(Strategy::Metropolis), dev(Strategy::AcceptOnly));
        failed += m.is_infinite() as usize + ao.is_infinite() as usize;
        wins += (ao < m) as usize;
        worst_ao = worst_ao.max(ao);
        details.push(format!("seed {seed}: metropolis {}{m_err}, accept-only {}{ao_err}", pct(m), pct(ao)));
    }
    Outcome::new(
        worst_ao < 0.02 && wins >= 7,
        format!(
            "accept-only worst deviation {} (tol 2%); accept-only better in {wins}/10 (need 7); {failed} aborted runs",
            pct(worst_ao)
        ),
    )
    .with_details(details)
}

// ---------------------------------------------------------------- A6

fn a6() -> Outcome {
    let fx = fixture("boundary_driven_n6.json");
    let n = fx.chain.n_sites;
    let mut hits = 0;
    let mut failed = 0;
    let mut details = Vec::new();
    for seed in 0..10 {
        let pops = match try_train_populations(&fx.chain, &config(Strategy::Metropolis, 20_000, 0.1, 500, seed)) {
            Ok(p) => p,
            Err(e) => {
                failed += 1;
                details.push(format!("seed {seed}: aborted ({})", chain_message(&e)));
                continue;
            }
        };
        let sd = smoothed_relative_deviation(&pops, &fx.site_excited_population, 50);
        // iterations 200..=500, i.e. records 199..500
        let mean_abs = |sites: &[usize]| {
            let mut acc = 0.0;
            for &i in sites {
                acc += sd[i][199..500].iter().map(|x| x.abs()).sum::<f64>();
            }
            acc / (sites.len() * 301) as f64
        };
        let boundary = mean_abs(&[0, n - 1]);
        let bulk = mean_abs(&(1..n - 1).collect::<Vec<_>>());
        hits += (boundary > 3.0 * bulk) as usize;
        details.push(format!(
            "seed {seed}: boundary {}, bulk {}, ratio {:.2}",
            pct(boundary),
            pct(bulk),
            boundary / bulk
        ));
    }
    Outcome::new(
        hits >= 8,
        format!("boundary deviation > 3x bulk in {hits}/10 seeds (need 8); {failed} aborted runs"),
    )
    .with_details(details)
}

// ---------------------------------------------------------------- A7

fn a7() -> Outcome {
    let fx = fixture("boundary_driven_n10.json");
    let n = fx.chain.n_sites;
    let pops = train_populations(&fx.chain, &config(Strategy::Hybrid, 40_000, 0.05, 300, 0));
    let sd = smoothed_relative_deviation(&pops, &fx.site_excited_population, 50);
    let t = pops.len() - 1;
    let (left, right) = (sd[0][t].abs(), sd[n - 1][t].abs());
    let bulk_max = (1..n - 1).fold(0.0f64, |m, i| m.max(sd[i][t].abs()));
    Outcome::new(
        left.max(right) <= 0.02,
        format!(
            "smoothed boundary deviations {} and {} after {} iterations (tol 2%); bulk max {}",
            pct(left),
            pct(right),
            pops.len(),
            pct(bulk_max)
        ),
    )
}

// ---------------------------------------------------------------- A8

fn a8() -> Outcome {
    let mut details = Vec::new();
    let mut all = true;
    let mut check = |label: String, p: f64, threshold: f64, extra: String| {
        let ok = p > threshold;
        all &= ok;
        details.push(format!(
            "{} {label}: p = {p:.3e} (need > {threshold}){extra}",
            if ok { "ok  " } else { "FAIL" }
        ));
    };
    let ns = 1_000_000;

    for seed in 0..3u64 {
        let p = NdoParameters::init_random(2, 2, 2, seed).unwrap();
        let exact = exact_pair_probs(&p);
        let cfg = SamplerConfig::new(Strategy::Metropolis, ns, seed);
        let b = draw_batch(&p, &cfg, BatchKind::FullPair, &mut stream_rng(seed, 0)).unwrap();
        let counts = histogram(b.pairs.iter().map(|x| x.index()), 16);
        check(format!("metropolis N=2 pairs, theta seed {seed}"), chi_square(&counts, &exact).1, 0.01, String::new());
    }

    let p = NdoParameters::init_random(3, 3, 3, 5).unwrap();
    let cfg = SamplerConfig::new(Strategy::Metropolis, ns, 5);
    let b = draw_batch(&p, &cfg, BatchKind::Diagonal, &mut stream_rng(5, 1)).unwrap();
    let counts = histogram(b.pairs.iter().map(|x| x.sigma.index()), 8);
    check(
        "metropolis N=3 diagonal".into(),
        chi_square(&counts, &exact_diagonal_probs(&p)).1,
        0.01,
        String::new(),
    );

    for seed in 0..3u64 {
        let p = NdoParameters::init_random(2, 2, 2, seed).unwrap();
        let exact = exact_pair_probs(&p);
        let cfg = SamplerConfig::new(Strategy::AcceptOnly, ns, seed);
        let b = draw_batch(&p, &cfg, BatchKind::FullPair, &mut stream_rng(seed, 0)).unwrap();
        let counts = histogram(b.pairs.iter().map(|x| x.index()), 16);
        let own = chi_square(&counts, &accept_only_law(&exact)).1;
        check(
            format!("accept-only N=2 pairs vs |rho|^2/Z, theta seed {seed}"),
            chi_square(&counts, &exact).1,
            0.001,
            format!("; vs sum_y min(p(x), p(y)): p = {own:.3}"),
        );
    }

    for seed in 0..2u64 {
        let n = 4;
        let p = NdoParameters::init_random(n, n, n, 10 + seed).unwrap();
        let (marginal, key) = bulk_marginal(&exact_pair_probs(&p), n, 0b1001);
        let cfg = SamplerConfig::new(Strategy::Hybrid, ns, seed);
        let b = draw_batch(&p, &cfg, BatchKind::FullPair, &mut stream_rng(seed, 0)).unwrap();
        let counts = histogram(b.pairs.iter().map(|x| key[x.index()]), marginal.len());
        let own = chi_square(&counts, &accept_only_law(&marginal)).1;
        check(
            format!("hybrid N=4 bulk marginal vs edge-summed |rho|^2, theta seed {}", 10 + seed),
            chi_square(&counts, &marginal).1,
            0.001,
            format!("; vs accept-only law of the marginal: p = {own:.3}"),
        );
    }

    let failed = details.iter().filter(|d| d.starts_with("FAIL")).count();
    Outcome::new(
        all,
        format!("{} of {} sub-checks pass (10^6 samples each)", details.len() - failed, details.len()),
    )
    .with_details(details)
}
