//! Quick in-process invariant checks, one line of output per check.

use anyhow::bail;
use ndo_core::oracle::{default_dt, steady_state_from_kernel};
use ndo_core::sampling::stream_rng;
use ndo_core::{
    build_dense_liouvillian, draw_batch, enumerate_configurations, estimate_cost,
    estimate_gradient, find_steady_state, hamiltonian_action, liouvillian_row, sample_exact,
    BatchKind, ChainParameters64, Complex64, DenseDensityMatrix, NdoCheckpoint, NdoParameters,
    SamplePair, SamplerConfig, Strategy,
};

type Check = fn() -> Result<(), String>;

fn pairs(n: usize) -> impl Iterator<Item = SamplePair> {
    (0..1usize << (2 * n)).map(move |i| SamplePair::from_index(i, n))
}

fn asymmetric(n: usize) -> ChainParameters64 {
    let gin = (0..n).map(|i| 0.1 + 0.05 * i as f64).collect();
    let gout = (0..n).map(|i| 0.3 - 0.04 * i as f64).collect();
    ChainParameters64::new(n, 0.42, gin, gout).unwrap()
}

fn ndo(n: usize) -> NdoParameters<f64> {
    let mut p = NdoParameters::init_random(n, n, n, 7).unwrap();
    // push the parameters away from the near-zero initialisation
    let flat: Vec<f64> = p.flatten().iter().map(|x| x * 40.0).collect();
    p = NdoParameters::unflatten(p.layout(), &flat).unwrap();
    p
}

fn e(err: ndo_core::Error) -> String {
    err.to_string()
}

fn liouvillian_preserves_trace() -> Result<(), String> {
    let chain = asymmetric(3);
    let l = build_dense_liouvillian(&chain).map_err(e)?;
    let d = 1usize << 3;
    for col in 0..l.dim() {
        let s: Complex64 = (0..d).map(|k| l.get(k * d + k, col)).sum();
        if s.norm() > 1e-12 {
            return Err(format!("column {col} sums to {s}"));
        }
    }
    Ok(())
}

fn stencil_matches_dense_rows() -> Result<(), String> {
    let chain = asymmetric(3);
    let l = build_dense_liouvillian(&chain).map_err(e)?;
    for pair in pairs(3) {
        let row = liouvillian_row(pair, &chain).map_err(e)?;
        let mut dense = vec![Complex64::new(0.0, 0.0); l.dim()];
        for (q, v) in &row.entries {
            dense[q.index()] += v;
        }
        for (c, v) in dense.iter().enumerate() {
            if (v - l.get(pair.index(), c)).norm() > 1e-14 {
                return Err(format!("row {} column {c}", pair.index()));
            }
        }
    }
    Ok(())
}

fn hamiltonian_conserves_magnetization() -> Result<(), String> {
    let chain = asymmetric(6);
    for s in enumerate_configurations(6).map_err(e)? {
        for (t, _) in hamiltonian_action(s, &chain).map_err(e)? {
            if t.popcount() != s.popcount() {
                return Err(format!("{s} -> {t}"));
            }
        }
    }
    Ok(())
}

fn rk4_matches_kernel() -> Result<(), String> {
    let chain = asymmetric(3);
    let kernel = steady_state_from_kernel(&chain).map_err(e)?;
    let rho = DenseDensityMatrix::maximally_mixed(3).map_err(e)?;
    let r = find_steady_state(&chain, rho, default_dt(&chain), 1e-11, 2_000_000).map_err(e)?;
    let err = r
        .rho
        .as_slice()
        .iter()
        .zip(kernel.as_slice())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    if err > 1e-6 {
        return Err(format!("max |rho_rk4 - rho_kernel| = {err:e}"));
    }
    if (r.rho.trace().re - 1.0).abs() > 1e-8 || r.rho.hermiticity_error() > 1e-8 {
        return Err("trace or hermiticity drift".into());
    }
    Ok(())
}

fn symmetric_chain_is_product_state() -> Result<(), String> {
    let chain = ChainParameters64::uniform(4, 0.42, 0.21, 0.20).unwrap();
    let r = find_steady_state(
        &chain,
        DenseDensityMatrix::maximally_mixed(4).map_err(e)?,
        default_dt(&chain),
        1e-11,
        2_000_000,
    )
    .map_err(e)?;
    let want = 0.21 / 0.41;
    for (i, p) in r.site_excited_population.iter().enumerate() {
        if (p - want).abs() > 1e-8 {
            return Err(format!("site {i}: {p} vs {want}"));
        }
    }
    Ok(())
}

fn ndo_is_hermitian() -> Result<(), String> {
    let p = ndo(3);
    for pair in pairs(3) {
        let a = p.log_rho(pair).map_err(e)?;
        let b = p.log_rho(pair.transposed()).map_err(e)?.conj();
        if (a.exp() - b.exp()).norm() > 1e-12 * a.exp().norm() {
            return Err(format!("{pair:?}"));
        }
    }
    Ok(())
}

fn log_derivatives_match_differences() -> Result<(), String> {
    let p = ndo(2);
    let flat = p.flatten();
    let h = 1e-6;
    for pair in pairs(2).step_by(3) {
        let o = p.log_derivatives(pair).map_err(e)?.0;
        for l in 0..flat.len() {
            let mut plus = flat.clone();
            let mut minus = flat.clone();
            plus[l] += h;
            minus[l] -= h;
            let f = |v: &[f64]| NdoParameters::unflatten(p.layout(), v).and_then(|q| q.log_rho(pair));
            let fd = (f(&plus).map_err(e)? - f(&minus).map_err(e)?) / (2.0 * h);
            if (fd - o[l]).norm() > 1e-5 * o[l].norm().max(1.0) {
                return Err(format!("slot {l}: {fd} vs {}", o[l]));
            }
        }
    }
    Ok(())
}

fn checkpoint_roundtrip() -> Result<(), String> {
    let p = ndo(4);
    let text = serde_json::to_string(&p.checkpoint(Some(7))).map_err(|x| x.to_string())?;
    let ck: NdoCheckpoint = serde_json::from_str(&text).map_err(|x| x.to_string())?;
    let q = NdoParameters::<f64>::from_checkpoint(&ck).map_err(e)?;
    if q.flatten() != p.flatten() {
        return Err("parameters changed".into());
    }
    Ok(())
}

fn gradient_matches_differences_of_cost() -> Result<(), String> {
    let chain = asymmetric(2);
    let p = NdoParameters::unflatten(
        ndo(2).layout(),
        &ndo(2).flatten().iter().map(|x| x * 0.5).collect::<Vec<_>>(),
    )
    .map_err(e)?;
    let cost = |q: &NdoParameters<f64>| {
        sample_exact(q, 2, BatchKind::FullPair).and_then(|b| estimate_cost(q, &b, &chain))
    };
    let batch = sample_exact(&p, 2, BatchKind::FullPair).map_err(e)?;
    let g = estimate_gradient(&p, &batch, &chain).map_err(e)?;
    let flat = p.flatten();
    let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let h = 1e-5;
    for l in 0..flat.len() {
        let mut plus = flat.clone();
        let mut minus = flat.clone();
        plus[l] += h;
        minus[l] -= h;
        let cp = cost(&NdoParameters::unflatten(p.layout(), &plus).map_err(e)?).map_err(e)?;
        let cm = cost(&NdoParameters::unflatten(p.layout(), &minus).map_err(e)?).map_err(e)?;
        let fd = (cp - cm) / (2.0 * h);
        if (fd - g[l]).abs() > 1e-4 * g[l].abs().max(1e-3 * scale) {
            return Err(format!("slot {l}: {fd} vs {}", g[l]));
        }
    }
    Ok(())
}

fn samplers_are_deterministic_and_normalized() -> Result<(), String> {
    let p = ndo(4);
    for strategy in [Strategy::Exact, Strategy::Metropolis, Strategy::AcceptOnly, Strategy::Hybrid] {
        for kind in [BatchKind::FullPair, BatchKind::Diagonal] {
            let cfg = SamplerConfig::new(strategy, 2000, 3);
            let a = draw_batch(&p, &cfg, kind, &mut stream_rng(3, 0)).map_err(e)?;
            let b = draw_batch(&p, &cfg, kind, &mut stream_rng(3, 0)).map_err(e)?;
            let total: f64 = a.weights.iter().sum();
            if a != b || (total - 1.0).abs() > 1e-12 {
                return Err(format!("{strategy:?} {kind:?}"));
            }
        }
    }
    Ok(())
}

fn metropolis_converges_in_distribution() -> Result<(), String> {
    let p = ndo(2);
    let exact = sample_exact(&p, 2, BatchKind::FullPair).map_err(e)?;
    let mut want = vec![0.0; 16];
    for (x, w) in exact.pairs.iter().zip(&exact.weights) {
        want[x.index()] += w;
    }
    let cfg = SamplerConfig::new(Strategy::Metropolis, 200_000, 11);
    let b = draw_batch(&p, &cfg, BatchKind::FullPair, &mut stream_rng(11, 0)).map_err(e)?;
    let mut got = vec![0.0; 16];
    for (x, w) in b.pairs.iter().zip(&b.weights) {
        got[x.index()] += w;
    }
    let tv: f64 = 0.5 * got.iter().zip(&want).map(|(a, b)| (a - b).abs()).sum::<f64>();
    if tv > 0.02 {
        return Err(format!("total variation {tv}"));
    }
    Ok(())
}

const CHECKS: &[(&str, Check)] = &[
    ("liouvillian preserves trace", liouvillian_preserves_trace),
    ("row stencil matches dense liouvillian", stencil_matches_dense_rows),
    ("hamiltonian conserves magnetization", hamiltonian_conserves_magnetization),
    ("rk4 steady state matches kernel", rk4_matches_kernel),
    ("symmetric chain relaxes to product state", symmetric_chain_is_product_state),
    ("ndo is hermitian", ndo_is_hermitian),
    ("log-derivatives match finite differences", log_derivatives_match_differences),
    ("checkpoint round-trip is exact", checkpoint_roundtrip),
    ("gradient matches finite differences of cost", gradient_matches_differences_of_cost),
    ("samplers deterministic and normalized", samplers_are_deterministic_and_normalized),
    ("metropolis converges in distribution", metropolis_converges_in_distribution),
];

pub fn run() -> anyhow::Result<()> {
    let mut failed = 0;
    for (name, check) in CHECKS {
        match check() {
            Ok(()) => println!("ok    {name}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} self-test checks failed", CHECKS.len());
    }
    println!("all {} checks passed", CHECKS.len());
    Ok(())
}
