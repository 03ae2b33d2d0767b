//! Independent reference constructions shared by the integration tests.
//!
//! Nothing here calls into the stencil or log-domain code paths: operators
//! are built from 2x2 Pauli matrices by Kronecker products, the Liouvillian
//! by applying the textbook Lindblad form to basis matrices, and the neural
//! density operator by multiplying out its product form directly.
#![allow(dead_code)]

use ndo_core::{ChainParameters, Complex64, NdoParameters};

pub type Mat = Vec<Vec<Complex64>>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn zeros(d: usize) -> Mat {
    vec![vec![c(0.0, 0.0); d]; d]
}

pub fn identity(d: usize) -> Mat {
    let mut m = zeros(d);
    for (k, row) in m.iter_mut().enumerate() {
        row[k] = c(1.0, 0.0);
    }
    m
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (da, db) = (a.len(), b.len());
    let mut out = zeros(da * db);
    for i in 0..da {
        for j in 0..da {
            for k in 0..db {
                for l in 0..db {
                    out[i * db + k][j * db + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let d = a.len();
    let mut out = zeros(d);
    for i in 0..d {
        for k in 0..d {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat, scale: Complex64) -> Mat {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + scale * y).collect())
        .collect()
}

pub fn dagger(a: &Mat) -> Mat {
    let d = a.len();
    (0..d).map(|i| (0..d).map(|j| a[j][i].conj()).collect()).collect()
}

/// Single-site basis: index 0 = down, 1 = up.
pub fn sigma_plus() -> Mat {
    vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]
}

pub fn sigma_minus() -> Mat {
    dagger(&sigma_plus())
}

pub fn pauli_x() -> Mat {
    add(&sigma_plus(), &sigma_minus(), c(1.0, 0.0))
}

pub fn pauli_y() -> Mat {
    // sigma^+ = (x + i y) / 2  =>  y = -i (sigma^+ - sigma^-)
    let d = add(&sigma_plus(), &sigma_minus(), c(-1.0, 0.0));
    d.iter().map(|r| r.iter().map(|x| x * c(0.0, -1.0)).collect()).collect()
}

pub fn pauli_z() -> Mat {
    vec![vec![c(-1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]]
}

/// `op` on `site` of an `n`-site chain; site `i` is bit `i` of the index.
pub fn site_op(op: &Mat, site: usize, n: usize) -> Mat {
    let mut out = identity(1);
    for s in (0..n).rev() {
        let factor = if s == site { op.clone() } else { identity(2) };
        out = kron(&out, &factor);
    }
    out
}

pub fn heisenberg(chain: &ChainParameters<f64>) -> Mat {
    let n = chain.n_sites;
    let d = 1 << n;
    let mut h = zeros(d);
    for i in 0..n.saturating_sub(1) {
        for p in [pauli_x(), pauli_y(), pauli_z()] {
            let term = matmul(&site_op(&p, i, n), &site_op(&p, i + 1, n));
            h = add(&h, &term, c(chain.coupling_j / 4.0, 0.0));
        }
    }
    h
}

/// `L rho = -i[H, rho] + sum_i gamma_out (s- rho s+ - {s+ s-, rho}/2)
///                    + gamma_in (s+ rho s- - {s- s+, rho}/2)`.
pub fn lindblad_apply(chain: &ChainParameters<f64>, h: &Mat, rho: &Mat) -> Mat {
    let n = chain.n_sites;
    let mut out = add(&matmul(h, rho), &matmul(rho, h), c(-1.0, 0.0));
    out = out.iter().map(|r| r.iter().map(|x| x * c(0.0, -1.0)).collect()).collect();
    for i in 0..n {
        for (jump, rate) in [
            (site_op(&sigma_minus(), i, n), chain.gamma_out[i]),
            (site_op(&sigma_plus(), i, n), chain.gamma_in[i]),
        ] {
            let jd = dagger(&jump);
            let jdj = matmul(&jd, &jump);
            let sandwich = matmul(&matmul(&jump, rho), &jd);
            let anti = add(&matmul(&jdj, rho), &matmul(rho, &jdj), c(1.0, 0.0));
            let d = add(&sandwich, &anti, c(-0.5, 0.0));
            out = add(&out, &d, c(rate, 0.0));
        }
    }
    out
}

/// Superoperator on the row-major vectorised density matrix, column by column.
pub fn kron_liouvillian(chain: &ChainParameters<f64>) -> Mat {
    let n = chain.n_sites;
    let d = 1 << n;
    let h = heisenberg(chain);
    let mut sup = zeros(d * d);
    for col in 0..d * d {
        let mut basis = zeros(d);
        basis[col / d][col % d] = c(1.0, 0.0);
        let img = lindblad_apply(chain, &h, &basis);
        for r in 0..d {
            for s in 0..d {
                sup[r * d + s][col] = img[r][s];
            }
        }
    }
    sup
}

fn spin(bits: usize, i: usize) -> f64 {
    if bits >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Direct product-form evaluation of the operator element `rho(s, e)`.
pub fn ndo_direct(p: &NdoParameters<f64>, s: usize, e: usize) -> Complex64 {
    let n = p.n_visible();
    let mut val = c(8.0, 0.0);
    for i in 0..n {
        val *= (p.a[i] * spin(s, i)).exp() * (p.a[i].conj() * spin(e, i)).exp();
    }
    for m in 0..p.n_hidden() {
        let mut hs = p.b[m];
        let mut he = p.b[m].conj();
        for i in 0..n {
            hs += p.w[m * n + i] * spin(s, i);
            he += p.w[m * n + i].conj() * spin(e, i);
        }
        val *= hs.cosh() * he.cosh();
    }
    for k in 0..p.n_mixing() {
        let mut arg = p.c[k] + p.c[k].conj();
        for i in 0..n {
            arg += p.u[k * n + i] * spin(s, i) + p.u[k * n + i].conj() * spin(e, i);
        }
        val *= arg.cosh();
    }
    val
}

pub fn ndo_matrix(p: &NdoParameters<f64>) -> Mat {
    let d = 1 << p.n_visible();
    (0..d).map(|s| (0..d).map(|e| ndo_direct(p, s, e)).collect()).collect()
}

/// `||L rho||^2 / sum |rho|^2` through the Kronecker route.
pub fn dense_normalized_cost(chain: &ChainParameters<f64>, p: &NdoParameters<f64>) -> f64 {
    let rho = ndo_matrix(p);
    let l_rho = lindblad_apply(chain, &heisenberg(chain), &rho);
    let num: f64 = l_rho.iter().flatten().map(|z| z.norm_sqr()).sum();
    let z: f64 = rho.iter().flatten().map(|z| z.norm_sqr()).sum();
    num / z
}

/// Random rates in `[0.05, 0.5]` and coupling in `[0, 1]`.
pub fn random_chain(n: usize, seed: u64) -> ChainParameters<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let j = rng.gen_range(0.0..1.0);
    let gin = (0..n).map(|_| rng.gen_range(0.05..0.5)).collect();
    let gout = (0..n).map(|_| rng.gen_range(0.05..0.5)).collect();
    ChainParameters::new(n, j, gin, gout).unwrap()
}

/// Parameters with every real coordinate uniform in `[-scale, scale]`.
pub fn random_ndo(n: usize, m: usize, k: usize, scale: f64, seed: u64) -> NdoParameters<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let layout = ndo_core::ParameterLayout::new(n, m, k);
    let flat: Vec<f64> = (0..layout.n_params()).map(|_| rng.gen_range(-scale..scale)).collect();
    NdoParameters::unflatten(layout, &flat).unwrap()
}

/// Chi-square statistic and upper-tail p-value of observed counts against
/// expected probabilities (bins with tiny expectation are pooled).
pub fn chi_square(counts: &[usize], probs: &[f64]) -> (f64, f64) {
    let total: usize = counts.iter().sum();
    let total = total as f64;
    let mut stat = 0.0;
    let mut dof = 0usize;
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &p) in counts.iter().zip(probs) {
        let e = p * total;
        if e < 5.0 {
            pool_o += o as f64;
            pool_e += e;
            continue;
        }
        stat += (o as f64 - e).powi(2) / e;
        dof += 1;
    }
    if pool_e > 0.0 {
        stat += (pool_o - pool_e).powi(2) / pool_e.max(1e-300);
        dof += 1;
    }
    let dof = dof.saturating_sub(1).max(1);
    (stat, chi_square_sf(stat, dof as f64))
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, k: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(k).unwrap().sf(x)
}

/// `|rho(s, e)|^2 / Z` indexed by `(s << N) | e`, from the product form.
pub fn exact_pair_probs(p: &NdoParameters<f64>) -> Vec<f64> {
    let d = 1usize << p.n_visible();
    let mut probs: Vec<f64> = (0..d * d).map(|k| ndo_direct(p, k / d, k % d).norm_sqr()).collect();
    normalize(&mut probs);
    probs
}

/// `rho(s, s) / tr rho` indexed by `s`.
pub fn exact_diagonal_probs(p: &NdoParameters<f64>) -> Vec<f64> {
    let d = 1usize << p.n_visible();
    let mut probs: Vec<f64> = (0..d).map(|s| ndo_direct(p, s, s).re).collect();
    normalize(&mut probs);
    probs
}

pub fn normalize(v: &mut [f64]) {
    let z: f64 = v.iter().sum();
    for x in v {
        *x /= z;
    }
}

/// Stationary law of a chain that re-proposes until acceptance, for
/// proposals uniform over all states and ratio acceptance:
/// `pi(x) ~ p(x) a(x) ~ sum_y min(p(x), p(y))`.
pub fn accept_only_law(probs: &[f64]) -> Vec<f64> {
    let mut law: Vec<f64> = probs
        .iter()
        .map(|&px| probs.iter().map(|&py| px.min(py)).sum())
        .collect();
    normalize(&mut law);
    law
}

/// Marginal of a pair distribution over the variables outside `edge_mask`,
/// as a compact vector indexed by `(bulk_s, bulk_e)` rank.
pub fn bulk_marginal(probs: &[f64], n: usize, edge_mask: usize) -> (Vec<f64>, Vec<usize>) {
    let d = 1usize << n;
    let bulk: Vec<usize> = (0..d).filter(|s| s & edge_mask == 0).collect();
    let mut rank = vec![0usize; d];
    for (r, &s) in bulk.iter().enumerate() {
        rank[s] = r;
    }
    let nb = bulk.len();
    let mut out = vec![0.0; nb * nb];
    for (k, &pk) in probs.iter().enumerate() {
        let (s, e) = (k / d, k % d);
        out[rank[s & !edge_mask] * nb + rank[e & !edge_mask]] += pk;
    }
    let key: Vec<usize> = (0..d * d)
        .map(|k| rank[(k / d) & !edge_mask] * nb + rank[(k % d) & !edge_mask])
        .collect();
    (out, key)
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

pub fn histogram(indices: impl Iterator<Item = usize>, bins: usize) -> Vec<usize> {
    let mut h = vec![0usize; bins];
    for i in indices {
        h[i] += 1;
    }
    h
}

/// Integrated autocorrelation time with the self-consistent window `W >= 5 tau`.
pub fn integrated_autocorrelation(series: &[f64]) -> f64 {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for t in 1..(n / 2).min(2000) {
        let c: f64 = (0..n - t)
            .map(|i| (series[i] - mean) * (series[i + t] - mean))
            .sum::<f64>()
            / ((n - t) as f64 * var);
        tau += 2.0 * c;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau
}
