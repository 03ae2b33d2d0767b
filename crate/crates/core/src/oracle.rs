//! Brute-force benchmark: classic fourth-order Runge-Kutta integration of the
//! Lindblad equation on the full `2^N x 2^N` density matrix.

use std::io::{Read, Write};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_dense_liouvillian, enumerate_configurations, ChainParameters, SamplePair,
    SpinConfiguration, DENSE_MAX_SITES,
};
use crate::scalar::{c_i, c_real, is_finite_c, Real};

/// Row-major density matrix, row index `sigma`, column index `eta`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseDensityMatrix<T> {
    n_sites: usize,
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> DenseDensityMatrix<T> {
    fn check_sites(n_sites: usize) -> Result<usize> {
        if n_sites == 0 || n_sites > DENSE_MAX_SITES {
            return Err(Error::Capacity(format!(
                "dense density matrix limited to 1..={DENSE_MAX_SITES} sites, got {n_sites}"
            )));
        }
        Ok(1 << n_sites)
    }

    pub fn zeros(n_sites: usize) -> Result<Self> {
        let dim = Self::check_sites(n_sites)?;
        Ok(Self {
            n_sites,
            dim,
            data: vec![Complex::new(T::zero(), T::zero()); dim * dim],
        })
    }

    /// `I / 2^N`.
    pub fn maximally_mixed(n_sites: usize) -> Result<Self> {
        let mut rho = Self::zeros(n_sites)?;
        let p = T::one() / T::of_usize(rho.dim);
        for k in 0..rho.dim {
            rho.data[k * rho.dim + k] = c_real(p);
        }
        Ok(rho)
    }

    /// `|config><config|`.
    pub fn basis_state(config: SpinConfiguration) -> Result<Self> {
        let mut rho = Self::zeros(config.n_sites())?;
        let k = config.index();
        rho.data[k * rho.dim + k] = c_real(T::one());
        Ok(rho)
    }

    pub fn from_data(n_sites: usize, data: Vec<Complex<T>>) -> Result<Self> {
        let dim = Self::check_sites(n_sites)?;
        if data.len() != dim * dim {
            return Err(Error::SizeMismatch(format!(
                "{} entries for a {dim}x{dim} matrix",
                data.len()
            )));
        }
        Ok(Self { n_sites, dim, data })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, pair: SamplePair) -> Complex<T> {
        self.data[pair.sigma.index() * self.dim + pair.eta.index()]
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
            acc + self.data[k * self.dim + k]
        })
    }

    /// `max |rho - rho^dagger|`.
    pub fn hermiticity_error(&self) -> T {
        let d = self.dim;
        let mut worst = T::zero();
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.data[r * d + c] - self.data[c * d + r].conj()).norm());
            }
        }
        worst
    }

    /// `tr(rho^2)`, using hermiticity.
    pub fn purity(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn scale(&mut self, factor: T) {
        for z in &mut self.data {
            *z = *z * factor;
        }
    }
}

/// Diagonal Hamiltonian values, dissipation weights and flip-flop partners for
/// every basis configuration; lets the derivative run without materialising
/// the `4^N x 4^N` superoperator.
#[derive(Clone, Debug)]
pub struct StencilTable<T> {
    n_sites: usize,
    dim: usize,
    half_j: T,
    h_diag: Vec<T>,
    dissipation: Vec<T>,
    flip_offsets: Vec<usize>,
    flip_targets: Vec<u32>,
    gamma_in: Vec<T>,
    gamma_out: Vec<T>,
}

impl<T: Real> StencilTable<T> {
    pub fn new(params: &ChainParameters<T>) -> Result<Self> {
        params.validate()?;
        let n = params.n_sites;
        if n > DENSE_MAX_SITES {
            return Err(Error::Capacity(format!(
                "dense integration limited to N <= {DENSE_MAX_SITES}, got {n}"
            )));
        }
        let dim = 1usize << n;
        let mut h_diag = Vec::with_capacity(dim);
        let mut dissipation = Vec::with_capacity(dim);
        let mut flip_offsets = Vec::with_capacity(dim + 1);
        let mut flip_targets = Vec::new();
        flip_offsets.push(0);
        for c in enumerate_configurations(n)? {
            h_diag.push(params.hamiltonian_diagonal(c));
            dissipation.push(params.dissipation_weight(c));
            flip_targets.extend(params.flip_flop_partners(c).map(|f| f.bits()));
            flip_offsets.push(flip_targets.len());
        }
        Ok(Self {
            n_sites: n,
            dim,
            half_j: params.coupling_j * T::of(0.5),
            h_diag,
            dissipation,
            flip_offsets,
            flip_targets,
            gamma_in: params.gamma_in.clone(),
            gamma_out: params.gamma_out.clone(),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    #[inline]
    fn flips(&self, k: usize) -> &[u32] {
        &self.flip_targets[self.flip_offsets[k]..self.flip_offsets[k + 1]]
    }

    /// `out = L rho` for row-major `rho` of size `dim^2`.
    pub fn apply(&self, rho: &[Complex<T>], out: &mut [Complex<T>]) {
        let d = self.dim;
        assert_eq!(rho.len(), d * d);
        assert_eq!(out.len(), d * d);
        let work = |(s, row): (usize, &mut [Complex<T>])| self.apply_row(s, rho, row);
        if d >= 64 {
            out.par_chunks_mut(d).enumerate().for_each(work);
        } else {
            out.chunks_mut(d).enumerate().for_each(work);
        }
    }

    fn apply_row(&self, s: usize, rho: &[Complex<T>], row: &mut [Complex<T>]) {
        let d = self.dim;
        let half = T::of(0.5);
        let i = c_i::<T>();
        let rho_row = &rho[s * d..(s + 1) * d];
        let (hs, ds) = (self.h_diag[s], self.dissipation[s]);

        for e in 0..d {
            let coef = Complex::new(-(ds + self.dissipation[e]) * half, self.h_diag[e] - hs);
            row[e] = coef * rho_row[e];
        }

        if self.half_j != T::zero() {
            let left = -i * self.half_j;
            for &sp in self.flips(s) {
                let src = &rho[sp as usize * d..(sp as usize + 1) * d];
                for (o, r) in row.iter_mut().zip(src) {
                    *o += left * *r;
                }
            }
            let right = i * self.half_j;
            for (e, o) in row.iter_mut().enumerate() {
                let mut acc = Complex::new(T::zero(), T::zero());
                for &ep in self.flips(e) {
                    acc += rho_row[ep as usize];
                }
                *o += right * acc;
            }
        }

        for site in 0..self.n_sites {
            let bit = 1usize << site;
            let s_up = s & bit != 0;
            let rate = if s_up {
                self.gamma_in[site]
            } else {
                self.gamma_out[site]
            };
            if rate == T::zero() {
                continue;
            }
            let src_row = s ^ bit;
            let src = &rho[src_row * d..(src_row + 1) * d];
            for (e, o) in row.iter_mut().enumerate() {
                if (e & bit != 0) == s_up {
                    *o += src[e ^ bit] * rate;
                }
            }
        }
    }
}

/// Explicit `L rho` on a dense matrix (allocates a table; use
/// [`StencilTable`] in loops).
pub fn apply_liouvillian<T: Real>(
    params: &ChainParameters<T>,
    rho: &DenseDensityMatrix<T>,
) -> Result<DenseDensityMatrix<T>> {
    params.check_sites(rho.n_sites)?;
    let table = StencilTable::new(params)?;
    let mut out = DenseDensityMatrix::zeros(rho.n_sites)?;
    table.apply(&rho.data, &mut out.data);
    Ok(out)
}

/// Default time step: `0.05 / max(|J|, max gamma)`.
pub fn default_dt<T: Real>(params: &ChainParameters<T>) -> T {
    let m = params.max_rate();
    if m > T::zero() {
        T::of(0.05) / m
    } else {
        T::one()
    }
}

/// RK4 state: the stencil table plus the four stage buffers.
pub struct Rk4Integrator<T> {
    table: StencilTable<T>,
    dt: T,
    k: [Vec<Complex<T>>; 4],
    stage: Vec<Complex<T>>,
    steps: usize,
    renormalizations: usize,
    k1_fresh: bool,
}

impl<T: Real> Rk4Integrator<T> {
    pub fn new(params: &ChainParameters<T>, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        if dt * params.max_rate() > T::of(0.1) {
            return Err(Error::InvalidArgument(format!(
                "dt * max rate = {} exceeds the 0.1 stability guard",
                dt * params.max_rate()
            )));
        }
        let table = StencilTable::new(params)?;
        let len = table.dim * table.dim;
        let zero = Complex::new(T::zero(), T::zero());
        Ok(Self {
            table,
            dt,
            k: std::array::from_fn(|_| vec![zero; len]),
            stage: vec![zero; len],
            steps: 0,
            renormalizations: 0,
            k1_fresh: false,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn renormalizations(&self) -> usize {
        self.renormalizations
    }

    /// `max |L rho|`; leaves `L rho` cached as the first RK stage.
    pub fn residual(&mut self, rho: &DenseDensityMatrix<T>) -> T {
        self.table.apply(&rho.data, &mut self.k[0]);
        self.k1_fresh = true;
        self.k[0].iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Advances `rho` in place by one step. The first stage is reused when
    /// [`Self::residual`] was just evaluated on the same `rho`.
    pub fn step(&mut self, rho: &mut DenseDensityMatrix<T>) -> Result<()> {
        if rho.n_sites != self.table.n_sites {
            return Err(Error::SizeMismatch(format!(
                "density matrix has {} sites, integrator {}",
                rho.n_sites, self.table.n_sites
            )));
        }
        let dt = self.dt;
        let half_dt = dt * T::of(0.5);
        let trace_before = rho.trace().re;

        if !self.k1_fresh {
            self.table.apply(&rho.data, &mut self.k[0]);
        }
        self.k1_fresh = false;
        for stage in 1..4 {
            let h = if stage == 3 { dt } else { half_dt };
            let (prev, next) = self.k.split_at_mut(stage);
            for ((x, r), k) in self.stage.iter_mut().zip(&rho.data).zip(&prev[stage - 1]) {
                *x = *r + *k * h;
            }
            self.table.apply(&self.stage, &mut next[0]);
        }
        let sixth = dt / T::of(6.0);
        let two = T::of(2.0);
        let [k1, k2, k3, k4] = &self.k;
        for (idx, r) in rho.data.iter_mut().enumerate() {
            *r += (k1[idx] + (k2[idx] + k3[idx]) * two + k4[idx]) * sixth;
        }
        self.steps += 1;

        if !rho.data.iter().all(|z| is_finite_c(*z)) {
            return Err(Error::Divergence { step: self.steps });
        }
        let trace_after = rho.trace().re;
        let tol = T::of(1e-12).max(T::epsilon() * T::of(100.0));
        if (trace_after - trace_before).abs() > tol && trace_after != T::zero() {
            log::debug!(
                "step {}: trace drift {:e}, renormalising",
                self.steps,
                (trace_after - trace_before).to_f64_lossy()
            );
            rho.scale(trace_before / trace_after);
            self.renormalizations += 1;
        }
        Ok(())
    }
}

/// One classic RK4 step of `d rho / dt = L rho`.
pub fn rk4_step<T: Real>(
    rho: &DenseDensityMatrix<T>,
    params: &ChainParameters<T>,
    dt: T,
) -> Result<DenseDensityMatrix<T>> {
    params.check_sites(rho.n_sites)?;
    let mut integrator = Rk4Integrator::new(params, dt)?;
    let mut next = rho.clone();
    integrator.step(&mut next)?;
    Ok(next)
}

#[derive(Clone, Debug)]
pub struct SteadyStateResult<T> {
    pub rho: DenseDensityMatrix<T>,
    /// `max |L rho|` at the returned state.
    pub residual: T,
    pub steps_taken: usize,
    pub site_excited_population: Vec<T>,
    pub magnetization_z: T,
}

impl<T: Real> SteadyStateResult<T> {
    pub fn report(&self, params: &ChainParameters<T>) -> OracleReport {
        OracleReport {
            chain: ChainParameters {
                n_sites: params.n_sites,
                coupling_j: params.coupling_j.to_f64_lossy(),
                gamma_in: params.gamma_in.iter().map(|g| g.to_f64_lossy()).collect(),
                gamma_out: params.gamma_out.iter().map(|g| g.to_f64_lossy()).collect(),
            },
            site_excited_population: self
                .site_excited_population
                .iter()
                .map(|p| p.to_f64_lossy())
                .collect(),
            magnetization_z: self.magnetization_z.to_f64_lossy(),
            residual: self.residual.to_f64_lossy(),
            steps_taken: self.steps_taken,
        }
    }
}

/// Integration settings for [`find_steady_state`].
#[derive(Clone, Copy, Debug)]
pub struct SteadyStateOptions<T> {
    pub dt: T,
    pub residual_tol: T,
    pub max_steps: usize,
}

impl<T: Real> SteadyStateOptions<T> {
    pub fn for_chain(params: &ChainParameters<T>) -> Self {
        Self {
            dt: default_dt(params),
            residual_tol: T::of(1e-9),
            max_steps: 1_000_000,
        }
    }
}

/// Integrates until `max |L rho| < residual_tol`.
pub fn find_steady_state<T: Real>(
    params: &ChainParameters<T>,
    initial: DenseDensityMatrix<T>,
    dt: T,
    residual_tol: T,
    max_steps: usize,
) -> Result<SteadyStateResult<T>> {
    params.check_sites(initial.n_sites)?;
    if !(residual_tol > T::zero()) {
        return Err(Error::InvalidArgument("residual_tol must be positive".into()));
    }
    let mut integrator = Rk4Integrator::new(params, dt)?;
    let mut rho = initial;
    loop {
        let residual = integrator.residual(&rho);
        if residual < residual_tol {
            let (site_excited_population, magnetization_z) = observables_from_dense(&rho);
            log::info!(
                "steady state after {} steps, residual {:e}",
                integrator.steps(),
                residual.to_f64_lossy()
            );
            return Ok(SteadyStateResult {
                rho,
                residual,
                steps_taken: integrator.steps(),
                site_excited_population,
                magnetization_z,
            });
        }
        if integrator.steps() >= max_steps {
            return Err(Error::NonConvergence {
                steps: integrator.steps(),
                residual: residual.to_f64_lossy(),
            });
        }
        if integrator.steps() % 1000 == 0 {
            log::debug!(
                "step {}: residual {:e}",
                integrator.steps(),
                residual.to_f64_lossy()
            );
        }
        integrator.step(&mut rho)?;
    }
}

/// [`find_steady_state`] from the maximally mixed state with default options.
pub fn find_steady_state_default<T: Real>(
    params: &ChainParameters<T>,
) -> Result<SteadyStateResult<T>> {
    let opts = SteadyStateOptions::for_chain(params);
    let initial = DenseDensityMatrix::maximally_mixed(params.n_sites)?;
    find_steady_state(params, initial, opts.dt, opts.residual_tol, opts.max_steps)
}

/// Per-site excited populations `<sigma+ sigma->` and `m_z = (1/N) sum <sigma^z>`.
pub fn observables_from_dense<T: Real>(rho: &DenseDensityMatrix<T>) -> (Vec<T>, T) {
    let n = rho.n_sites;
    let d = rho.dim;
    let mut pops = vec![T::zero(); n];
    let mut trace = T::zero();
    for k in 0..d {
        let p = rho.data[k * d + k].re;
        trace += p;
        for (i, pop) in pops.iter_mut().enumerate() {
            if k >> i & 1 == 1 {
                *pop += p;
            }
        }
    }
    for pop in &mut pops {
        *pop /= trace;
    }
    let two = T::of(2.0);
    let mz = pops.iter().map(|&p| two * p - T::one()).sum::<T>() / T::of_usize(n);
    (pops, mz)
}

/// Steady state from the kernel of the explicit superoperator: solves
/// `L x = 0` with one population row replaced by `tr x = 1`, by Gaussian
/// elimination with partial pivoting. Independent of the RK4 path.
pub fn steady_state_from_kernel<T: Real>(
    params: &ChainParameters<T>,
) -> Result<DenseDensityMatrix<T>> {
    if params.n_sites > 5 {
        return Err(Error::Capacity(format!(
            "kernel solve limited to N <= 5, got {}",
            params.n_sites
        )));
    }
    let l = build_dense_liouvillian(params)?;
    let n = l.dim();
    let half = 1usize << params.n_sites;
    let zero = Complex::new(T::zero(), T::zero());
    let mut a: Vec<Complex<T>> = l.as_slice().to_vec();
    let mut b = vec![zero; n];
    // row 0 is the (down..down, down..down) population
    for (c, v) in a[..n].iter_mut().enumerate() {
        *v = if c / half == c % half {
            c_real(T::one())
        } else {
            zero
        };
    }
    b[0] = c_real(T::one());

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x * n + col].norm().partial_cmp(&a[y * n + col].norm()).unwrap())
            .unwrap();
        if a[pivot * n + col].norm() < T::epsilon() {
            return Err(Error::InvalidArgument(
                "Liouvillian kernel is degenerate".into(),
            ));
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            b.swap(pivot, col);
        }
        let inv = a[col * n + col].inv();
        for r in col + 1..n {
            let f = a[r * n + col] * inv;
            if f == zero {
                continue;
            }
            for c in col..n {
                let v = a[col * n + c];
                a[r * n + c] -= f * v;
            }
            let bv = b[col];
            b[r] -= f * bv;
        }
    }
    let mut x = vec![zero; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r * n + c] * x[c];
        }
        x[r] = acc / a[r * n + r];
    }
    DenseDensityMatrix::from_data(params.n_sites, x)
}

/// JSON summary written by the `oracle` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub chain: ChainParameters<f64>,
    pub site_excited_population: Vec<f64>,
    pub magnetization_z: f64,
    pub residual: f64,
    pub steps_taken: usize,
}

const DUMP_MAGIC: &[u8; 4] = b"NDO0";

/// Writes `rho` as a 16-byte header (`"NDO0"`, `u32` dim, `u32` sites,
/// `u32` zero) followed by row-major little-endian `f64` (re, im) pairs.
pub fn write_rho_dump<T: Real, W: Write>(rho: &DenseDensityMatrix<T>, mut w: W) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(rho.dim as u32).to_le_bytes())?;
    w.write_all(&(rho.n_sites as u32).to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for z in &rho.data {
        w.write_all(&z.re.to_f64_lossy().to_le_bytes())?;
        w.write_all(&z.im.to_f64_lossy().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rho_dump<T: Real, R: Read>(mut r: R) -> Result<DenseDensityMatrix<T>> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != DUMP_MAGIC {
        return Err(Error::InvalidArgument("not an NDO0 density-matrix dump".into()));
    }
    let word = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap()) as usize;
    let (dim, n_sites) = (word(4), word(8));
    if n_sites >= usize::BITS as usize || dim != 1 << n_sites {
        return Err(Error::InvalidArgument(format!(
            "dump header dim {dim} inconsistent with {n_sites} sites"
        )));
    }
    let mut bytes = vec![0u8; dim * dim * 16];
    r.read_exact(&mut bytes)?;
    let f = |k: usize| T::of(f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap()));
    let data = (0..dim * dim)
        .map(|k| Complex::new(f(16 * k), f(16 * k + 8)))
        .collect();
    DenseDensityMatrix::from_data(n_sites, data)
}
