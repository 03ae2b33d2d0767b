//! Variational steady-state search.
//!
//! The cost is `C = ||L rho||^2 / Z` with `Z = sum |rho|^2`, estimated from a
//! full-pair batch as `sum_n w_n |L~(x_n)|^2`, where the local estimator is
//! `L~(x) = sum_y L(x, y) rho(y) / rho(x)` over the Liouvillian row of `x`.
//! Its derivative with respect to a real coordinate `l` is
//!
//! ```text
//! dC/dl = 2 Re { E[ conj(L~(x)) sum_y L(x, y) rho(y)/rho(x) O_l(y) ]
//!               - E[O_l] E[|L~|^2] }
//! ```
//!
//! with `O_l = d ln rho / d l` and `E` the batch-weighted mean. The inner sum
//! runs over the configurations connected to `x` by the Liouvillian.

use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{liouvillian_row_into, ChainParameters, SamplePair, SpinConfiguration};
use crate::ndo::{Activations, NdoParameters, SideCache};
use crate::sampling::{draw_batch, stream_rng, BatchKind, SampleBatch, SamplerConfig};
use crate::scalar::{c_real, Real};

/// Samples per work unit; partial sums are reduced in chunk order, so results
/// do not depend on the thread count.
const CHUNK: usize = 256;

fn zero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `L~(pair) = sum_y L(pair, y) rho(y) / rho(pair)`.
pub fn local_liouvillian_estimator<T: Real>(
    params: &NdoParameters<T>,
    pair: SamplePair,
    chain: &ChainParameters<T>,
) -> Result<Complex<T>> {
    let stencil = crate::model::liouvillian_row(pair, chain)?;
    let base = params.log_rho(pair)?;
    let mut acc = zero();
    for (target, amp) in &stencil.entries {
        acc += *amp * (params.log_rho(*target)? - base).exp();
    }
    Ok(acc)
}

fn check_batch<T: Real>(
    params: &NdoParameters<T>,
    batch: &SampleBatch<T>,
    chain: &ChainParameters<T>,
    kind: BatchKind,
) -> Result<()> {
    if batch.kind != kind {
        return Err(Error::InvalidArgument(format!(
            "expected a {kind:?} batch, got {:?}",
            batch.kind
        )));
    }
    chain.check_sites(params.n_visible())?;
    if let Some(p) = batch.pairs.first() {
        chain.check_sites(p.n_sites())?;
    }
    if batch.pairs.len() != batch.weights.len() {
        return Err(Error::SizeMismatch("batch pairs and weights differ in length".into()));
    }
    Ok(())
}

/// Cost and gradient from one full-pair batch.
#[derive(Clone, Debug)]
pub struct BatchEstimate<T> {
    /// `sum_n w_n |L~_n|^2`.
    pub cost: T,
    pub gradient: Vec<T>,
    /// `L~` for every batch entry, in batch order.
    pub local: Vec<Complex<T>>,
}

struct Partial<T> {
    cross: Vec<Complex<T>>,
    mean_o: Vec<Complex<T>>,
    cost: T,
    local: Vec<Complex<T>>,
}

struct Scratch<T> {
    stencil: Vec<(SamplePair, Complex<T>)>,
    left: SideCache<T>,
    right: SideCache<T>,
    coefs: Vec<Complex<T>>,
    acts: Vec<Activations<T>>,
}

fn chunk_estimate<T: Real>(
    params: &NdoParameters<T>,
    chain: &ChainParameters<T>,
    pairs: &[SamplePair],
    weights: &[T],
    with_gradient: bool,
) -> Partial<T> {
    let n_p = params.n_params();
    let layout = params.layout();
    let n = params.n_visible();
    let blank = params.side_cache(SpinConfiguration::from_bits_unchecked(0, n));
    let mut s = Scratch {
        stencil: Vec::new(),
        left: blank.clone(),
        right: blank,
        coefs: Vec::new(),
        acts: Vec::new(),
    };
    let mut out = Partial {
        cross: if with_gradient { vec![zero(); n_p] } else { Vec::new() },
        mean_o: if with_gradient { vec![zero(); n_p] } else { Vec::new() },
        cost: T::zero(),
        local: Vec::with_capacity(pairs.len()),
    };
    let mut own = Activations::default();

    for (&x, &w) in pairs.iter().zip(weights) {
        let sc = params.side_cache(x.sigma);
        let ec = params.side_cache(x.eta);
        let log_x = params.log_rho_cached(&sc, &ec);
        liouvillian_row_into(x, chain, &mut s.stencil);
        s.coefs.clear();
        if with_gradient && s.acts.len() < s.stencil.len() {
            s.acts.resize_with(s.stencil.len(), Activations::default);
        }
        let mut local = zero();
        for (k, &(target, amp)) in s.stencil.iter().enumerate() {
            let left = if target.sigma == x.sigma {
                &sc
            } else {
                s.left.copy_from(&sc);
                s.left.update_to(params, target.sigma);
                &s.left
            };
            let right = if target.eta == x.eta {
                &ec
            } else {
                s.right.copy_from(&ec);
                s.right.update_to(params, target.eta);
                &s.right
            };
            let coef = amp * (params.log_rho_cached(left, right) - log_x).exp();
            local += coef;
            s.coefs.push(coef);
            if with_gradient {
                params.activations_into(left, right, &mut s.acts[k]);
            }
        }
        out.local.push(local);
        out.cost += w * local.norm_sqr();
        if with_gradient {
            let scale = local.conj() * w;
            for (act, &coef) in s.acts.iter().zip(&s.coefs) {
                act.accumulate(layout, scale * coef, &mut out.cross);
            }
            params.activations_into(&sc, &ec, &mut own);
            own.accumulate(layout, c_real(w), &mut out.mean_o);
        }
    }
    out
}

fn estimate<T: Real>(
    params: &NdoParameters<T>,
    batch: &SampleBatch<T>,
    chain: &ChainParameters<T>,
    with_gradient: bool,
) -> Result<BatchEstimate<T>> {
    check_batch(params, batch, chain, BatchKind::FullPair)?;
    let partials: Vec<Partial<T>> = batch
        .pairs
        .par_chunks(CHUNK)
        .zip(batch.weights.par_chunks(CHUNK))
        .map(|(p, w)| chunk_estimate(params, chain, p, w, with_gradient))
        .collect();

    let n_p = params.n_params();
    let mut cross = vec![zero::<T>(); if with_gradient { n_p } else { 0 }];
    let mut mean_o = cross.clone();
    let mut cost = T::zero();
    let mut local = Vec::with_capacity(batch.len());
    for part in partials {
        for (a, b) in cross.iter_mut().zip(&part.cross) {
            *a += *b;
        }
        for (a, b) in mean_o.iter_mut().zip(&part.mean_o) {
            *a += *b;
        }
        cost += part.cost;
        local.extend(part.local);
    }

    let mut gradient = Vec::new();
    if with_gradient {
        let two = T::of(2.0);
        gradient = cross
            .iter()
            .zip(&mean_o)
            .map(|(c, o)| two * (*c - *o * cost).re)
            .collect();
        if let Some(k) = gradient.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                block: params.layout().block_name(k),
            });
        }
    }
    Ok(BatchEstimate {
        cost,
        gradient,
        local,
    })
}

/// Batch-normalised cost `sum_n w_n |L~_n|^2`; equals `||L rho||^2 / Z` for an
/// exact batch.
pub fn estimate_cost<T: Real>(
    params: &NdoParameters<T>,
    batch: &SampleBatch<T>,
    chain: &ChainParameters<T>,
) -> Result<T> {
    Ok(estimate(params, batch, chain, false)?.cost)
}

/// Gradient of the cost over the flat real coordinates.
pub fn estimate_gradient<T: Real>(
    params: &NdoParameters<T>,
    batch: &SampleBatch<T>,
    chain: &ChainParameters<T>,
) -> Result<Vec<T>> {
    Ok(estimate(params, batch, chain, true)?.gradient)
}

/// Cost, gradient and local estimators in one pass.
pub fn estimate_cost_and_gradient<T: Real>(
    params: &NdoParameters<T>,
    batch: &SampleBatch<T>,
    chain: &ChainParameters<T>,
) -> Result<BatchEstimate<T>> {
    estimate(params, batch, chain, true)
}

/// Site-local observables that are diagonal in the spin basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagonalObservable {
    Identity,
    /// `sigma^z` on one site.
    SigmaZ(usize),
    /// `sigma^+ sigma^-` on one site.
    Excited(usize),
    /// `(1/N) sum_i sigma^z_i`.
    Magnetization,
}

impl DiagonalObservable {
    pub fn value<T: Real>(&self, config: SpinConfiguration) -> T {
        match *self {
            Self::Identity => T::one(),
            Self::SigmaZ(i) => config.spin_real(i),
            Self::Excited(i) => {
                if config.is_up(i) {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::Magnetization => {
                let n = config.n_sites();
                T::of_usize(2 * config.popcount() as usize) / T::of_usize(n) - T::one()
            }
        }
    }
}

/// `sum_n q_n sum_xi X(s_n, xi) rho(xi, s_n) / rho(s_n, s_n)` for an operator
/// given row-wise by `row(s) = [(xi, X(s, xi))]`.
pub fn estimate_observable<T: Real, F>(
    params: &NdoParameters<T>,
    diag_batch: &SampleBatch<T>,
    mut row: F,
) -> Result<Complex<T>>
where
    F: FnMut(SpinConfiguration) -> Vec<(SpinConfiguration, Complex<T>)>,
{
    if diag_batch.kind != BatchKind::Diagonal {
        return Err(Error::InvalidArgument("observable estimates need a diagonal batch".into()));
    }
    let mut acc = zero();
    for (&x, &q) in diag_batch.pairs.iter().zip(&diag_batch.weights) {
        let s = x.sigma;
        let base = params.log_rho(x)?;
        let mut local = zero();
        for (xi, value) in row(s) {
            let ratio = if xi == s {
                c_real(T::one())
            } else {
                (params.log_rho(SamplePair::new(xi, s)?)? - base).exp()
            };
            local += value * ratio;
        }
        acc += local * q;
    }
    Ok(acc)
}

/// Diagonal-observable estimate `sum_n q_n X(s_n)`.
pub fn estimate_diagonal_observable<T: Real>(
    params: &NdoParameters<T>,
    diag_batch: &SampleBatch<T>,
    observable: DiagonalObservable,
) -> Result<T> {
    if diag_batch.kind != BatchKind::Diagonal {
        return Err(Error::InvalidArgument("observable estimates need a diagonal batch".into()));
    }
    if let Some(p) = diag_batch.pairs.first() {
        if p.n_sites() != params.n_visible() {
            return Err(Error::SizeMismatch("batch and network sizes differ".into()));
        }
    }
    Ok(diag_batch
        .pairs
        .iter()
        .zip(&diag_batch.weights)
        .map(|(x, &q)| q * observable.value::<T>(x.sigma))
        .sum())
}

/// Per-site excited populations and `m_z` from a diagonal batch.
pub fn site_populations<T: Real>(diag_batch: &SampleBatch<T>, n_sites: usize) -> (Vec<T>, T) {
    let mut pops = vec![T::zero(); n_sites];
    for (x, &q) in diag_batch.pairs.iter().zip(&diag_batch.weights) {
        for (i, p) in pops.iter_mut().enumerate() {
            if x.sigma.is_up(i) {
                *p += q;
            }
        }
    }
    let two = T::of(2.0);
    let mz = pops.iter().map(|&p| two * p - T::one()).sum::<T>() / T::of_usize(n_sites);
    (pops, mz)
}

/// `theta <- theta - rate * gradient`.
pub fn sgd_step<T: Real>(params: &NdoParameters<T>, gradient: &[T], learning_rate: T) -> Result<NdoParameters<T>> {
    params.sgd_step(gradient, learning_rate)
}

fn default_density() -> f64 {
    1.0
}

fn default_smoothing() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct TrainingConfig<T> {
    pub learning_rate: T,
    pub n_iterations: usize,
    pub sampler: SamplerConfig,
    /// `M / N`.
    #[serde(default = "default_density")]
    pub hidden_density: f64,
    /// `K / N`.
    #[serde(default = "default_density")]
    pub mixing_density: f64,
    /// Seeds the parameter initialisation.
    #[serde(default)]
    pub seed: u64,
    /// Snapshot period for the observer callback; 0 disables.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "default_smoothing")]
    pub smoothing_window: usize,
}

impl<T: Real> TrainingConfig<T> {
    pub fn new(learning_rate: T, n_iterations: usize, sampler: SamplerConfig) -> Self {
        Self {
            learning_rate,
            n_iterations,
            sampler,
            hidden_density: 1.0,
            mixing_density: 1.0,
            seed: 0,
            snapshot_every: 0,
            smoothing_window: 50,
        }
    }

    /// `(M, K)` for an `n`-site chain.
    pub fn layer_sizes(&self, n_sites: usize) -> Result<(usize, usize)> {
        let size = |density: f64, name: &str| -> Result<usize> {
            let x = density * n_sites as f64;
            let r = x.round();
            if !(density > 0.0) || (x - r).abs() > 1e-9 || r < 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {density} does not give a positive integer layer for N = {n_sites}"
                )));
            }
            Ok(r as usize)
        };
        Ok((
            size(self.hidden_density, "hidden_density")?,
            size(self.mixing_density, "mixing_density")?,
        ))
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if !(self.learning_rate > T::zero()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        self.layer_sizes(n_sites)?;
        self.sampler.validate(n_sites)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub cost_estimate: T,
    pub site_excited_population: Vec<T>,
    pub magnetization_z: T,
    pub acceptance_rate: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome<T> {
    pub records: Vec<IterationRecord<T>>,
    pub params: NdoParameters<T>,
}

/// Trains from a fresh random initialisation.
pub fn run_training<T: Real>(
    chain: &ChainParameters<T>,
    config: &TrainingConfig<T>,
) -> Result<TrainingOutcome<T>> {
    run_training_with(chain, config, |_, _| Ok(()))
}

/// [`run_training`] calling `observer(record, params_after_update)` after each
/// iteration.
pub fn run_training_with<T: Real, F>(
    chain: &ChainParameters<T>,
    config: &TrainingConfig<T>,
    observer: F,
) -> Result<TrainingOutcome<T>>
where
    F: FnMut(&IterationRecord<T>, &NdoParameters<T>) -> Result<()>,
{
    chain.validate()?;
    let n = chain.n_sites;
    config.validate(n)?;
    let (m, k) = config.layer_sizes(n)?;
    let params = NdoParameters::init_random(n, m, k, config.seed)?;
    train_from(chain, config, params, observer)
}

/// Continues training from given parameters.
pub fn train_from<T: Real, F>(
    chain: &ChainParameters<T>,
    config: &TrainingConfig<T>,
    mut params: NdoParameters<T>,
    mut observer: F,
) -> Result<TrainingOutcome<T>>
where
    F: FnMut(&IterationRecord<T>, &NdoParameters<T>) -> Result<()>,
{
    let n = chain.n_sites;
    config.validate(n)?;
    let mut records = Vec::with_capacity(config.n_iterations);
    let start = Instant::now();
    for iteration in 0..config.n_iterations {
        let at = |source: Error| Error::AtIteration {
            iteration,
            source: Box::new(source),
        };
        // stream 0 is left to the parameter initialisation
        let stream = 2 * iteration as u64 + 1;
        let mut full_rng = stream_rng(config.sampler.seed, stream);
        let mut diag_rng = stream_rng(config.sampler.seed, stream + 1);
        let full = draw_batch(&params, &config.sampler, BatchKind::FullPair, &mut full_rng)
            .map_err(at)?;
        let diag = draw_batch(&params, &config.sampler, BatchKind::Diagonal, &mut diag_rng)
            .map_err(at)?;
        let est = estimate_cost_and_gradient(&params, &full, chain).map_err(at)?;
        let (pops, mz) = site_populations(&diag, n);
        params = params
            .sgd_step(&est.gradient, config.learning_rate)
            .map_err(at)?;
        let record = IterationRecord {
            iteration,
            cost_estimate: est.cost,
            site_excited_population: pops,
            magnetization_z: mz,
            acceptance_rate: full.acceptance_rate(),
            wall_time: start.elapsed().as_secs_f64(),
        };
        log::debug!(
            "iter {iteration}: cost {:.6e} mz {:.6} acc {:.3}",
            record.cost_estimate.to_f64_lossy(),
            record.magnetization_z.to_f64_lossy(),
            record.acceptance_rate
        );
        observer(&record, &params)?;
        records.push(record);
    }
    Ok(TrainingOutcome { records, params })
}

/// Trailing moving average; entry `t` averages `series[t+1-window ..= t]`
/// (fewer at the start).
pub fn trailing_moving_average<T: Real>(series: &[T], window: usize) -> Vec<T> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = T::zero();
    for (t, &x) in series.iter().enumerate() {
        sum += x;
        if t >= window {
            sum -= series[t - window];
        }
        out.push(sum / T::of_usize(window.min(t + 1)));
    }
    out
}
