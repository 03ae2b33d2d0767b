//! Per-iteration sample sets for the estimators.
//!
//! Full-pair batches target `p(s, e) ∝ |rho(s, e)|^2` and feed the cost and
//! gradient; diagonal batches target `q(s) ∝ rho(s, s)` and feed observables.
//! Four strategies are available:
//!
//! * `exact` enumerates every configuration with its exact weight;
//! * `metropolis` is the textbook chain: on rejection the current sample is
//!   recorded again;
//! * `accept_only` keeps proposing from the current state until a proposal is
//!   accepted, and records accepted states only;
//! * `hybrid` runs the accept-only chain on the bulk sites, with the bulk
//!   weight averaged over every assignment of the exact (edge) sites, and
//!   assigns the edge sites of accepted samples from a deterministic cycle.
//!
//! Markov batches carry uniform weights. Hybrid batches carry self-normalised
//! importance weights `w(x) / mean_edges w(bulk(x), .)`, which undo the edge
//! averaging so that estimators stay consistent.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{enumerate_configurations, full_mask, SamplePair, SpinConfiguration};
use crate::ndo::{NdoParameters, SideCache};
use crate::scalar::Real;

/// Consecutive rejections after which an accept-only chain gives up.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 1_000_000;
/// Exact enumeration of full pairs holds `4^N` entries.
pub const EXACT_FULL_MAX_SITES: usize = 7;
/// Exact enumeration of diagonals holds `2^N` entries.
pub const EXACT_DIAGONAL_MAX_SITES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exact,
    Metropolis,
    AcceptOnly,
    Hybrid,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    /// `min(1, p_new / p_old)`.
    #[default]
    Ratio,
    /// `exp(-p_old / p_new)`.
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchKind {
    FullPair,
    Diagonal,
}

fn default_flip_probability() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    #[serde(default)]
    pub acceptance: Acceptance,
    pub n_samples: usize,
    /// Discarded chain steps; `None` means `max(100, n_samples / 100)`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_flip_probability")]
    pub flip_probability: f64,
    /// Zero-based sites enumerated exactly by the hybrid sampler; `None`
    /// means the two chain ends.
    #[serde(default)]
    pub exact_sites: Option<Vec<usize>>,
    /// Hybrid only: emit one sample per edge assignment for each accepted
    /// bulk configuration instead of one per acceptance.
    #[serde(default)]
    pub hold_bulk_for_cycle: bool,
    #[serde(default)]
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(strategy: Strategy, n_samples: usize, seed: u64) -> Self {
        Self {
            strategy,
            acceptance: Acceptance::Ratio,
            n_samples,
            burn_in: None,
            flip_probability: 0.5,
            exact_sites: None,
            hold_bulk_for_cycle: false,
            seed,
        }
    }

    pub fn with_acceptance(mut self, acceptance: Acceptance) -> Self {
        self.acceptance = acceptance;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn with_flip_probability(mut self, p: f64) -> Self {
        self.flip_probability = p;
        self
    }

    pub fn with_exact_sites(mut self, sites: Vec<usize>) -> Self {
        self.exact_sites = Some(sites);
        self
    }

    pub fn resolved_burn_in(&self) -> usize {
        self.burn_in.unwrap_or(100.max(self.n_samples / 100))
    }

    /// Sorted exact sites, defaulting to both chain ends.
    pub fn resolved_exact_sites(&self, n_sites: usize) -> Vec<usize> {
        let mut sites = self
            .exact_sites
            .clone()
            .unwrap_or_else(|| if n_sites > 1 { vec![0, n_sites - 1] } else { vec![0] });
        sites.sort_unstable();
        sites.dedup();
        sites
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
        }
        if !(self.flip_probability > 0.0 && self.flip_probability <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "flip_probability = {} outside (0, 1]",
                self.flip_probability
            )));
        }
        if self.strategy == Strategy::Hybrid {
            let sites = self.resolved_exact_sites(n_sites);
            if sites.is_empty() {
                return Err(Error::InvalidArgument("exact_sites must not be empty".into()));
            }
            if let Some(&s) = sites.iter().find(|&&s| s >= n_sites) {
                return Err(Error::InvalidArgument(format!(
                    "exact site {s} outside a chain of {n_sites} sites"
                )));
            }
            if sites.len() >= n_sites {
                return Err(Error::InvalidArgument(
                    "hybrid sampling needs at least one bulk site".into(),
                ));
            }
            if sites.len() > 4 {
                return Err(Error::Capacity(format!(
                    "{} exact sites would need {} edge assignments",
                    sites.len(),
                    1usize << (2 * sites.len())
                )));
            }
        }
        Ok(())
    }
}

/// One estimator input: pairs plus normalised weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch<T> {
    pub pairs: Vec<SamplePair>,
    pub weights: Vec<T>,
    pub kind: BatchKind,
    /// Accepted proposals after burn-in (equal to `proposals` for exact batches).
    pub accepted: usize,
    pub proposals: usize,
}

impl<T: Real> SampleBatch<T> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    fn uniform(pairs: Vec<SamplePair>, kind: BatchKind, accepted: usize, proposals: usize) -> Self {
        let w = T::one() / T::of_usize(pairs.len());
        Self {
            weights: vec![w; pairs.len()],
            pairs,
            kind,
            accepted,
            proposals,
        }
    }
}

/// Normalises `exp(log_w)` in place, returning the weights.
fn softmax<T: Real>(log_w: &[T]) -> Vec<T> {
    let max = log_w.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let mut w: Vec<T> = log_w.iter().map(|&x| (x - max).exp()).collect();
    let total: T = w.iter().copied().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

fn log_mean_exp<T: Real>(log_w: &[T]) -> T {
    let max = log_w.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let s: T = log_w.iter().map(|&x| (x - max).exp()).sum();
    max + (s / T::of_usize(log_w.len())).ln()
}

/// Log of the unnormalised target: `2 Re ln rho` for full pairs,
/// `Re ln rho(s, s)` for diagonals.
#[inline]
fn log_weight_from_log_rho<T: Real>(log_rho: Complex<T>, kind: BatchKind) -> T {
    match kind {
        BatchKind::FullPair => log_rho.re * T::of(2.0),
        BatchKind::Diagonal => log_rho.re,
    }
}

pub fn log_target<T: Real>(params: &NdoParameters<T>, pair: SamplePair, kind: BatchKind) -> Result<T> {
    Ok(log_weight_from_log_rho(params.log_rho(pair)?, kind))
}

/// Acceptance probability from log target weights.
pub fn acceptance_probability<T: Real>(log_p_new: T, log_p_old: T, kind: Acceptance) -> T {
    match kind {
        Acceptance::Ratio => (log_p_new - log_p_old).min(T::zero()).exp(),
        Acceptance::Exponential => (-(log_p_old - log_p_new).exp()).exp(),
    }
}

/// Flips each eligible spin variable independently with `flip_probability`.
/// `mask_sigma` / `mask_eta` select the eligible sites; diagonal proposals
/// flip `sigma` only and mirror it onto `eta`.
fn propose_masked<R: Rng + ?Sized>(
    current: SamplePair,
    flip_probability: f64,
    mask_sigma: u32,
    mask_eta: u32,
    kind: BatchKind,
    rng: &mut R,
) -> SamplePair {
    let mut draw = |mask: u32| -> u32 {
        if flip_probability >= 1.0 {
            mask
        } else if flip_probability == 0.5 {
            rng.next_u32() & mask
        } else {
            let mut out = 0;
            let mut m = mask;
            while m != 0 {
                let bit = m & m.wrapping_neg();
                m &= m - 1;
                if rng.gen_bool(flip_probability) {
                    out |= bit;
                }
            }
            out
        }
    };
    match kind {
        BatchKind::FullPair => {
            let fs = draw(mask_sigma);
            let fe = draw(mask_eta);
            SamplePair {
                sigma: current.sigma.flip_mask(fs),
                eta: current.eta.flip_mask(fe),
            }
        }
        BatchKind::Diagonal => {
            let s = current.sigma.flip_mask(draw(mask_sigma));
            SamplePair::diagonal(s)
        }
    }
}

/// Selection rule: every eligible spin (both sides for full pairs) flips with
/// `flip_probability`. For the hybrid strategy the exact sites never change.
pub fn propose<R: Rng + ?Sized>(
    current: SamplePair,
    config: &SamplerConfig,
    kind: BatchKind,
    rng: &mut R,
) -> SamplePair {
    let n = current.n_sites();
    let mut mask = full_mask(n);
    if config.strategy == Strategy::Hybrid {
        for s in config.resolved_exact_sites(n) {
            mask &= !(1 << s);
        }
    }
    propose_masked(current, config.flip_probability, mask, mask, kind, rng)
}

fn random_pair<R: Rng + ?Sized>(n: usize, kind: BatchKind, rng: &mut R) -> SamplePair {
    let mask = full_mask(n);
    let s = SpinConfiguration::from_bits_unchecked(rng.next_u32() & mask, n);
    match kind {
        BatchKind::FullPair => {
            SamplePair::new(s, SpinConfiguration::from_bits_unchecked(rng.next_u32() & mask, n))
                .unwrap()
        }
        BatchKind::Diagonal => SamplePair::diagonal(s),
    }
}

/// Evaluates log target weights, reusing side caches between calls.
struct Evaluator<'a, T: Real> {
    params: &'a NdoParameters<T>,
    kind: BatchKind,
    left: SideCache<T>,
    right: SideCache<T>,
}

impl<'a, T: Real> Evaluator<'a, T> {
    fn new(params: &'a NdoParameters<T>, kind: BatchKind, n: usize) -> Self {
        let zero = SpinConfiguration::from_bits_unchecked(0, n);
        Self {
            params,
            kind,
            left: params.side_cache(zero),
            right: params.side_cache(zero),
        }
    }

    fn log_weight(&mut self, pair: SamplePair) -> T {
        // fresh caches keep long chains free of accumulated rounding
        self.left = self.params.side_cache(pair.sigma);
        let log_rho = match self.kind {
            BatchKind::Diagonal => self.params.log_rho_cached(&self.left, &self.left),
            BatchKind::FullPair => {
                self.right = self.params.side_cache(pair.eta);
                self.params.log_rho_cached(&self.left, &self.right)
            }
        };
        log_weight_from_log_rho(log_rho, self.kind)
    }
}

fn check_params<T: Real>(params: &NdoParameters<T>, config: &SamplerConfig) -> Result<usize> {
    let n = params.n_visible();
    config.validate(n)?;
    Ok(n)
}

fn uniform_unit<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::of(rng.gen::<f64>())
}

/// Regular Metropolis chain: a rejection records the current sample again.
pub fn sample_metropolis<T: Real, R: Rng + ?Sized>(
    params: &NdoParameters<T>,
    config: &SamplerConfig,
    kind: BatchKind,
    rng: &mut R,
) -> Result<SampleBatch<T>> {
    let n = check_params(params, config)?;
    let mut eval = Evaluator::new(params, kind, n);
    let mut current = random_pair(n, kind, rng);
    let mut current_w = eval.log_weight(current);
    let mask = full_mask(n);
    let burn_in = config.resolved_burn_in();
    let mut pairs = Vec::with_capacity(config.n_samples);
    let mut accepted = 0;
    for step in 0..burn_in + config.n_samples {
        let proposal = propose_masked(current, config.flip_probability, mask, mask, kind, rng);
        let w = eval.log_weight(proposal);
        let a = acceptance_probability(w, current_w, config.acceptance);
        let take = uniform_unit::<T, _>(rng) < a;
        if take {
            current = proposal;
            current_w = w;
        }
        if step >= burn_in {
            accepted += take as usize;
            pairs.push(current);
        }
    }
    Ok(SampleBatch::uniform(pairs, kind, accepted, config.n_samples))
}

/// Proposes from `current` until one proposal is accepted.
fn accept_one<T: Real, R: Rng + ?Sized, F: FnMut(SamplePair) -> T>(
    current: SamplePair,
    current_w: T,
    propose_fn: &mut dyn FnMut(SamplePair, &mut R) -> SamplePair,
    weight: &mut F,
    acceptance: Acceptance,
    rng: &mut R,
    proposals: &mut usize,
) -> Result<(SamplePair, T)> {
    for _ in 0..MAX_CONSECUTIVE_REJECTIONS {
        let proposal = propose_fn(current, rng);
        *proposals += 1;
        let w = weight(proposal);
        let a = acceptance_probability(w, current_w, acceptance);
        if uniform_unit::<T, _>(rng) < a {
            return Ok((proposal, w));
        }
    }
    Err(Error::StuckChain {
        rejections: MAX_CONSECUTIVE_REJECTIONS,
    })
}

/// Accept-only chain: only accepted states are recorded.
pub fn sample_accept_only<T: Real, R: Rng + ?Sized>(
    params: &NdoParameters<T>,
    config: &SamplerConfig,
    kind: BatchKind,
    rng: &mut R,
) -> Result<SampleBatch<T>> {
    let n = check_params(params, config)?;
    let mut eval = Evaluator::new(params, kind, n);
    let mut current = random_pair(n, kind, rng);
    let mut current_w = eval.log_weight(current);
    let mask = full_mask(n);
    let p = config.flip_probability;
    let mut propose_fn = |c: SamplePair, r: &mut R| propose_masked(c, p, mask, mask, kind, r);
    let mut weight = |x: SamplePair| eval.log_weight(x);
    let burn_in = config.resolved_burn_in();
    let mut pairs = Vec::with_capacity(config.n_samples);
    let mut proposals = 0;
    for step in 0..burn_in + config.n_samples {
        let mut counter = 0;
        let (next, w) = accept_one(
            current,
            current_w,
            &mut propose_fn,
            &mut weight,
            config.acceptance,
            rng,
            &mut counter,
        )?;
        current = next;
        current_w = w;
        if step >= burn_in {
            proposals += counter;
            pairs.push(current);
        }
    }
    Ok(SampleBatch::uniform(pairs, kind, config.n_samples, proposals))
}

/// Edge-slot layout for the hybrid sampler. Assignment index bits run
/// little-endian over `(sigma at exact sites..., eta at exact sites...)`;
/// diagonal batches only use the `sigma` bits.
#[derive(Clone, Debug)]
pub struct EdgeCycle {
    sites: Vec<usize>,
    kind: BatchKind,
}

impl EdgeCycle {
    pub fn new(sites: Vec<usize>, kind: BatchKind) -> Self {
        Self { sites, kind }
    }

    pub fn len(&self) -> usize {
        match self.kind {
            BatchKind::FullPair => 1 << (2 * self.sites.len()),
            BatchKind::Diagonal => 1 << self.sites.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn site_mask(&self) -> u32 {
        self.sites.iter().fold(0, |m, &s| m | 1 << s)
    }

    /// Bits to OR into `(sigma, eta)` for assignment `index`.
    pub fn assignment(&self, index: usize) -> (u32, u32) {
        let e = self.sites.len();
        let mut s_bits = 0;
        let mut e_bits = 0;
        for (t, &site) in self.sites.iter().enumerate() {
            if index >> t & 1 == 1 {
                s_bits |= 1 << site;
            }
            if self.kind == BatchKind::FullPair && index >> (e + t) & 1 == 1 {
                e_bits |= 1 << site;
            }
        }
        if self.kind == BatchKind::Diagonal {
            e_bits = s_bits;
        }
        (s_bits, e_bits)
    }

    /// Index of the assignment that `pair` carries on the exact sites.
    pub fn index_of(&self, pair: SamplePair) -> usize {
        let e = self.sites.len();
        let mut idx = 0;
        for (t, &site) in self.sites.iter().enumerate() {
            if pair.sigma.is_up(site) {
                idx |= 1 << t;
            }
            if self.kind == BatchKind::FullPair && pair.eta.is_up(site) {
                idx |= 1 << (e + t);
            }
        }
        idx
    }

    /// `pair` with its exact sites overwritten by assignment `index`.
    pub fn apply(&self, pair: SamplePair, index: usize) -> SamplePair {
        let keep = !self.site_mask();
        let (s, e) = self.assignment(index);
        let n = pair.n_sites();
        SamplePair {
            sigma: SpinConfiguration::from_bits_unchecked(pair.sigma.bits() & keep | s, n),
            eta: SpinConfiguration::from_bits_unchecked(pair.eta.bits() & keep | e, n),
        }
    }
}

/// Log target of every edge assignment for one bulk configuration.
struct BulkEvaluator<'a, T: Real> {
    params: &'a NdoParameters<T>,
    cycle: EdgeCycle,
    side_variants: usize,
    left: Vec<SideCache<T>>,
    right: Vec<SideCache<T>>,
    log_w: Vec<T>,
}

impl<'a, T: Real> BulkEvaluator<'a, T> {
    fn new(params: &'a NdoParameters<T>, cycle: EdgeCycle, n: usize) -> Self {
        let side_variants = 1 << cycle.sites.len();
        let zero = params.side_cache(SpinConfiguration::from_bits_unchecked(0, n));
        Self {
            params,
            left: vec![zero.clone(); side_variants],
            right: vec![zero; side_variants],
            log_w: vec![T::zero(); cycle.len()],
            side_variants,
            cycle,
        }
    }

    /// Fills `log_w` for every assignment on `bulk` and returns the log of
    /// their mean.
    fn evaluate(&mut self, bulk: SamplePair) -> T {
        let p = self.params;
        let base = self.cycle.apply(bulk, 0);
        for v in 0..self.side_variants {
            let (s, _) = self.cycle.assignment(v);
            self.left[v] = p.side_cache(base.sigma.flip_mask(s));
        }
        match self.cycle.kind {
            BatchKind::Diagonal => {
                for v in 0..self.side_variants {
                    let l = p.log_rho_cached(&self.left[v], &self.left[v]);
                    self.log_w[v] = log_weight_from_log_rho(l, BatchKind::Diagonal);
                }
            }
            BatchKind::FullPair => {
                for v in 0..self.side_variants {
                    let (s, _) = self.cycle.assignment(v);
                    self.right[v] = p.side_cache(base.eta.flip_mask(s));
                }
                let sv = self.side_variants;
                for idx in 0..self.cycle.len() {
                    let (ls, rs) = (idx % sv, idx / sv);
                    let l = p.log_rho_cached(&self.left[ls], &self.right[rs]);
                    self.log_w[idx] = log_weight_from_log_rho(l, BatchKind::FullPair);
                }
            }
        }
        log_mean_exp(&self.log_w)
    }
}

/// Hybrid sampler: accept-only chain over the bulk, exact cycling over the
/// edge sites.
pub fn sample_hybrid<T: Real, R: Rng + ?Sized>(
    params: &NdoParameters<T>,
    config: &SamplerConfig,
    kind: BatchKind,
    rng: &mut R,
) -> Result<SampleBatch<T>> {
    let n = check_params(params, config)?;
    let cycle = EdgeCycle::new(config.resolved_exact_sites(n), kind);
    let bulk_mask = full_mask(n) & !cycle.site_mask();
    let n_edges = cycle.len();
    let mut eval = BulkEvaluator::new(params, cycle.clone(), n);

    let mut current = cycle.apply(random_pair(n, kind, rng), 0);
    let mut current_w = eval.evaluate(current);
    let mut current_log_w = eval.log_w.clone();
    let p = config.flip_probability;
    let mut propose_fn =
        |c: SamplePair, r: &mut R| propose_masked(c, p, bulk_mask, bulk_mask, kind, r);

    let burn_in = config.resolved_burn_in();
    let mut pairs = Vec::with_capacity(config.n_samples);
    let mut log_importance = Vec::with_capacity(config.n_samples);
    let mut proposals = 0;
    let mut accepted = 0;
    let mut edge_counter = 0usize;
    let mut step = 0usize;
    while pairs.len() < config.n_samples {
        let mut counter = 0;
        let mut weight = |x: SamplePair| eval.evaluate(x);
        let (next, w) = accept_one(
            current,
            current_w,
            &mut propose_fn,
            &mut weight,
            config.acceptance,
            rng,
            &mut counter,
        )?;
        current = next;
        current_w = w;
        current_log_w.clone_from(&eval.log_w);
        step += 1;
        if step <= burn_in {
            continue;
        }
        proposals += counter;
        accepted += 1;
        let emit = if config.hold_bulk_for_cycle { n_edges } else { 1 };
        for _ in 0..emit {
            if pairs.len() == config.n_samples {
                break;
            }
            let idx = edge_counter % n_edges;
            edge_counter += 1;
            pairs.push(cycle.apply(current, idx));
            log_importance.push(current_log_w[idx] - current_w);
        }
    }
    Ok(SampleBatch {
        weights: softmax(&log_importance),
        pairs,
        kind,
        accepted,
        proposals,
    })
}

/// Every pair (or diagonal) with its exact normalised weight.
pub fn sample_exact<T: Real>(
    params: &NdoParameters<T>,
    n_sites: usize,
    kind: BatchKind,
) -> Result<SampleBatch<T>> {
    if n_sites != params.n_visible() {
        return Err(Error::SizeMismatch(format!(
            "{n_sites} sites requested, network has {}",
            params.n_visible()
        )));
    }
    let limit = match kind {
        BatchKind::FullPair => EXACT_FULL_MAX_SITES,
        BatchKind::Diagonal => EXACT_DIAGONAL_MAX_SITES,
    };
    if n_sites > limit {
        return Err(Error::Capacity(format!(
            "exact {kind:?} enumeration limited to N <= {limit}, got {n_sites}"
        )));
    }
    let configs: Vec<_> = enumerate_configurations(n_sites)?.collect();
    let caches: Vec<_> = configs.iter().map(|&c| params.side_cache(c)).collect();
    let mut pairs = Vec::new();
    let mut log_w = Vec::new();
    match kind {
        BatchKind::FullPair => {
            for (ls, &s) in caches.iter().zip(&configs) {
                for (rs, &e) in caches.iter().zip(&configs) {
                    pairs.push(SamplePair { sigma: s, eta: e });
                    log_w.push(log_weight_from_log_rho(params.log_rho_cached(ls, rs), kind));
                }
            }
        }
        BatchKind::Diagonal => {
            for (c, &s) in caches.iter().zip(&configs) {
                pairs.push(SamplePair::diagonal(s));
                log_w.push(log_weight_from_log_rho(params.log_rho_cached(c, c), kind));
            }
        }
    }
    let len = pairs.len();
    Ok(SampleBatch {
        weights: softmax(&log_w),
        pairs,
        kind,
        accepted: len,
        proposals: len,
    })
}

/// Draws a batch with the configured strategy.
pub fn draw_batch<T: Real, R: Rng + ?Sized>(
    params: &NdoParameters<T>,
    config: &SamplerConfig,
    kind: BatchKind,
    rng: &mut R,
) -> Result<SampleBatch<T>> {
    match config.strategy {
        Strategy::Exact => sample_exact(params, params.n_visible(), kind),
        Strategy::Metropolis => sample_metropolis(params, config, kind, rng),
        Strategy::AcceptOnly => sample_accept_only(params, config, kind, rng),
        Strategy::Hybrid => sample_hybrid(params, config, kind, rng),
    }
}

/// Deterministic per-stream generator derived from a base seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
