//! Spin-chain encoding, the isotropic Heisenberg Hamiltonian with open
//! boundaries, and the Lindblad generator with local pump/decay on every site.
//!
//! A spin configuration is a packed word: bit `i` set means site `i` is up
//! (`s_i = +1`, excited), cleared means down (`s_i = -1`). A density-matrix
//! element `rho(sigma, eta)` is addressed by a [`SamplePair`].

use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c_i, c_real, Real};

/// Hard ceiling on chain length for anything that stores configurations.
pub const MAX_SITES: usize = 24;
/// Ceiling for routines that hold a dense `2^N x 2^N` density matrix.
pub const DENSE_MAX_SITES: usize = 13;
/// Ceiling for the explicit `4^N x 4^N` superoperator (16^N complex entries).
pub const SUPEROPERATOR_MAX_SITES: usize = 6;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfiguration {
    bits: u32,
    n_sites: u8,
}

impl SpinConfiguration {
    pub fn new(bits: u32, n_sites: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(Error::Capacity(format!(
                "chain length {n_sites} outside 1..={MAX_SITES}"
            )));
        }
        if bits >> n_sites != 0 {
            return Err(Error::InvalidArgument(format!(
                "bits {bits:#b} set beyond site {n_sites}"
            )));
        }
        Ok(Self::from_bits_unchecked(bits, n_sites))
    }

    #[inline]
    pub(crate) fn from_bits_unchecked(bits: u32, n_sites: usize) -> Self {
        debug_assert!(n_sites <= MAX_SITES && bits >> n_sites == 0);
        Self {
            bits,
            n_sites: n_sites as u8,
        }
    }

    /// Builds a configuration from `+1` / `-1` spins, site 0 first.
    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        let mut bits = 0u32;
        for (i, &s) in spins.iter().enumerate() {
            match s {
                1 => bits |= 1 << i,
                -1 => {}
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "spin {s} at site {i} is not +1 or -1"
                    )))
                }
            }
        }
        Self::new(bits, spins.len())
    }

    pub fn all_up(n_sites: usize) -> Result<Self> {
        Self::new(full_mask(n_sites), n_sites)
    }

    pub fn all_down(n_sites: usize) -> Result<Self> {
        Self::new(0, n_sites)
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn n_sites(self) -> usize {
        self.n_sites as usize
    }

    /// Row/column index in a dense `2^N` basis.
    #[inline]
    pub fn index(self) -> usize {
        self.bits as usize
    }

    #[inline]
    pub fn is_up(self, site: usize) -> bool {
        self.bits >> site & 1 == 1
    }

    /// `+1` for up, `-1` for down.
    #[inline]
    pub fn spin(self, site: usize) -> i8 {
        if self.is_up(site) {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn spin_real<T: Real>(self, site: usize) -> T {
        if self.is_up(site) {
            T::one()
        } else {
            -T::one()
        }
    }

    #[inline]
    pub fn flip(self, site: usize) -> Self {
        self.flip_mask(1 << site)
    }

    #[inline]
    pub fn flip_mask(self, mask: u32) -> Self {
        debug_assert!(mask >> self.n_sites == 0);
        Self {
            bits: self.bits ^ mask,
            n_sites: self.n_sites,
        }
    }

    /// Number of up spins.
    #[inline]
    pub fn popcount(self) -> u32 {
        self.bits.count_ones()
    }

    pub fn spins(self) -> impl Iterator<Item = i8> {
        (0..self.n_sites()).map(move |i| self.spin(i))
    }
}

impl fmt::Debug for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for i in 0..self.n_sites() {
            f.write_str(if self.is_up(i) { "↑" } else { "↓" })?;
        }
        write!(f, "⟩")
    }
}

impl fmt::Display for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[inline]
pub(crate) fn full_mask(n_sites: usize) -> u32 {
    if n_sites >= 32 {
        u32::MAX
    } else {
        (1u32 << n_sites) - 1
    }
}

/// Index `(sigma, eta)` of one density-matrix element.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct SamplePair {
    pub sigma: SpinConfiguration,
    pub eta: SpinConfiguration,
}

impl SamplePair {
    pub fn new(sigma: SpinConfiguration, eta: SpinConfiguration) -> Result<Self> {
        if sigma.n_sites() != eta.n_sites() {
            return Err(Error::SizeMismatch(format!(
                "sigma has {} sites, eta has {}",
                sigma.n_sites(),
                eta.n_sites()
            )));
        }
        Ok(Self { sigma, eta })
    }

    #[inline]
    pub fn diagonal(config: SpinConfiguration) -> Self {
        Self {
            sigma: config,
            eta: config,
        }
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.sigma.n_sites()
    }

    #[inline]
    pub fn is_diagonal(&self) -> bool {
        self.sigma == self.eta
    }

    /// Row-major index into the vectorised density matrix, `sigma * 2^N + eta`.
    #[inline]
    pub fn index(&self) -> usize {
        (self.sigma.index() << self.n_sites()) | self.eta.index()
    }

    pub fn from_index(index: usize, n_sites: usize) -> Self {
        let mask = full_mask(n_sites) as usize;
        Self {
            sigma: SpinConfiguration::from_bits_unchecked((index >> n_sites) as u32, n_sites),
            eta: SpinConfiguration::from_bits_unchecked((index & mask) as u32, n_sites),
        }
    }

    /// The transposed element `(eta, sigma)`.
    #[inline]
    pub fn transposed(&self) -> Self {
        Self {
            sigma: self.eta,
            eta: self.sigma,
        }
    }
}

/// Chain length, exchange coupling and per-site pump/decay rates (hbar = 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct ChainParameters<T> {
    pub n_sites: usize,
    pub coupling_j: T,
    pub gamma_in: Vec<T>,
    pub gamma_out: Vec<T>,
}

impl<T: Real> ChainParameters<T> {
    pub fn new(n_sites: usize, coupling_j: T, gamma_in: Vec<T>, gamma_out: Vec<T>) -> Result<Self> {
        let p = Self {
            n_sites,
            coupling_j,
            gamma_in,
            gamma_out,
        };
        p.validate()?;
        Ok(p)
    }

    /// Same pump and decay rate on every site.
    pub fn uniform(n_sites: usize, coupling_j: T, gamma_in: T, gamma_out: T) -> Result<Self> {
        Self::new(
            n_sites,
            coupling_j,
            vec![gamma_in; n_sites],
            vec![gamma_out; n_sites],
        )
    }

    /// Bulk sites share `bulk`; the first and last site get their own
    /// `(gamma_in, gamma_out)`.
    pub fn boundary_driven(
        n_sites: usize,
        coupling_j: T,
        bulk: (T, T),
        left: (T, T),
        right: (T, T),
    ) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidArgument(
                "boundary-driven chain needs at least two sites".into(),
            ));
        }
        let mut gamma_in = vec![bulk.0; n_sites];
        let mut gamma_out = vec![bulk.1; n_sites];
        gamma_in[0] = left.0;
        gamma_out[0] = left.1;
        gamma_in[n_sites - 1] = right.0;
        gamma_out[n_sites - 1] = right.1;
        Self::new(n_sites, coupling_j, gamma_in, gamma_out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 || self.n_sites > MAX_SITES {
            return Err(Error::Capacity(format!(
                "n_sites = {} outside 1..={MAX_SITES}",
                self.n_sites
            )));
        }
        if self.gamma_in.len() != self.n_sites || self.gamma_out.len() != self.n_sites {
            return Err(Error::SizeMismatch(format!(
                "n_sites = {} but gamma_in has {} and gamma_out has {} entries",
                self.n_sites,
                self.gamma_in.len(),
                self.gamma_out.len()
            )));
        }
        if !self.coupling_j.is_finite() {
            return Err(Error::InvalidArgument("coupling_j must be finite".into()));
        }
        for (name, rates) in [("gamma_in", &self.gamma_in), ("gamma_out", &self.gamma_out)] {
            if let Some(i) = rates.iter().position(|r| !(r.is_finite() && *r >= T::zero())) {
                return Err(Error::InvalidArgument(format!(
                    "{name}[{i}] = {} must be finite and nonnegative",
                    rates[i]
                )));
            }
        }
        Ok(())
    }

    /// Every site carries identical rates.
    pub fn is_symmetric(&self) -> bool {
        let (gi, go) = (self.gamma_in[0], self.gamma_out[0]);
        self.gamma_in.iter().all(|&g| g == gi) && self.gamma_out.iter().all(|&g| g == go)
    }

    /// Bulk rates uniform, and at least one edge differs from the bulk.
    pub fn is_boundary_driven(&self) -> bool {
        let n = self.n_sites;
        if n < 3 {
            return n == 2 && !self.is_symmetric();
        }
        let bulk = (self.gamma_in[1], self.gamma_out[1]);
        let bulk_uniform = (1..n - 1).all(|i| (self.gamma_in[i], self.gamma_out[i]) == bulk);
        let left = (self.gamma_in[0], self.gamma_out[0]);
        let right = (self.gamma_in[n - 1], self.gamma_out[n - 1]);
        bulk_uniform && (left != bulk || right != bulk)
    }

    /// Largest of `|J|` and all rates; sets the natural time step.
    pub fn max_rate(&self) -> T {
        self.gamma_in
            .iter()
            .chain(&self.gamma_out)
            .fold(self.coupling_j.abs(), |m, &g| m.max(g))
    }

    pub(crate) fn check_sites(&self, n_sites: usize) -> Result<()> {
        if n_sites != self.n_sites {
            return Err(Error::SizeMismatch(format!(
                "configuration has {n_sites} sites, chain has {}",
                self.n_sites
            )));
        }
        Ok(())
    }

    /// Diagonal Hamiltonian element `(J/4) sum_i s_i s_{i+1}`.
    #[inline]
    pub(crate) fn hamiltonian_diagonal(&self, config: SpinConfiguration) -> T {
        let n = self.n_sites;
        if n < 2 {
            return T::zero();
        }
        // anti-aligned bonds contribute -1, aligned +1
        let anti = ((config.bits ^ (config.bits >> 1)) & full_mask(n - 1)).count_ones() as usize;
        let aligned = n - 1 - anti;
        self.coupling_j * T::of(0.25) * (T::of_usize(aligned) - T::of_usize(anti))
    }

    /// Flip-flop partners of `config` (each with amplitude `J/2`).
    #[inline]
    pub(crate) fn flip_flop_partners(
        &self,
        config: SpinConfiguration,
    ) -> impl Iterator<Item = SpinConfiguration> + '_ {
        let n = self.n_sites;
        let anti = if n < 2 {
            0
        } else {
            (config.bits ^ (config.bits >> 1)) & full_mask(n - 1)
        };
        (0..n.saturating_sub(1))
            .filter(move |i| anti >> i & 1 == 1)
            .map(move |i| config.flip_mask(0b11 << i))
    }

    /// `sum_i [gamma_out_i n_i + gamma_in_i (1 - n_i)]`; the anticommutator
    /// part of the dissipator is `-(d(sigma) + d(eta)) / 2`.
    #[inline]
    pub(crate) fn dissipation_weight(&self, config: SpinConfiguration) -> T {
        let mut d = T::zero();
        for i in 0..self.n_sites {
            d += if config.is_up(i) {
                self.gamma_out[i]
            } else {
                self.gamma_in[i]
            };
        }
        d
    }
}

/// One row of the Liouvillian: `(L rho)(source) = sum amplitude * rho(target)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiouvillianStencil<T> {
    pub source: SamplePair,
    pub entries: Vec<(SamplePair, Complex<T>)>,
}

impl<T: Real> LiouvillianStencil<T> {
    /// Largest possible entry count for an `n`-site chain.
    pub fn max_entries(n_sites: usize) -> usize {
        1 + 2 * n_sites.saturating_sub(1) + 2 * n_sites
    }

    /// `sum amplitude * f(target)`.
    pub fn apply<F: FnMut(SamplePair) -> Complex<T>>(&self, mut f: F) -> Complex<T> {
        self.entries
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, (t, a)| acc + *a * f(*t))
    }
}

/// `H |config>` as a list of `(configuration, amplitude)`; the diagonal term
/// comes first.
pub fn hamiltonian_action<T: Real>(
    config: SpinConfiguration,
    params: &ChainParameters<T>,
) -> Result<Vec<(SpinConfiguration, T)>> {
    params.check_sites(config.n_sites())?;
    let half_j = params.coupling_j * T::of(0.5);
    let mut out = vec![(config, params.hamiltonian_diagonal(config))];
    if half_j != T::zero() {
        out.extend(params.flip_flop_partners(config).map(|c| (c, half_j)));
    }
    Ok(out)
}

/// Row `pair` of the Liouvillian `L = -i[H, .] + sum_i (D_out,i + D_in,i)`.
pub fn liouvillian_row<T: Real>(
    pair: SamplePair,
    params: &ChainParameters<T>,
) -> Result<LiouvillianStencil<T>> {
    params.check_sites(pair.n_sites())?;
    let mut entries = Vec::with_capacity(LiouvillianStencil::<T>::max_entries(params.n_sites));
    liouvillian_row_into(pair, params, &mut entries);
    Ok(LiouvillianStencil {
        source: pair,
        entries,
    })
}

/// Allocation-free variant of [`liouvillian_row`]; sizes must already match.
pub(crate) fn liouvillian_row_into<T: Real>(
    pair: SamplePair,
    params: &ChainParameters<T>,
    entries: &mut Vec<(SamplePair, Complex<T>)>,
) {
    entries.clear();
    let SamplePair { sigma, eta } = pair;
    let half = T::of(0.5);
    let i = c_i::<T>();

    let h_diff = params.hamiltonian_diagonal(sigma) - params.hamiltonian_diagonal(eta);
    let decay = -(params.dissipation_weight(sigma) + params.dissipation_weight(eta)) * half;
    let diag = Complex::new(decay, -h_diff);
    if diag.re != T::zero() || diag.im != T::zero() {
        entries.push((pair, diag));
    }

    let half_j = params.coupling_j * half;
    if half_j != T::zero() {
        // -i H acting from the left, +i H from the right (H is real symmetric)
        for s in params.flip_flop_partners(sigma) {
            entries.push((SamplePair { sigma: s, eta }, -i * half_j));
        }
        for e in params.flip_flop_partners(eta) {
            entries.push((SamplePair { sigma, eta: e }, i * half_j));
        }
    }

    // sigma^- rho sigma^+ feeds rows whose site is down on both sides from
    // the element with that site up on both sides; sigma^+ rho sigma^- the reverse.
    for site in 0..params.n_sites {
        let (up_s, up_e) = (sigma.is_up(site), eta.is_up(site));
        let rate = match (up_s, up_e) {
            (false, false) => params.gamma_out[site],
            (true, true) => params.gamma_in[site],
            _ => continue,
        };
        if rate != T::zero() {
            let target = SamplePair {
                sigma: sigma.flip(site),
                eta: eta.flip(site),
            };
            entries.push((target, c_real(rate)));
        }
    }
    debug_assert!(no_duplicate_targets(entries));
}

fn no_duplicate_targets<T>(entries: &[(SamplePair, T)]) -> bool {
    entries
        .iter()
        .enumerate()
        .all(|(k, (t, _))| entries[..k].iter().all(|(u, _)| u != t))
}

/// Dense `4^N x 4^N` superoperator acting on the row-major vectorised density
/// matrix (see [`SamplePair::index`]).
#[derive(Clone, Debug)]
pub struct DenseLiouvillian<T> {
    n_sites: usize,
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> DenseLiouvillian<T> {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// `4^N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.data[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    /// Matrix-vector product on a vectorised density matrix.
    pub fn apply(&self, rho: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if rho.len() != self.dim {
            return Err(Error::SizeMismatch(format!(
                "vector of length {} for superoperator of dim {}",
                rho.len(),
                self.dim
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.dim)
            .map(|row| {
                row.iter()
                    .zip(rho)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * *b)
            })
            .collect())
    }
}

/// Assembles every [`liouvillian_row`] into an explicit matrix.
pub fn build_dense_liouvillian<T: Real>(params: &ChainParameters<T>) -> Result<DenseLiouvillian<T>> {
    params.validate()?;
    let n = params.n_sites;
    if n > SUPEROPERATOR_MAX_SITES {
        return Err(Error::Capacity(format!(
            "dense superoperator limited to N <= {SUPEROPERATOR_MAX_SITES}, got {n}"
        )));
    }
    let dim = 1usize << (2 * n);
    let mut data = vec![Complex::new(T::zero(), T::zero()); dim * dim];
    let mut entries = Vec::new();
    for row in 0..dim {
        let pair = SamplePair::from_index(row, n);
        liouvillian_row_into(pair, params, &mut entries);
        for (target, amp) in &entries {
            data[row * dim + target.index()] += *amp;
        }
    }
    Ok(DenseLiouvillian { n_sites: n, dim, data })
}

/// All `2^N` configurations in ascending bit order.
pub fn enumerate_configurations(
    n_sites: usize,
) -> Result<impl Iterator<Item = SpinConfiguration> + Clone> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::Capacity(format!(
            "chain length {n_sites} outside 1..={MAX_SITES}"
        )));
    }
    Ok((0..=full_mask(n_sites)).map(move |b| SpinConfiguration::from_bits_unchecked(b, n_sites)))
}
