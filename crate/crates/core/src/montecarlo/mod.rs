//! Finite-dimension simulation of training, MMSE estimation, precoding and
//! achievable rates, used as an oracle for the closed forms.
//!
//! Only what the reference group's rates depend on is drawn explicitly:
//! the reference users' true channels to every active BS, and one training
//! observation per (BS, codebook, pilot column). Observations on the
//! reference codebook are the reference channel plus contamination and
//! noise; on every other codebook they are independent of the reference
//! channels and are drawn directly from their marginal law. Channels of
//! non-reference users enter the precoders only through these
//! observations, so this is exact in distribution.

pub mod linalg;
mod rng;

use log::warn;
use num_complex::Complex;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::asymptotic::{SchemeConfig, ZfCase};
use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::geometry::{closest_bs_in_cluster, nearest_zf_clusters};
use crate::scalar::{count, lit, tolerance, CompensatedSum, Real};
pub use linalg::CMatrix;
use linalg::{dot, norm_sqr, normalize_columns, normalized_pinv, rank_tolerance};

/// Redraws allowed for a trial whose ZF matrix is rank deficient.
const MAX_RESAMPLES: u32 = 16;

const STREAM_REFERENCE: u64 = 0;
const STREAM_OBSERVATION: u64 = 1;

/// Users per location S*N/m, which must be a positive integer.
pub fn users_per_location<T: Real>(load: T, system_size: usize, multiplicity: usize) -> Result<usize> {
    let exact = load * count::<T>(system_size) / count::<T>(multiplicity);
    let rounded = exact.round();
    if !(rounded >= T::one()) || (exact - rounded).abs() > tolerance::<T>(1e-9) * exact.max(T::one()) {
        return Err(Error::Config(format!(
            "S*N/m = {exact} must be a positive integer (S = {load}, N = {system_size}, m = {multiplicity})"
        )));
    }
    Ok(rounded.to_usize().expect("finite"))
}

/// Rounds S to the nearest value with S*N/m a positive integer, warning
/// when this moves S by more than 1%.
pub fn round_load<T: Real>(load: T, system_size: usize, multiplicity: usize) -> T {
    let unit = count::<T>(multiplicity) / count::<T>(system_size);
    let rounded = (load / unit).round().max(T::one()) * unit;
    if ((rounded - load) / load).abs() > lit(0.01) {
        warn!("loading factor {load} rounded to {rounded} for S*N/m to be an integer");
    }
    rounded
}

/// One draw of the reference users' true channels and of every training
/// observation on the simulated subband.
#[derive(Clone, Debug)]
pub struct ChannelRealization<T> {
    pub seed: u64,
    pub trial: u64,
    pub attempt: u32,
    bs_count: usize,
    users: usize,
    block: usize,
    codebooks: usize,
    // ((user * B) + bs) * block
    reference: Vec<Complex<T>>,
    // (((q * B) + bs) * users + user) * block
    observations: Vec<Complex<T>>,
}

impl<T: Real> ChannelRealization<T> {
    /// Antennas per BS, M*N.
    pub fn block_len(&self) -> usize {
        self.block
    }

    /// Users per group, S*N.
    pub fn users(&self) -> usize {
        self.users
    }

    /// True channel of reference user `user` to the antennas of BS `bs`.
    pub fn true_channel(&self, user: usize, bs: usize) -> &[Complex<T>] {
        let start = (user * self.bs_count + bs) * self.block;
        &self.reference[start..start + self.block]
    }

    /// Training observation at BS `bs` on pilot column `user` of codebook `q`.
    pub fn observation(&self, q: usize, bs: usize, user: usize) -> &[Complex<T>] {
        let start = ((q * self.bs_count + bs) * self.users + user) * self.block;
        &self.observations[start..start + self.block]
    }
}

/// Beamforming matrix of one cluster plus the estimate matrix it was built
/// from.
#[derive(Clone, Debug)]
pub struct Precoder<T> {
    pub cluster: usize,
    pub zf_order: usize,
    /// C*M*N x S*N, unit-norm columns in reference-user order.
    pub beams: CMatrix<T>,
    /// Own estimates followed by the (masked) constraint columns.
    pub stacked: CMatrix<T>,
    /// (column of `stacked`, kept BS block) for masked constraint columns.
    pub masks: Vec<(usize, usize)>,
}

impl<T: Real> Precoder<T> {
    /// max over imposed constraints of |v_j^H h_k| / ||h_k||.
    pub fn max_zf_residual(&self) -> T {
        if self.zf_order == 0 {
            return T::zero();
        }
        let mut worst = T::zero();
        for j in 0..self.beams.cols() {
            for k in 0..self.stacked.cols() {
                if j == k {
                    continue;
                }
                let h = self.stacked.col(k);
                let r = dot(self.beams.col(j), h).norm() / norm_sqr(h).sqrt();
                worst = worst.max(r);
            }
        }
        worst
    }
}

/// Per-BS normalized partial traces (1/(S*N)) sum over the BS-b rows of
/// diag(V V^H).
pub fn partial_trace_profile<T: Real>(prec: &Precoder<T>, cluster_size: usize) -> Vec<T> {
    let rows = prec.beams.rows();
    let block = rows / cluster_size;
    let cols = prec.beams.cols();
    (0..cluster_size)
        .map(|b| {
            let mut s = CompensatedSum::new();
            for j in 0..cols {
                s.add(norm_sqr(&prec.beams.col(j)[b * block..(b + 1) * block]));
            }
            s.value() / count(cols)
        })
        .collect()
}

/// Per-trial outcome: SINR and rate of each reference user.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome<T> {
    pub trial: u64,
    pub resamples: u32,
    /// Indexed by reference user, location-major.
    pub sinr: Vec<T>,
    pub rate: Vec<T>,
}

/// Monte Carlo rate estimate with standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct RateEstimate<T> {
    /// Group spectral efficiency (1/(F N)) sum of user rates.
    pub group_rate: T,
    pub group_std_error: T,
    /// Mean per-user rate at each location.
    pub per_location_rate: Vec<T>,
    pub per_location_std_error: Vec<T>,
    pub trials: usize,
    /// Rank-deficient draws that were redrawn.
    pub resamples: u64,
    /// Present when requested; ordered by trial.
    pub records: Vec<TrialOutcome<T>>,
}

/// Constraint a cluster imposes for one location: null the users of group
/// (cluster - offset) there, optionally estimating only one BS block.
#[derive(Clone, Copy, Debug)]
struct Constraint {
    offset: usize,
    kept_block: Option<usize>,
}

/// Explains why the stacked ZF matrix of some active cluster is rank
/// deficient for every channel draw, if it is.
///
/// Estimates on one codebook and pilot column are block-wise multiples of a
/// single observation, so masked columns sharing the served user's codebook
/// strip those blocks from its own column, and same-codebook unmasked
/// columns live in a C-dimensional space. Past that the blocks carry
/// independent Gaussian observations, and full rank needs at most |T| M N
/// columns supported inside every set T of blocks.
fn structural_deficiency<T: Real>(
    scn: &Scenario<T>,
    active: &[usize],
    constraints: &[Vec<Constraint>],
    users_per_location: usize,
    block: usize,
) -> Option<String> {
    let layout = scn.layout();
    let reuse = scn.reuse();
    let cs = scn.cluster_size();
    let all = (1usize << cs) - 1;
    for &c in active {
        let own = reuse.codebook(c);
        // Columns per support bitmask, counted per location.
        let mut by_support = vec![0usize; all + 1];
        for (loc, cons) in constraints.iter().enumerate() {
            let mut keys: Vec<(usize, usize)> = Vec::new();
            let mut same_unmasked = 0usize;
            let mut own_support = all;
            for con in cons {
                let group = layout.add(c, layout.neg(con.offset));
                if !active.contains(&group) {
                    continue;
                }
                let cb = reuse.codebook(group);
                match con.kept_block {
                    Some(b) if !keys.contains(&(cb, b)) => {
                        keys.push((cb, b));
                        by_support[1 << b] += users_per_location;
                        if cb == own {
                            own_support &= !(1 << b);
                        }
                    }
                    Some(_) => {}
                    None => {
                        by_support[all] += users_per_location;
                        same_unmasked += (cb == own) as usize;
                    }
                }
            }
            if own_support == 0 || same_unmasked + 1 > cs {
                return Some(format!(
                    "at cluster {c} the constraints for location {loc} reuse its pilot codebook on every BS \
                     block, so zero-forcing would null the served user"
                ));
            }
            by_support[own_support] += users_per_location;
        }
        for t in 1..=all {
            let inside: usize = (1..=all).filter(|&s| s & !t == 0).map(|s| by_support[s]).sum();
            let room = t.count_ones() as usize * block;
            if inside > room {
                return Some(format!(
                    "at cluster {c}, {inside} zero-forcing columns are confined to BS blocks {:?} \
                     with {room} antennas; lower S",
                    (0..cs).filter(|b| t & (1 << b) != 0).collect::<Vec<_>>()
                ));
            }
        }
    }
    None
}

/// Finite-N simulator for one scenario and scheme.
#[derive(Clone, Debug)]
pub struct Simulator<'a, T> {
    scn: &'a Scenario<T>,
    cfg: SchemeConfig<T>,
    system_size: usize,
    users_per_location: usize,
    block: usize,
    reference_codebook: usize,
    active: Vec<usize>,
    needed_bs: Vec<bool>,
    constraints: Vec<Vec<Constraint>>,
    // Standard deviations of reference entries, [loc * B + bs].
    reference_std: Vec<T>,
    // Observation standard deviations and MMSE denominators, [(loc * Q + q) * B + bs].
    observation_std: Vec<T>,
    denominator: Vec<T>,
}

impl<'a, T: Real> Simulator<'a, T> {
    pub fn new(scn: &'a Scenario<T>, cfg: &SchemeConfig<T>, system_size: usize) -> Result<Self> {
        cfg.check_scenario(scn)?;
        if system_size == 0 {
            return Err(Error::Config("system size N must be positive".into()));
        }
        let antennas = cfg.antennas * count::<T>(system_size);
        if (antennas - antennas.round()).abs() > tolerance::<T>(1e-9) * antennas {
            return Err(Error::Config(format!("M*N = {antennas} must be an integer")));
        }
        let block = antennas.round().to_usize().expect("finite");
        let m = scn.multiplicity();
        let upl = users_per_location(cfg.load, system_size, m)?;
        let nb = scn.bs_count();
        let reuse = scn.reuse();
        let q_count = reuse.pilot_reuse();
        let reference_codebook = reuse.codebook(0);
        let active = reuse.active_set(reuse.subband(0));
        let mut needed_bs = vec![false; nb];
        for &c in &active {
            for &b in scn.clusters().members(c) {
                needed_bs[b] = true;
            }
        }
        let case = cfg.zf_case();
        let constraints: Vec<Vec<Constraint>> = scn
            .bin()
            .locations()
            .iter()
            .map(|&x| {
                if cfg.zf_order <= 1 {
                    return Vec::new();
                }
                nearest_zf_clusters(scn.layout(), scn.clusters(), reuse, x, cfg.zf_order)
                    .into_iter()
                    .map(|e| Constraint {
                        offset: e,
                        kept_block: (case == ZfCase::MaskedNeighbours)
                            .then(|| closest_bs_in_cluster(scn.layout(), scn.clusters(), x, e)),
                    })
                    .collect()
            })
            .collect();
        if let Some(why) = structural_deficiency(scn, &active, &constraints, upl, block) {
            return Err(Error::Infeasible(format!("{}: {why}", cfg.label())));
        }
        let n = count::<T>(system_size);
        let noise = scn.training_noise(cfg.load);
        let f0 = reuse.subband(0);
        let pilot_sets: Vec<Vec<usize>> = (0..q_count).map(|q| reuse.pilot_set(q, f0)).collect();
        let mut reference_std = Vec::with_capacity(m * nb);
        let mut observation_std = Vec::with_capacity(m * q_count * nb);
        let mut denominator = Vec::with_capacity(m * q_count * nb);
        for loc in 0..m {
            for bs in 0..nb {
                reference_std.push((scn.link_gain(loc, 0, bs) / n).sqrt());
            }
            for (q, set) in pilot_sets.iter().enumerate() {
                for bs in 0..nb {
                    let total = noise + set.iter().map(|&c| scn.link_gain(loc, c, bs)).fold(T::zero(), |a, b| a + b);
                    denominator.push(total);
                    let residual = if q == reference_codebook { total - scn.link_gain(loc, 0, bs) } else { total };
                    observation_std.push((residual / n).sqrt());
                }
            }
        }
        Ok(Self {
            scn,
            cfg: *cfg,
            system_size,
            users_per_location: upl,
            block,
            reference_codebook,
            active,
            needed_bs,
            constraints,
            reference_std,
            observation_std,
            denominator,
        })
    }

    pub fn users(&self) -> usize {
        self.users_per_location * self.scn.multiplicity()
    }

    pub fn users_per_location(&self) -> usize {
        self.users_per_location
    }

    pub fn config(&self) -> &SchemeConfig<T> {
        &self.cfg
    }

    fn location_of(&self, user: usize) -> usize {
        user / self.users_per_location
    }

    /// Draws the reference channels and training observations.
    pub fn simulate_training(&self, seed: u64, trial: u64, attempt: u32) -> ChannelRealization<T> {
        let nb = self.scn.bs_count();
        let users = self.users();
        let q_count = self.scn.reuse().pilot_reuse();
        let block = self.block;
        let zero = Complex::new(T::zero(), T::zero());
        let mut reference = vec![zero; users * nb * block];
        let mut observations = vec![zero; q_count * nb * users * block];
        let qr = self.reference_codebook;
        for bs in (0..nb).filter(|&b| self.needed_bs[b]) {
            let mut ref_rng = rng::stream(seed, &[trial, attempt as u64, STREAM_REFERENCE, bs as u64]);
            for user in 0..users {
                let sd = self.reference_std[self.location_of(user) * nb + bs];
                let start = (user * nb + bs) * block;
                for z in &mut reference[start..start + block] {
                    *z = complex_normal(&mut ref_rng, sd);
                }
            }
            for q in 0..q_count {
                let mut obs_rng = rng::stream(seed, &[trial, attempt as u64, STREAM_OBSERVATION, bs as u64, q as u64]);
                for user in 0..users {
                    let loc = self.location_of(user);
                    let sd = self.observation_std[(loc * q_count + q) * nb + bs];
                    let start = ((q * nb + bs) * users + user) * block;
                    let ref_start = (user * nb + bs) * block;
                    for a in 0..block {
                        let w = complex_normal(&mut obs_rng, sd);
                        observations[start + a] = if q == qr { reference[ref_start + a] + w } else { w };
                    }
                }
            }
        }
        ChannelRealization {
            seed,
            trial,
            attempt,
            bs_count: nb,
            users,
            block,
            codebooks: q_count,
            reference,
            observations,
        }
    }

    /// MMSE estimate of user `user` of group `group` at cluster `cluster`,
    /// stacked over the cluster's BS blocks:
    /// G_{group,cluster} [noise + sum_P G]^-1 r.
    pub fn estimate(&self, real: &ChannelRealization<T>, group: usize, cluster: usize, user: usize) -> Vec<Complex<T>> {
        let q = self.scn.reuse().codebook(group);
        debug_assert!(q < real.codebooks);
        let loc = self.location_of(user);
        let nb = self.scn.bs_count();
        let q_count = self.scn.reuse().pilot_reuse();
        let mut out = Vec::with_capacity(self.scn.cluster_size() * self.block);
        for &bs in self.scn.clusters().members(cluster) {
            let w = self.scn.link_gain(loc, group, bs) / self.denominator[(loc * q_count + q) * nb + bs];
            out.extend(real.observation(q, bs, user).iter().map(|z| *z * w));
        }
        out
    }

    /// True channel of reference user `user` stacked over `cluster`'s BSs.
    pub fn reference_channel(&self, real: &ChannelRealization<T>, cluster: usize, user: usize) -> Vec<Complex<T>> {
        let mut out = Vec::with_capacity(self.scn.cluster_size() * self.block);
        for &bs in self.scn.clusters().members(cluster) {
            out.extend_from_slice(real.true_channel(user, bs));
        }
        out
    }

    /// Precoder of `cluster` (which must be active on the simulated subband).
    pub fn build_precoder(&self, real: &ChannelRealization<T>, cluster: usize) -> Result<Precoder<T>> {
        let users = self.users();
        let rows = self.scn.cluster_size() * self.block;
        let layout = self.scn.layout();
        let mut stacked = CMatrix::zeros(rows, 0);
        for user in 0..users {
            stacked.push_column(&self.estimate(real, cluster, cluster, user));
        }
        let mut masks = Vec::new();
        let reuse = self.scn.reuse();
        for user in 0..users {
            // Masked estimates sharing a codebook and a kept block are scalar
            // multiples of one observation; nulling one nulls all of them.
            let mut imposed: Vec<(usize, usize)> = Vec::new();
            for con in &self.constraints[self.location_of(user)] {
                let group = layout.add(cluster, layout.neg(con.offset));
                if !self.active.contains(&group) {
                    continue;
                }
                if let Some(keep) = con.kept_block {
                    let key = (reuse.codebook(group), keep);
                    if imposed.contains(&key) {
                        continue;
                    }
                    imposed.push(key);
                }
                let mut col = self.estimate(real, group, cluster, user);
                if let Some(keep) = con.kept_block {
                    for (b, chunk) in col.chunks_mut(self.block).enumerate() {
                        if b != keep {
                            chunk.fill(Complex::new(T::zero(), T::zero()));
                        }
                    }
                    masks.push((stacked.cols(), keep));
                }
                stacked.push_column(&col);
            }
        }
        let beams = if self.cfg.zf_order == 0 {
            let mut v = stacked.clone();
            normalize_columns(&mut v);
            v
        } else {
            normalized_pinv(&stacked, users, rank_tolerance()).map_err(|_| Error::Singular {
                seed: real.seed,
                trial: real.trial,
                cluster,
            })?
        };
        Ok(Precoder { cluster, zf_order: self.cfg.zf_order, beams, stacked, masks })
    }

    /// Precoders of every active cluster, redrawing the realization while
    /// any of them is rank deficient.
    pub fn draw(&self, seed: u64, trial: u64) -> Result<(ChannelRealization<T>, Vec<Precoder<T>>)> {
        let mut last = None;
        for attempt in 0..=MAX_RESAMPLES {
            let real = self.simulate_training(seed, trial, attempt);
            match self.active.iter().map(|&c| self.build_precoder(&real, c)).collect::<Result<Vec<_>>>() {
                Ok(p) => return Ok((real, p)),
                Err(e @ Error::Singular { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// Precoder of one cluster only, with the same resampling rule as `draw`.
    pub fn draw_cluster(&self, seed: u64, trial: u64, cluster: usize) -> Result<(ChannelRealization<T>, Precoder<T>)> {
        let mut last = None;
        for attempt in 0..=MAX_RESAMPLES {
            let real = self.simulate_training(seed, trial, attempt);
            match self.build_precoder(&real, cluster) {
                Ok(p) => return Ok((real, p)),
                Err(e @ Error::Singular { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// SINR and rate of every reference user in one trial.
    pub fn run_trial(&self, seed: u64, trial: u64) -> Result<TrialOutcome<T>> {
        let (real, precoders) = self.draw(seed, trial)?;
        let users = self.users();
        let load = self.cfg.load;
        let noise = T::one() / count::<T>(self.cfg.frequency_reuse);
        let mut sinr = Vec::with_capacity(users);
        for user in 0..users {
            let mut interference = CompensatedSum::new();
            let mut signal = T::zero();
            for prec in &precoders {
                let h = self.reference_channel(&real, prec.cluster, user);
                for j in 0..users {
                    let v = prec.beams.col(j);
                    if prec.cluster == 0 && j == user {
                        let est = prec.stacked.col(user);
                        let err: Vec<Complex<T>> = h.iter().zip(est).map(|(a, b)| *a - *b).collect();
                        signal = dot(v, est).norm_sqr() / load;
                        interference.add(dot(v, &err).norm_sqr() / load);
                    } else {
                        interference.add(dot(v, &h).norm_sqr() / load);
                    }
                }
            }
            sinr.push(signal / (noise + interference.value()));
        }
        let rate = sinr.iter().map(|s| s.ln_1p() / T::LN_2()).collect();
        Ok(TrialOutcome { trial, resamples: real.attempt, sinr, rate })
    }

    /// Averages `trials` independent trials; trials run in parallel and are
    /// reduced in trial order, so results do not depend on thread count.
    pub fn estimate_rates(&self, trials: usize, seed: u64, keep_records: bool) -> Result<RateEstimate<T>> {
        if trials == 0 {
            return Err(Error::Config("at least one trial is required".into()));
        }
        let outcomes: Vec<TrialOutcome<T>> =
            (0..trials as u64).into_par_iter().map(|t| self.run_trial(seed, t)).collect::<Result<_>>()?;
        let m = self.scn.multiplicity();
        let upl = self.users_per_location;
        let scale = T::one() / (count::<T>(self.cfg.frequency_reuse) * count::<T>(self.system_size));
        let group: Vec<T> = outcomes.iter().map(|o| o.rate.iter().copied().fold(T::zero(), |a, b| a + b) * scale).collect();
        let (group_rate, group_std_error) = mean_and_std_error(&group);
        let mut per_location_rate = Vec::with_capacity(m);
        let mut per_location_std_error = Vec::with_capacity(m);
        for loc in 0..m {
            let samples: Vec<T> = outcomes
                .iter()
                .map(|o| o.rate[loc * upl..(loc + 1) * upl].iter().copied().fold(T::zero(), |a, b| a + b) / count(upl))
                .collect();
            let (mean, se) = mean_and_std_error(&samples);
            per_location_rate.push(mean);
            per_location_std_error.push(se);
        }
        let resamples = outcomes.iter().map(|o| o.resamples as u64).sum();
        Ok(RateEstimate {
            group_rate,
            group_std_error,
            per_location_rate,
            per_location_std_error,
            trials,
            resamples,
            records: if keep_records { outcomes } else { Vec::new() },
        })
    }
}

fn complex_normal<T: Real>(rng: &mut rand_chacha::ChaCha8Rng, sd: T) -> Complex<T> {
    let scale = sd * lit::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(lit::<T>(re) * scale, lit::<T>(im) * scale)
}

/// Sample mean and standard error of the mean (zero for one sample).
pub fn mean_and_std_error<T: Real>(samples: &[T]) -> (T, T) {
    let n = count::<T>(samples.len());
    let mut s = CompensatedSum::new();
    for &x in samples {
        s.add(x);
    }
    let mean = s.value() / n;
    if samples.len() < 2 {
        return (mean, T::zero());
    }
    let mut v = CompensatedSum::new();
    for &x in samples {
        v.add((x - mean) * (x - mean));
    }
    (mean, (v.value() / (n - T::one()) / n).sqrt())
}

/// Draws one realization for `scn` under `cfg` at system size N.
pub fn simulate_training<T: Real>(
    scn: &Scenario<T>,
    cfg: &SchemeConfig<T>,
    system_size: usize,
    seed: u64,
) -> Result<ChannelRealization<T>> {
    Ok(Simulator::new(scn, cfg, system_size)?.simulate_training(seed, 0, 0))
}

/// Precoder of `cluster` for a realization drawn under the same inputs.
pub fn build_precoder<T: Real>(
    real: &ChannelRealization<T>,
    scn: &Scenario<T>,
    cfg: &SchemeConfig<T>,
    system_size: usize,
    cluster: usize,
) -> Result<Precoder<T>> {
    Simulator::new(scn, cfg, system_size)?.build_precoder(real, cluster)
}

/// Monte Carlo rate estimate of the reference group.
pub fn estimate_rates<T: Real>(
    scn: &Scenario<T>,
    cfg: &SchemeConfig<T>,
    system_size: usize,
    trials: usize,
    seed: u64,
) -> Result<RateEstimate<T>> {
    Simulator::new(scn, cfg, system_size)?.estimate_rates(trials, seed, false)
}
