//! Closed-form large-system group spectral efficiencies.
//!
//! Conventions: cluster 0 serves the reference group on subband 0 with
//! codebook 0; all rates are in bit/s/Hz (log base 2).

use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::geometry::{closest_bs_in_cluster, nearest_zf_clusters};
use crate::scalar::{compensated_sum, count, Real};

/// One member of the scheme family: frequency reuse F, cluster size C,
/// zero-forcing order J, pilot reuse Q, loading S and antenna factor M.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig<T> {
    pub frequency_reuse: usize,
    pub cluster_size: usize,
    pub zf_order: usize,
    pub pilot_reuse: usize,
    pub load: T,
    pub antennas: T,
}

/// Which beamformer construction a cluster ZF order corresponds to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZfCase {
    /// J = 0: normalized channel estimates.
    MatchedFilter,
    /// J = 1: zero-forcing within the serving cluster only.
    OwnCluster,
    /// J = Q: also nulls the nearest location of J - 1 neighbour clusters.
    PilotNeighbours,
    /// J = C(Q - 1) + 1: nulls all neighbour users, estimating each only at
    /// its nearest BS.
    MaskedNeighbours,
}

/// ZF orders admissible for a cluster size and pilot reuse.
pub fn permitted_zf_orders(cluster_size: usize, pilot_reuse: usize) -> Vec<usize> {
    let mut v = vec![0, 1];
    if pilot_reuse > 1 {
        v.push(pilot_reuse);
        let masked = cluster_size * (pilot_reuse - 1) + 1;
        if !v.contains(&masked) {
            v.push(masked);
        }
    }
    v
}

impl<T: Real> SchemeConfig<T> {
    pub fn new(frequency_reuse: usize, cluster_size: usize, zf_order: usize, pilot_reuse: usize, load: T, antennas: T) -> Self {
        Self { frequency_reuse, cluster_size, zf_order, pilot_reuse, load, antennas }
    }

    pub fn with_load(mut self, load: T) -> Self {
        self.load = load;
        self
    }

    pub fn with_antennas(mut self, antennas: T) -> Self {
        self.antennas = antennas;
        self
    }

    /// C * M, the antenna dimension per unit N of a cluster.
    pub fn cluster_antennas(&self) -> T {
        count::<T>(self.cluster_size) * self.antennas
    }

    pub fn zf_case(&self) -> ZfCase {
        let (c, q, j) = (self.cluster_size, self.pilot_reuse, self.zf_order);
        if j == 0 {
            ZfCase::MatchedFilter
        } else if j == 1 {
            ZfCase::OwnCluster
        } else if j == q {
            ZfCase::PilotNeighbours
        } else {
            debug_assert_eq!(j, c * (q - 1) + 1);
            ZfCase::MaskedNeighbours
        }
    }

    /// "(F,C,J)Q=q" label.
    pub fn label(&self) -> String {
        format!(
            "({},{},{})Q={}",
            self.frequency_reuse, self.cluster_size, self.zf_order, self.pilot_reuse
        )
    }

    /// Feasibility rules independent of any scenario.
    pub fn validate(&self) -> Result<()> {
        if self.frequency_reuse == 0 || self.cluster_size == 0 || self.pilot_reuse == 0 {
            return Err(Error::Config(format!("{}: reuse factors and cluster size must be positive", self.label())));
        }
        if !(self.antennas > T::zero()) || !self.antennas.is_finite() {
            return Err(Error::Config(format!("antenna factor must be positive, got {}", self.antennas)));
        }
        if !(self.load > T::zero()) || !self.load.is_finite() {
            return Err(Error::Config(format!("loading factor must be positive, got {}", self.load)));
        }
        if !permitted_zf_orders(self.cluster_size, self.pilot_reuse).contains(&self.zf_order) {
            let hint = if self.pilot_reuse == 1 && self.zf_order > 1 { " (J > 1 needs Q > 1)" } else { "" };
            return Err(Error::Config(format!(
                "{}: ZF order {} not in {:?}{hint}",
                self.label(),
                self.zf_order,
                permitted_zf_orders(self.cluster_size, self.pilot_reuse)
            )));
        }
        let cm = self.cluster_antennas();
        if self.zf_order == 0 {
            if self.load > cm {
                return Err(Error::Infeasible(format!("{}: S = {} exceeds C*M = {}", self.label(), self.load, cm)));
            }
        } else if !(count::<T>(self.zf_order) * self.load < cm) {
            return Err(Error::Infeasible(format!(
                "{}: J*S = {} must stay below C*M = {}",
                self.label(),
                count::<T>(self.zf_order) * self.load,
                cm
            )));
        }
        Ok(())
    }

    /// Validates and checks that `scn` was built for this F, C and Q.
    pub fn check_scenario(&self, scn: &Scenario<T>) -> Result<()> {
        self.validate()?;
        let reuse = scn.reuse();
        if reuse.frequency_reuse() != self.frequency_reuse
            || reuse.pilot_reuse() != self.pilot_reuse
            || scn.cluster_size() != self.cluster_size
        {
            return Err(Error::Config(format!(
                "{} does not match scenario (F={}, C={}, Q={})",
                self.label(),
                reuse.frequency_reuse(),
                scn.cluster_size(),
                reuse.pilot_reuse()
            )));
        }
        if let Some(u) = scn.system().users_per_location {
            if count::<T>(scn.multiplicity()) * u < self.cluster_antennas() {
                return Err(Error::Config(format!(
                    "m*U = {} is below C*M = {}",
                    count::<T>(scn.multiplicity()) * u,
                    self.cluster_antennas()
                )));
            }
        }
        Ok(())
    }
}

/// Per-location coefficients behind the SINR, kept for inspection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LocationTerms<T> {
    MatchedFilter { xi_bar: T, eta: T, zeta: T },
    SingleCellZf { xi: T, alpha: T, beta: T },
    ClusterZf { xi_bar: T, alpha_bar: T, beta_bar: T },
    MassiveLimit { desired: T, contamination: T },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeRate<T> {
    /// Group spectral efficiency of the bin.
    pub group_rate: T,
    /// Group rate after the training overhead factor max(1 - QS/L, 0).
    pub net_rate: T,
    pub per_location_sinr: Vec<T>,
    pub terms: Vec<LocationTerms<T>>,
    /// Set when an empty interference sum forced the SINR cap.
    pub sinr_capped: bool,
}

/// max(1 - QS/L, 0).
pub fn overhead_factor<T: Real>(pilot_reuse: usize, load: T, coherence: T) -> T {
    (T::one() - count::<T>(pilot_reuse) * load / coherence).max(T::zero())
}

/// Applies the training overhead to a group rate.
pub fn net_rate<T: Real>(mut rate: SchemeRate<T>, pilot_reuse: usize, load: T, coherence: T) -> SchemeRate<T> {
    rate.net_rate = overhead_factor(pilot_reuse, load, coherence) * rate.group_rate;
    rate
}

fn log2_1p<T: Real>(x: T) -> T {
    x.ln_1p() / T::LN_2()
}

fn assemble<T: Real>(scn: &Scenario<T>, cfg: &SchemeConfig<T>, sinr: Vec<T>, terms: Vec<LocationTerms<T>>, capped: bool) -> SchemeRate<T> {
    let scale = cfg.load / (count::<T>(scn.multiplicity()) * count::<T>(cfg.frequency_reuse));
    let group_rate = scale * compensated_sum(sinr.iter().map(|&s| log2_1p(s)));
    let rate = SchemeRate { group_rate, net_rate: T::zero(), per_location_sinr: sinr, terms, sinr_capped: capped };
    net_rate(rate, cfg.pilot_reuse, cfg.load, scn.system().coherence)
}

fn noise_floor<T: Real>(cfg: &SchemeConfig<T>) -> T {
    T::one() / count::<T>(cfg.frequency_reuse)
}

/// xi_bar_{0,0}(x), eta(x) and zeta(x) of the matched-filter rate.
pub fn matched_filter_terms<T: Real>(scn: &Scenario<T>, loc: usize, load: T) -> (T, T, T) {
    let cs = scn.cluster_size();
    let m = scn.multiplicity();
    let csf = count::<T>(cs);
    let active = scn.reuse().active_set(0);
    let pilots = scn.reuse().pilot_set(0, 0);

    // xi_bar_{c,c}(x') for every location and active cluster.
    let xi_bar = |l: usize, c: usize| scn.aggregate_coefficients(l, c, load).xi_bar;

    let mut eta = crate::scalar::CompensatedSum::new();
    for lp in 0..m {
        for &c in &active {
            let xb = xi_bar(lp, c);
            for b in 0..cs {
                let xi = scn.link_coefficients(lp, c, c, b, load).xi;
                eta.add(xi * scn.gain(loc, 0, c, b) / xb);
            }
        }
    }
    let eta = eta.value() / (count::<T>(m) * csf);

    let zeta = compensated_sum(pilots.iter().filter(|&&c| c != 0).map(|&c| {
        let inner = compensated_sum((0..cs).map(|b| {
            scn.gain(loc, 0, c, b) / scn.gain(loc, 0, 0, b) * scn.link_coefficients(loc, c, c, b, load).xi
        })) / csf;
        inner * inner / xi_bar(loc, c)
    }));
    (xi_bar(loc, 0), eta, zeta)
}

/// Matched-filter (J = 0) rate.
pub fn rate_lsubf<T: Real>(scn: &Scenario<T>, cfg: &SchemeConfig<T>) -> Result<SchemeRate<T>> {
    cfg.check_scenario(scn)?;
    if cfg.zf_order != 0 {
        return Err(Error::Config(format!("{}: matched-filter rate needs J = 0", cfg.label())));
    }
    let gain = cfg.cluster_antennas() / cfg.load;
    let mut sinr = Vec::with_capacity(scn.multiplicity());
    let mut terms = Vec::with_capacity(scn.multiplicity());
    for loc in 0..scn.multiplicity() {
        let (xi_bar, eta, zeta) = matched_filter_terms(scn, loc, cfg.load);
        sinr.push(gain * xi_bar / (noise_floor(cfg) + eta + gain * zeta));
        terms.push(LocationTerms::MatchedFilter { xi_bar, eta, zeta });
    }
    Ok(assemble(scn, cfg, sinr, terms, false))
}

/// xi_{0,0,0}(x), alpha(x) and beta(x) of the single-cell ZF rate.
pub fn single_cell_zf_terms<T: Real>(scn: &Scenario<T>, loc: usize, zf_order: usize, load: T) -> (T, T, T) {
    let x = scn.bin().locations()[loc];
    let neighbours = nearest_zf_clusters(scn.layout(), scn.clusters(), scn.reuse(), x, zf_order);
    let pilots = scn.reuse().pilot_set(0, 0);
    let estimated = |c: &usize| pilots.contains(c) || neighbours.contains(c);
    let alpha = compensated_sum(scn.reuse().active_set(0).iter().map(|&c| {
        if estimated(&c) {
            scn.link_coefficients(loc, 0, c, 0, load).sigma
        } else {
            scn.gain(loc, 0, c, 0)
        }
    }));
    let g0 = scn.gain(loc, 0, 0, 0);
    let beta = compensated_sum(pilots.iter().filter(|&&c| c != 0).map(|&c| {
        let r = scn.gain(loc, 0, c, 0) / g0;
        r * r * scn.link_coefficients(loc, c, c, 0, load).xi
    }));
    (scn.link_coefficients(loc, 0, 0, 0, load).xi, alpha, beta)
}

/// Single-cell ZF (C = 1, J >= 1) rate.
pub fn rate_lzfbf_single<T: Real>(scn: &Scenario<T>, cfg: &SchemeConfig<T>) -> Result<SchemeRate<T>> {
    cfg.check_scenario(scn)?;
    if cfg.cluster_size != 1 || cfg.zf_order == 0 {
        return Err(Error::Config(format!("{}: single-cell ZF rate needs C = 1 and J >= 1", cfg.label())));
    }
    let gain = (cfg.antennas - count::<T>(cfg.zf_order) * cfg.load) / cfg.load;
    let mut sinr = Vec::with_capacity(scn.multiplicity());
    let mut terms = Vec::with_capacity(scn.multiplicity());
    for loc in 0..scn.multiplicity() {
        let (xi, alpha, beta) = single_cell_zf_terms(scn, loc, cfg.zf_order, cfg.load);
        sinr.push(gain * xi / (noise_floor(cfg) + alpha + gain * beta));
        terms.push(LocationTerms::SingleCellZf { xi, alpha, beta });
    }
    Ok(assemble(scn, cfg, sinr, terms, false))
}

/// xi_bar_{0,0}(x), alpha_bar(x) and beta_bar(x) of the cluster ZF rate.
pub fn cluster_zf_terms<T: Real>(scn: &Scenario<T>, loc: usize, cfg: &SchemeConfig<T>) -> (T, T, T) {
    let load = cfg.load;
    let cs = scn.cluster_size();
    let csf = count::<T>(cs);
    let x = scn.bin().locations()[loc];
    let neighbours = nearest_zf_clusters(scn.layout(), scn.clusters(), scn.reuse(), x, cfg.zf_order);
    let agg = |c: usize| scn.aggregate_coefficients(loc, c, load);

    let mut alpha = crate::scalar::CompensatedSum::new();
    alpha.add(agg(0).sigma_bar);
    for c in scn.reuse().active_set(0) {
        if c == 0 {
            continue;
        }
        if !neighbours.contains(&c) {
            alpha.add(agg(c).g_bar);
        } else if cfg.zf_case() == ZfCase::MaskedNeighbours {
            let near = closest_bs_in_cluster(scn.layout(), scn.clusters(), x, c);
            let mut t = scn.link_coefficients(loc, 0, c, near, load).sigma;
            for b in (0..cs).filter(|&b| b != near) {
                t = t + scn.gain(loc, 0, c, b);
            }
            alpha.add(t / csf);
        } else {
            alpha.add(agg(c).sigma_bar);
        }
    }

    let beta = compensated_sum(scn.reuse().pilot_set(0, 0).iter().filter(|&&c| c != 0).map(|&c| {
        compensated_sum((0..cs).map(|b| {
            let r = scn.gain(loc, 0, c, b) / scn.gain(loc, 0, 0, b);
            r * r * scn.link_coefficients(loc, c, c, b, load).xi
        })) / csf
    }));
    (agg(0).xi_bar, alpha.value(), beta)
}

/// Cluster ZF (C > 1, J >= 1) rate: signal scaled by (CM - JS)/S while the
/// contamination bound keeps CM/S.
pub fn rate_lzfbf_cluster<T: Real>(scn: &Scenario<T>, cfg: &SchemeConfig<T>) -> Result<SchemeRate<T>> {
    cfg.check_scenario(scn)?;
    if cfg.cluster_size < 2 || cfg.zf_order == 0 {
        return Err(Error::Config(format!("{}: cluster ZF rate needs C > 1 and J >= 1", cfg.label())));
    }
    let cm = cfg.cluster_antennas();
    let signal_gain = (cm - count::<T>(cfg.zf_order) * cfg.load) / cfg.load;
    let bound_gain = cm / cfg.load;
    let mut sinr = Vec::with_capacity(scn.multiplicity());
    let mut terms = Vec::with_capacity(scn.multiplicity());
    for loc in 0..scn.multiplicity() {
        let (xi_bar, alpha_bar, beta_bar) = cluster_zf_terms(scn, loc, cfg);
        sinr.push(signal_gain * xi_bar / (noise_floor(cfg) + alpha_bar + bound_gain * beta_bar));
        terms.push(LocationTerms::ClusterZf { xi_bar, alpha_bar, beta_bar });
    }
    Ok(assemble(scn, cfg, sinr, terms, false))
}

/// M -> infinity limit for C = 1, Q = 1: only pilot contamination remains.
/// An empty contamination set yields the configured SINR cap and sets
/// `sinr_capped`.
pub fn rate_massive_limit<T: Real>(scn: &Scenario<T>, cfg: &SchemeConfig<T>) -> Result<SchemeRate<T>> {
    if cfg.cluster_size != 1 || cfg.pilot_reuse != 1 {
        return Err(Error::Config(format!("{}: massive-MIMO limit needs C = 1 and Q = 1", cfg.label())));
    }
    if scn.cluster_size() != 1 || scn.reuse().pilot_reuse() != 1 || scn.reuse().frequency_reuse() != cfg.frequency_reuse {
        return Err(Error::Config(format!("{} does not match scenario", cfg.label())));
    }
    let pilots = scn.reuse().pilot_set(0, 0);
    let cap = scn.system().sinr_cap;
    let mut capped = false;
    let mut sinr = Vec::with_capacity(scn.multiplicity());
    let mut terms = Vec::with_capacity(scn.multiplicity());
    for loc in 0..scn.multiplicity() {
        let g0 = scn.gain(loc, 0, 0, 0);
        let desired = g0 * g0;
        let contamination = compensated_sum(pilots.iter().filter(|&&c| c != 0).map(|&c| {
            let g = scn.gain(loc, 0, c, 0);
            g * g
        }));
        let s = if contamination > T::zero() {
            desired / contamination
        } else {
            capped = true;
            cap
        };
        sinr.push(s);
        terms.push(LocationTerms::MassiveLimit { desired, contamination });
    }
    Ok(assemble(scn, cfg, sinr, terms, capped))
}

/// Dispatches to the closed form matching `cfg`.
pub fn scheme_rate<T: Real>(scn: &Scenario<T>, cfg: &SchemeConfig<T>) -> Result<SchemeRate<T>> {
    if cfg.zf_order == 0 {
        rate_lsubf(scn, cfg)
    } else if cfg.cluster_size == 1 {
        rate_lzfbf_single(scn, cfg)
    } else {
        rate_lzfbf_cluster(scn, cfg)
    }
}
