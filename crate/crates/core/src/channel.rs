//! Pathloss, scenario assembly and uplink-training (MMSE) coefficients.

use crate::error::{Error, Result};
use crate::geometry::{BinDescriptor, BinPattern, ClusterPattern, ClusterTemplate, Layout, Point, ReuseAssignment};
use crate::scalar::{compensated_sum, count, lit, Real};

/// g(d) = G0 / (1 + (d / delta)^alpha).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pathloss<T> {
    pub reference_gain: T,
    pub exponent: T,
    pub breakpoint: T,
}

impl<T: Real> Pathloss<T> {
    pub fn new(reference_gain: T, exponent: T, breakpoint: T) -> Result<Self> {
        for (name, v) in [("G0", reference_gain), ("exponent", exponent), ("breakpoint", breakpoint)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("pathloss {name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { reference_gain, exponent, breakpoint })
    }

    /// Ring model: G0 = 1e6, alpha = 3.76, delta = 0.05 cell spacings.
    pub fn ring_default() -> Self {
        Self { reference_gain: lit(1e6), exponent: lit(3.76), breakpoint: lit(0.05) }
    }

    /// Hexagonal model: G0 = 1e6, alpha = 3.8, delta = 0.1 km.
    pub fn hex_default() -> Self {
        Self { reference_gain: lit(1e6), exponent: lit(3.8), breakpoint: lit(0.1) }
    }

    pub fn gain(&self, distance: T) -> T {
        self.reference_gain / (T::one() + (distance / self.breakpoint).powf(self.exponent))
    }
}

/// System-wide parameters not tied to a particular scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams<T> {
    /// Uplink training power per user (linear).
    pub uplink_power: T,
    /// Coherence block factor L.
    pub coherence: T,
    /// Users-per-location factor U, if the DoF bound m*U >= C*M is to be checked.
    pub users_per_location: Option<T>,
    /// Cap applied to the SINR when an interference sum is empty.
    pub sinr_cap: T,
}

impl<T: Real> Default for SystemParams<T> {
    fn default() -> Self {
        Self { uplink_power: lit(10.0), coherence: lit(40.0), users_per_location: None, sinr_cap: lit(1e6) }
    }
}

impl<T: Real> SystemParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.uplink_power > T::zero()) {
            return Err(Error::Config(format!("uplink power must be positive, got {}", self.uplink_power)));
        }
        if !(self.coherence > T::zero()) {
            return Err(Error::Config(format!("coherence factor L must be positive, got {}", self.coherence)));
        }
        if let Some(u) = self.users_per_location {
            if !(u > T::zero()) {
                return Err(Error::Config(format!("users-per-location factor must be positive, got {u}")));
            }
        }
        if !(self.sinr_cap > T::zero()) {
            return Err(Error::Config("SINR cap must be positive".into()));
        }
        Ok(())
    }
}

/// gamma, sigma and xi for one (location, source group, serving cluster, BS) link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingCoefficients<T> {
    pub gain: T,
    pub gamma: T,
    pub sigma: T,
    pub xi: T,
}

impl<T: Real> TrainingCoefficients<T> {
    /// MMSE statistics for a link of gain `gain` observed under `noise` plus
    /// same-pilot `contamination`.
    pub fn from_link(gain: T, noise: T, contamination: T) -> Self {
        let gamma = gain / (noise + contamination);
        let sigma = gain / (T::one() + gamma);
        Self { gain, gamma, sigma, xi: gain - sigma }
    }
}

/// Cluster averages over the BSs of cluster c.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateCoefficients<T> {
    /// Average xi of cluster c's own users at cluster c.
    pub xi_bar: T,
    /// Average gain from the reference location to cluster c.
    pub g_bar: T,
    /// Average sigma of the reference user at cluster c.
    pub sigma_bar: T,
}

/// Geometry, reuse, pathloss and system parameters for one bin, with the
/// gain and same-pilot contamination tables precomputed. Everything here is
/// independent of the loading factor S and antenna factor M.
#[derive(Clone, Debug)]
pub struct Scenario<T> {
    layout: Layout<T>,
    clusters: ClusterPattern,
    bin: BinPattern<T>,
    reuse: ReuseAssignment,
    system: SystemParams<T>,
    // gains[i * B + b]: gain from location i of the reference group to BS b.
    gains: Vec<T>,
    // contamination[((i * B + src) * B + serve) * C + b]
    contamination: Vec<T>,
}

impl<T: Real> Scenario<T> {
    pub fn new(
        layout: Layout<T>,
        clusters: ClusterPattern,
        bin: BinPattern<T>,
        reuse: ReuseAssignment,
        pathloss: Pathloss<T>,
        system: SystemParams<T>,
    ) -> Result<Self> {
        let nb = layout.bs_count();
        let mut gains = Vec::with_capacity(bin.multiplicity() * nb);
        for x in bin.locations() {
            for b in 0..nb {
                gains.push(pathloss.gain(layout.mod_distance(*x, layout.site_point(b))));
            }
        }
        Self::assemble(layout, clusters, bin, reuse, gains, system)
    }

    /// Scenario for the bin generated by `representative` under `template`,
    /// with the cluster translate chosen to suit the representative.
    pub fn for_bin(
        layout: &Layout<T>,
        template: ClusterTemplate,
        representative: Point<T>,
        frequency_reuse: usize,
        pilot_reuse: usize,
        pathloss: Pathloss<T>,
        system: SystemParams<T>,
    ) -> Result<Self> {
        let clusters = ClusterPattern::for_template(layout, template, representative)?;
        let bin = BinPattern::new(layout, &clusters, &BinDescriptor::Orbit(representative))?;
        let reuse = ReuseAssignment::new(layout, frequency_reuse, pilot_reuse)?;
        Self::new(layout.clone(), clusters, bin, reuse, pathloss, system)
    }

    /// Scenario with an explicit gain table, `gains[i][b]` being the gain
    /// from location i to BS b. Used for hand-checkable configurations.
    pub fn from_gains(
        layout: Layout<T>,
        clusters: ClusterPattern,
        bin: BinPattern<T>,
        reuse: ReuseAssignment,
        gains: &[Vec<T>],
        system: SystemParams<T>,
    ) -> Result<Self> {
        let nb = layout.bs_count();
        if gains.len() != bin.multiplicity() || gains.iter().any(|row| row.len() != nb) {
            return Err(Error::Config(format!(
                "gain table must be {} x {}",
                bin.multiplicity(),
                nb
            )));
        }
        if gains.iter().flatten().any(|g| !(*g > T::zero()) || !g.is_finite()) {
            return Err(Error::Config("gains must be positive and finite".into()));
        }
        let flat = gains.iter().flatten().copied().collect();
        Self::assemble(layout, clusters, bin, reuse, flat, system)
    }

    fn assemble(
        layout: Layout<T>,
        clusters: ClusterPattern,
        bin: BinPattern<T>,
        reuse: ReuseAssignment,
        gains: Vec<T>,
        system: SystemParams<T>,
    ) -> Result<Self> {
        system.validate()?;
        let nb = layout.bs_count();
        if clusters.cluster_count() != nb || reuse.cluster_count() != nb {
            return Err(Error::Config("clusters and reuse must cover every BS translate".into()));
        }
        let mut scn = Self { layout, clusters, bin, reuse, system, gains, contamination: Vec::new() };
        scn.contamination = scn.build_contamination();
        Ok(scn)
    }

    fn build_contamination(&self) -> Vec<T> {
        let nb = self.bs_count();
        let cs = self.cluster_size();
        let mut table = Vec::with_capacity(self.multiplicity() * nb * nb * cs);
        let peers: Vec<Vec<usize>> = (0..nb).map(|c| self.reuse.pilot_peers(c)).collect();
        for i in 0..self.multiplicity() {
            for src in 0..nb {
                for serve in 0..nb {
                    for &bs in self.clusters.members(serve) {
                        table.push(compensated_sum(
                            peers[src].iter().filter(|&&c| c != src).map(|&c| self.link_gain(i, c, bs)),
                        ));
                    }
                }
            }
        }
        table
    }

    pub fn layout(&self) -> &Layout<T> {
        &self.layout
    }

    pub fn clusters(&self) -> &ClusterPattern {
        &self.clusters
    }

    pub fn bin(&self) -> &BinPattern<T> {
        &self.bin
    }

    pub fn reuse(&self) -> &ReuseAssignment {
        &self.reuse
    }

    pub fn system(&self) -> &SystemParams<T> {
        &self.system
    }

    pub fn bs_count(&self) -> usize {
        self.layout.bs_count()
    }

    pub fn cluster_size(&self) -> usize {
        self.clusters.size()
    }

    pub fn multiplicity(&self) -> usize {
        self.bin.multiplicity()
    }

    /// Gain from location `loc` of group `src` to BS `bs`:
    /// g(x + src, bs) = g(x, bs - src).
    #[inline]
    pub fn link_gain(&self, loc: usize, src: usize, bs: usize) -> T {
        let nb = self.bs_count();
        self.gains[loc * nb + self.layout.add(bs, self.layout.neg(src))]
    }

    /// g(x + src, b + serve) with `b` a position in the root cluster.
    #[inline]
    pub fn gain(&self, loc: usize, src: usize, serve: usize, b: usize) -> T {
        self.link_gain(loc, src, self.clusters.members(serve)[b])
    }

    /// Same-pilot interference power at BS `b` of `serve` for users of `src`:
    /// the sum of g(x + c'', b + serve) over the other clusters sharing
    /// `src`'s subband and codebook.
    #[inline]
    pub fn contamination(&self, loc: usize, src: usize, serve: usize, b: usize) -> T {
        let nb = self.bs_count();
        let cs = self.cluster_size();
        self.contamination[((loc * nb + src) * nb + serve) * cs + b]
    }

    /// Effective training noise (alpha_ul * Q * S)^-1.
    pub fn training_noise(&self, load: T) -> T {
        T::one() / (self.system.uplink_power * count::<T>(self.reuse.pilot_reuse()) * load)
    }

    /// Coefficients of the estimate that cluster `serve` forms for users of
    /// group `src`, from the observation on `src`'s own codebook.
    pub fn link_coefficients(&self, loc: usize, src: usize, serve: usize, b: usize, load: T) -> TrainingCoefficients<T> {
        TrainingCoefficients::from_link(
            self.gain(loc, src, serve, b),
            self.training_noise(load),
            self.contamination(loc, src, serve, b),
        )
    }

    /// As [`Self::link_coefficients`] but only for groups that share the
    /// serving cluster's codebook, where the coefficients describe the
    /// contaminated estimate of the serving cluster's own observation.
    pub fn training_coefficients(
        &self,
        loc: usize,
        src: usize,
        serve: usize,
        b: usize,
        load: T,
    ) -> Result<TrainingCoefficients<T>> {
        if !self.reuse.pilot_peers(serve).contains(&src) {
            return Err(Error::Domain(format!(
                "group {src} does not share the training codebook of cluster {serve}"
            )));
        }
        if b >= self.cluster_size() || loc >= self.multiplicity() {
            return Err(Error::Domain(format!("BS offset {b} or location {loc} out of range")));
        }
        Ok(self.link_coefficients(loc, src, serve, b, load))
    }

    /// xi_bar_{c,c}(x), g_bar_{0,c}(x) and sigma_bar_{0,c}(x).
    pub fn aggregate_coefficients(&self, loc: usize, c: usize, load: T) -> AggregateCoefficients<T> {
        let cs = self.cluster_size();
        let n = count::<T>(cs);
        let xi_bar = compensated_sum((0..cs).map(|b| self.link_coefficients(loc, c, c, b, load).xi)) / n;
        let g_bar = compensated_sum((0..cs).map(|b| self.gain(loc, 0, c, b))) / n;
        let sigma_bar = compensated_sum((0..cs).map(|b| self.link_coefficients(loc, 0, c, b, load).sigma)) / n;
        AggregateCoefficients { xi_bar, g_bar, sigma_bar }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BinDescriptor;

    fn toy_ring(q: usize) -> Scenario<f64> {
        let layout = Layout::line(4, 2).unwrap();
        let clusters = ClusterPattern::new(&layout, &[[0, 0]]).unwrap();
        let bin = BinPattern::new(&layout, &clusters, &BinDescriptor::Explicit(vec![[0.0, 0.0]])).unwrap();
        let reuse = ReuseAssignment::new(&layout, 1, q).unwrap();
        let system = SystemParams { uplink_power: 1.0, ..SystemParams::default() };
        Scenario::from_gains(layout, clusters, bin, reuse, &[vec![1.0, 0.1, 0.01, 0.1]], system).unwrap()
    }

    #[test]
    fn pathloss_reference_points() {
        let p = Pathloss::<f64>::ring_default();
        assert_eq!(p.gain(0.0), 1e6);
        assert!((p.gain(0.05) - 5e5).abs() < 1e-6);
        let h = Pathloss::<f64>::hex_default();
        assert!((h.gain(1.6) - 1e6 / (1.0 + 16f64.powf(3.8))).abs() < 1e-12);
    }

    #[test]
    fn link_gain_uses_translation() {
        let s = toy_ring(1);
        // User of group 1 at BS 2: distance one cell, gain 0.1.
        assert_eq!(s.link_gain(0, 1, 2), 0.1);
        assert_eq!(s.link_gain(0, 3, 3), 1.0);
        assert_eq!(s.link_gain(0, 1, 3), 0.01);
    }

    #[test]
    fn toy_ring_coefficients_by_hand() {
        let s = toy_ring(1);
        let t = s.training_coefficients(0, 0, 0, 0, 1.0).unwrap();
        // Noise 1, contamination 0.1 + 0.01 + 0.1.
        let gamma = 1.0 / 1.21;
        assert!((t.gamma - gamma).abs() < 1e-15);
        assert!((t.sigma - 1.0 / (1.0 + gamma)).abs() < 1e-15);
        assert!((t.xi - 1.0 / 2.21).abs() < 1e-15);
    }

    #[test]
    fn strict_coefficients_reject_foreign_codebook() {
        let s = toy_ring(2);
        assert!(matches!(s.training_coefficients(0, 1, 0, 0, 1.0), Err(Error::Domain(_))));
        assert!(s.training_coefficients(0, 2, 0, 0, 1.0).is_ok());
    }
}
