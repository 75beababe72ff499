//! Closed-form rates against independent re-derivations from raw gains.

use netmimo::asymptotic::{
    rate_lsubf, rate_lzfbf_cluster, rate_lzfbf_single, rate_massive_limit, scheme_rate, SchemeConfig,
};
use netmimo::channel::{Pathloss, Scenario, SystemParams, TrainingCoefficients};
use netmimo::geometry::{cell_representatives, BinDescriptor, BinPattern, ClusterPattern, Layout, ReuseAssignment};
use proptest::prelude::*;

fn log2_1p(x: f64) -> f64 {
    (1.0 + x).log2()
}

/// Single-location ring of four BSs with gains g(x, b) = table[b].
fn toy_ring(table: [f64; 4], q: usize, uplink_power: f64) -> Scenario<f64> {
    let layout = Layout::line(4, 2).unwrap();
    let clusters = ClusterPattern::new(&layout, &[[0, 0]]).unwrap();
    let bin = BinPattern::new(&layout, &clusters, &BinDescriptor::Explicit(vec![[0.0, 0.0]])).unwrap();
    let reuse = ReuseAssignment::new(&layout, 1, q).unwrap();
    let system = SystemParams { uplink_power, ..SystemParams::default() };
    Scenario::from_gains(layout, clusters, bin, reuse, &[table.to_vec()], system).unwrap()
}

/// Hand evaluation of the toy ring: user of group c' at BS c sees
/// table[(c - c') mod 4]; codebook of cluster c is c mod Q.
struct ToyOracle {
    table: [f64; 4],
    q: usize,
    noise: f64,
}

impl ToyOracle {
    fn g(&self, src: usize, bs: usize) -> f64 {
        self.table[(bs + 4 - src) % 4]
    }

    fn peers(&self, c: usize) -> Vec<usize> {
        (0..4).filter(|d| d % self.q == c % self.q).collect()
    }

    /// (sigma, xi) for the estimate at BS `at` of the user of group `src`.
    fn coeffs(&self, src: usize, at: usize) -> (f64, f64) {
        let g = self.g(src, at);
        let other: f64 = self.peers(src).iter().filter(|&&c| c != src).map(|&c| self.g(c, at)).sum();
        let gamma = g / (self.noise + other);
        (g / (1.0 + gamma), g / (1.0 + 1.0 / gamma))
    }

    fn matched_filter_sinr(&self, m: f64, s: f64) -> f64 {
        let xi0 = self.coeffs(0, 0).1;
        let eta: f64 = (0..4).map(|c| self.g(0, c)).sum();
        let zeta: f64 = self
            .peers(0)
            .iter()
            .filter(|&&c| c != 0)
            .map(|&c| {
                let xi = self.coeffs(c, c).1;
                (self.g(0, c) / self.g(0, 0) * xi).powi(2) / xi
            })
            .sum();
        (m / s) * xi0 / (1.0 + eta + (m / s) * zeta)
    }

    fn zf_sinr(&self, m: f64, s: f64) -> f64 {
        let xi0 = self.coeffs(0, 0).1;
        let p = self.peers(0);
        let alpha: f64 = (0..4).map(|c| if p.contains(&c) { self.coeffs(0, c).0 } else { self.g(0, c) }).sum();
        let beta: f64 = p
            .iter()
            .filter(|&&c| c != 0)
            .map(|&c| (self.g(0, c) / self.g(0, 0)).powi(2) * self.coeffs(c, c).1)
            .sum();
        let gain = (m - s) / s;
        gain * xi0 / (1.0 + alpha + gain * beta)
    }
}

#[test]
fn toy_ring_matched_filter_matches_hand_evaluation() {
    let table = [1.0, 0.1, 0.01, 0.1];
    for q in [1, 2] {
        for (m, s) in [(2.0, 1.0), (8.0, 3.0), (30.0, 12.5)] {
            let scn = toy_ring(table, q, 1.0);
            let cfg = SchemeConfig::new(1, 1, 0, q, s, m);
            let got = rate_lsubf(&scn, &cfg).unwrap();
            let oracle = ToyOracle { table, q, noise: 1.0 / (q as f64 * s) };
            let want = s * log2_1p(oracle.matched_filter_sinr(m, s));
            assert!((got.group_rate - want).abs() <= 1e-12 * want, "Q={q} M={m} S={s}: {} vs {want}", got.group_rate);
        }
    }
}

#[test]
fn toy_ring_zero_forcing_matches_hand_evaluation() {
    let table = [1.0, 0.1, 0.01, 0.1];
    for q in [1, 2] {
        for (m, s) in [(2.0, 1.0), (8.0, 3.0), (30.0, 12.5)] {
            let scn = toy_ring(table, q, 1.0);
            let cfg = SchemeConfig::new(1, 1, 1, q, s, m);
            let got = rate_lzfbf_single(&scn, &cfg).unwrap();
            let oracle = ToyOracle { table, q, noise: 1.0 / (q as f64 * s) };
            let want = s * log2_1p(oracle.zf_sinr(m, s));
            assert!((got.group_rate - want).abs() <= 1e-12 * want, "Q={q}: {} vs {want}", got.group_rate);
        }
    }
}

#[test]
fn toy_ring_training_coefficients() {
    // gamma = 1 / (1 + 0.21) with noise 1 (alpha_ul = Q = S = 1).
    let scn = toy_ring([1.0, 0.1, 0.01, 0.1], 1, 1.0);
    let t = scn.training_coefficients(0, 0, 0, 0, 1.0).unwrap();
    assert!((t.gamma - 1.0 / 1.21).abs() < 1e-15);
    assert!((t.xi - 1.0 / 2.21).abs() < 1e-15);
    assert!((t.sigma - 1.21 / 2.21).abs() < 1e-15);
}

/// Pair clusters {c, c+1} on a ring of eight BSs, bin {0.25, 0.75}.
struct PairOracle {
    pathloss: Pathloss<f64>,
    locs: [f64; 2],
    noise: f64,
}

impl PairOracle {
    fn dist(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(8.0);
        d.min(8.0 - d)
    }

    /// g(x_i + src, bs).
    fn g(&self, i: usize, src: i64, bs: i64) -> f64 {
        self.pathloss.gain(Self::dist(self.locs[i] + src as f64, bs as f64))
    }

    fn peers(c: i64) -> Vec<i64> {
        (0..8).filter(|d| (d - c).rem_euclid(2) == 0).collect()
    }

    /// (sigma, xi) of group `src` at BS offset b of cluster `serve`.
    fn coeffs(&self, i: usize, src: i64, serve: i64, b: i64) -> (f64, f64) {
        let bs = serve + b;
        let g = self.g(i, src, bs);
        let other: f64 = Self::peers(src)
            .into_iter()
            .filter(|&c| (c - src).rem_euclid(8) != 0)
            .map(|c| self.g(i, c, bs))
            .sum();
        let gamma = g / (self.noise + other);
        (g / (1.0 + gamma), g / (1.0 + 1.0 / gamma))
    }

    /// Cluster ZF SINR at location i with neighbour set `e` and, in the
    /// masked case, the kept BS offset of each neighbour.
    fn sinr(&self, i: usize, m: f64, s: f64, j: f64, e: &[i64], kept: Option<&[i64]>) -> f64 {
        let xi_bar0 = (self.coeffs(i, 0, 0, 0).1 + self.coeffs(i, 0, 0, 1).1) / 2.0;
        let sigma_bar = |c: i64| (self.coeffs(i, 0, c, 0).0 + self.coeffs(i, 0, c, 1).0) / 2.0;
        let g_bar = |c: i64| (self.g(i, 0, c) + self.g(i, 0, c + 1)) / 2.0;
        let mut alpha = sigma_bar(0);
        for c in 1..8i64 {
            let signed = if c > 4 { c - 8 } else { c };
            match e.iter().position(|&n| n == signed) {
                None => alpha += g_bar(c),
                Some(k) => match kept {
                    None => alpha += sigma_bar(c),
                    Some(bk) => {
                        let b = bk[k];
                        let other = 1 - b;
                        alpha += (self.coeffs(i, 0, c, b).0 + self.g(i, 0, c + other)) / 2.0;
                    }
                },
            }
        }
        let beta: f64 = Self::peers(0)
            .into_iter()
            .filter(|&c| c != 0)
            .map(|c| {
                (0..2)
                    .map(|b| (self.g(i, 0, c + b) / self.g(i, 0, b)).powi(2) * self.coeffs(i, c, c, b).1)
                    .sum::<f64>()
                    / 2.0
            })
            .sum();
        ((2.0 * m - j * s) / s) * xi_bar0 / (1.0 + alpha + (2.0 * m / s) * beta)
    }
}

#[test]
fn pair_cluster_cases_match_independent_evaluation() {
    let layout = Layout::line(8, 20).unwrap();
    let clusters = ClusterPattern::new(&layout, &[[0, 0], [1, 0]]).unwrap();
    let bin = BinPattern::new(&layout, &clusters, &BinDescriptor::Orbit([0.25, 0.0])).unwrap();
    let reuse = ReuseAssignment::new(&layout, 1, 2).unwrap();
    let pathloss = Pathloss::ring_default();
    let scn = Scenario::new(layout, clusters, bin, reuse, pathloss, SystemParams::default()).unwrap();
    let mut locs: Vec<f64> = scn.bin().locations().iter().map(|p| p[0]).collect();
    locs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(locs, vec![0.25, 0.75]);
    let (m, s) = (20.0, 6.0);
    let oracle = PairOracle { pathloss, locs: [0.25, 0.75], noise: 1.0 / (10.0 * 2.0 * s) };
    // Neighbour clusters by centroid distance: 0.25 -> [-1, +1], 0.75 -> [+1, -1].
    // Nearest BS of cluster -1 = {-1, 0} to 0.25 is offset 1; of cluster +1 = {1, 2} is offset 0.
    let neighbours = |x: f64| if x < 0.5 { vec![-1i64, 1] } else { vec![1i64, -1] };
    let kept = |x: f64| if x < 0.5 { vec![1i64, 0] } else { vec![0i64, 1] };
    for (j, masked) in [(1usize, false), (2, false), (3, true)] {
        let cfg = SchemeConfig::new(1, 2, j, 2, s, m);
        let got = rate_lzfbf_cluster(&scn, &cfg).unwrap();
        let mut want = 0.0;
        for (k, p) in scn.bin().locations().iter().enumerate() {
            let x = p[0];
            let e: Vec<i64> = neighbours(x).into_iter().take(j - 1).collect();
            let kb = kept(x);
            let sinr = oracle.sinr(k, m, s, j as f64, &e, masked.then_some(&kb[..]));
            assert!(
                (got.per_location_sinr[k] - sinr).abs() <= 1e-11 * sinr,
                "J={j} x={x}: {} vs {sinr}",
                got.per_location_sinr[k]
            );
            want += log2_1p(sinr);
        }
        want *= s / 2.0;
        assert!((got.group_rate - want).abs() <= 1e-11 * want);
    }
}

#[test]
fn massive_limit_reached_by_matched_filter_at_huge_arrays() {
    // Convergence of the matched filter is slow near the serving BS, where
    // eta ~ g(x, 0) must be dwarfed by (M/S) zeta; at M = 1e14 every bin is there.
    let layout = Layout::line(24, 20).unwrap();
    for rep in cell_representatives(&layout) {
        let scn = Scenario::for_bin(
            &layout,
            netmimo::geometry::ClusterTemplate::Single,
            rep,
            1,
            1,
            Pathloss::ring_default(),
            SystemParams::default(),
        )
        .unwrap();
        let limit: f64 = rate_massive_limit(&scn, &SchemeConfig::new(1, 1, 0, 1, 1.0, 1.0)).unwrap().group_rate;
        let mf = rate_lsubf(&scn, &SchemeConfig::new(1, 1, 0, 1, 1.0, 1e14)).unwrap().group_rate;
        assert!(((mf - limit) / limit).abs() < 1e-5, "x={}: {mf} vs {limit}", rep[0]);
    }
}

#[test]
fn massive_limit_caps_empty_contamination() {
    // Q = 4 on four BSs leaves no same-pilot cluster.
    let scn = toy_ring([1.0, 0.1, 0.01, 0.1], 4, 1.0);
    let r = rate_massive_limit(&scn, &SchemeConfig::new(1, 1, 0, 1, 1.0, 1.0));
    assert!(r.is_err(), "massive limit is defined for Q = 1 only");
    let scn = Scenario::from_gains(
        Layout::line(2, 2).unwrap(),
        ClusterPattern::new(&Layout::<f64>::line(2, 2).unwrap(), &[[0, 0]]).unwrap(),
        BinPattern::new(
            &Layout::line(2, 2).unwrap(),
            &ClusterPattern::new(&Layout::<f64>::line(2, 2).unwrap(), &[[0, 0]]).unwrap(),
            &BinDescriptor::Explicit(vec![[0.0, 0.0]]),
        )
        .unwrap(),
        ReuseAssignment::new(&Layout::<f64>::line(2, 2).unwrap(), 2, 1).unwrap(),
        &[vec![1.0, 0.5]],
        SystemParams::default(),
    )
    .unwrap();
    let r = rate_massive_limit(&scn, &SchemeConfig::new(2, 1, 0, 1, 1.0, 1.0)).unwrap();
    assert!(r.sinr_capped);
    assert_eq!(r.per_location_sinr, vec![1e6]);
}

#[test]
fn infeasible_loads_are_rejected() {
    let scn = toy_ring([1.0, 0.1, 0.01, 0.1], 1, 1.0);
    assert!(scheme_rate(&scn, &SchemeConfig::new(1, 1, 1, 1, 2.0, 2.0)).unwrap_err().is_config());
    assert!(scheme_rate(&scn, &SchemeConfig::new(1, 1, 0, 1, 2.5, 2.0)).is_err());
    assert!(scheme_rate(&scn, &SchemeConfig::new(1, 1, 0, 1, 2.0, 2.0)).is_ok());
    // J = 2 needs Q > 1.
    assert!(scheme_rate(&scn, &SchemeConfig::new(1, 1, 2, 1, 0.5, 2.0)).is_err());
}

#[test]
fn single_precision_tracks_double() {
    let l64 = Layout::<f64>::line(24, 20).unwrap();
    let l32 = Layout::<f32>::line(24, 20).unwrap();
    let rep64 = cell_representatives(&l64)[3];
    let rep32 = cell_representatives(&l32)[3];
    let t = netmimo::geometry::ClusterTemplate::Pair;
    let s64 = Scenario::for_bin(&l64, t, rep64, 2, 2, Pathloss::ring_default(), SystemParams::default()).unwrap();
    let s32 = Scenario::for_bin(&l32, t, rep32, 2, 2, Pathloss::ring_default(), SystemParams::default()).unwrap();
    let r64 = scheme_rate(&s64, &SchemeConfig::new(2, 2, 2, 2, 8.0, 30.0)).unwrap().group_rate;
    let r32 = scheme_rate(&s32, &SchemeConfig::new(2, 2, 2, 2, 8.0f32, 30.0)).unwrap().group_rate;
    assert!(((r32 as f64 - r64) / r64).abs() < 1e-4, "{r32} vs {r64}");
}

proptest! {
    #[test]
    fn mmse_split_is_exact(g in 1e-6f64..1e6, noise in 1e-4f64..10.0, contamination in 0.0f64..1e5) {
        let t = TrainingCoefficients::from_link(g, noise, contamination);
        prop_assert!((t.xi + t.sigma - g).abs() <= 4.0 * f64::EPSILON * g);
        prop_assert!(t.xi >= 0.0 && t.sigma >= 0.0);
        prop_assert!((t.gamma - g / (noise + contamination)).abs() <= 4.0 * f64::EPSILON * t.gamma);
    }

    #[test]
    fn huge_arrays_reach_massive_limit(
        g1 in 1e-2f64..0.5, g2 in 1e-3f64..0.1, g3 in 1e-2f64..0.5, s in 0.5f64..20.0,
    ) {
        // Bounded dynamic range: the serving gain dominates by at most 1e2.
        let scn = toy_ring([1.0, g1, g2, g3], 1, 10.0);
        let limit = rate_massive_limit(&scn, &SchemeConfig::new(1, 1, 0, 1, s, 1.0)).unwrap().group_rate;
        let mf = rate_lsubf(&scn, &SchemeConfig::new(1, 1, 0, 1, s, 1e8)).unwrap().group_rate;
        let zf = rate_lzfbf_single(&scn, &SchemeConfig::new(1, 1, 1, 1, s, 1e8)).unwrap().group_rate;
        prop_assert!(((mf - limit) / limit).abs() < 1e-3);
        prop_assert!(((zf - limit) / limit).abs() < 1e-3);
    }

    #[test]
    fn rates_grow_with_antennas(m in 2.0f64..200.0, extra in 1.0f64..100.0) {
        let scn = toy_ring([1.0, 0.1, 0.01, 0.1], 2, 10.0);
        for j in [0usize, 1] {
            let a = scheme_rate(&scn, &SchemeConfig::new(1, 1, j, 2, 1.0, m)).unwrap().group_rate;
            let b = scheme_rate(&scn, &SchemeConfig::new(1, 1, j, 2, 1.0, m + extra)).unwrap().group_rate;
            prop_assert!(b >= a);
        }
    }
}
