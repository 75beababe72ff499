//! Per-bin search over the scheme family for the best overhead-adjusted rate.

use rayon::prelude::*;

use crate::asymptotic::{permitted_zf_orders, rate_massive_limit, scheme_rate, SchemeConfig, SchemeRate};
use crate::channel::{Pathloss, Scenario, SystemParams};
use crate::error::{Error, Result};
use crate::geometry::{ClusterTemplate, Layout, Point};
use crate::scalar::{count, lit, Real};

const GRID_POINTS: usize = 64;
const LOAD_TOLERANCE: f64 = 1e-4;
/// Depth of the per-bin ranking table.
pub const RANKING_DEPTH: usize = 5;

/// Discrete part of a scheme: everything except S and M.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchemeChoice {
    pub frequency_reuse: usize,
    pub template: ClusterTemplate,
    pub zf_order: usize,
    pub pilot_reuse: usize,
}

impl SchemeChoice {
    pub fn new(frequency_reuse: usize, template: ClusterTemplate, zf_order: usize, pilot_reuse: usize) -> Self {
        Self { frequency_reuse, template, zf_order, pilot_reuse }
    }

    /// (F,C,J)Q=q with Q = 1 and the single-cell matched filter.
    pub fn baseline() -> Self {
        Self::new(1, ClusterTemplate::Single, 0, 1)
    }

    pub fn config<T: Real>(&self, load: T, antennas: T) -> SchemeConfig<T> {
        SchemeConfig::new(self.frequency_reuse, self.template.size(), self.zf_order, self.pilot_reuse, load, antennas)
    }

    pub fn label(&self) -> String {
        format!(
            "({},{},{})Q={}",
            self.frequency_reuse,
            self.template.size(),
            self.zf_order,
            self.pilot_reuse
        )
    }
}

/// Enumerated scheme family plus an optional cap on the loading factor.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeFamily<T> {
    pub choices: Vec<SchemeChoice>,
    /// Extra upper bound on S (besides C*M/J and L/Q).
    pub max_load: Option<T>,
}

impl<T: Real> SchemeFamily<T> {
    pub fn new(choices: Vec<SchemeChoice>) -> Self {
        Self { choices, max_load: None }
    }

    /// Every combination of the allowed factors with J in {0, 1, Q, C(Q-1)+1}
    /// (optionally restricted to `zf_orders`).
    pub fn grid(
        frequency_reuse: &[usize],
        templates: &[ClusterTemplate],
        pilot_reuse: &[usize],
        zf_orders: Option<&[usize]>,
    ) -> Self {
        let mut choices = Vec::new();
        for &f in frequency_reuse {
            for &t in templates {
                for &q in pilot_reuse {
                    for j in permitted_zf_orders(t.size(), q) {
                        if zf_orders.is_some_and(|allowed| !allowed.contains(&j)) {
                            continue;
                        }
                        let c = SchemeChoice::new(f, t, j, q);
                        if !choices.contains(&c) {
                            choices.push(c);
                        }
                    }
                }
            }
        }
        Self::new(choices)
    }

    pub fn singleton(choice: SchemeChoice) -> Self {
        Self::new(vec![choice])
    }
}

/// Fixed inputs shared by every bin: layout, pathloss and system parameters.
#[derive(Clone, Debug)]
pub struct ScenarioTemplate<T> {
    pub layout: Layout<T>,
    pub pathloss: Pathloss<T>,
    pub system: SystemParams<T>,
}

impl<T: Real> ScenarioTemplate<T> {
    pub fn scenario(&self, choice: &SchemeChoice, representative: Point<T>) -> Result<Scenario<T>> {
        Scenario::for_bin(
            &self.layout,
            choice.template,
            representative,
            choice.frequency_reuse,
            choice.pilot_reuse,
            self.pathloss,
            self.system,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate<T> {
    pub choice: SchemeChoice,
    pub config: SchemeConfig<T>,
    pub group_rate: T,
    pub net_rate: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinOptimum<T> {
    pub bin_id: usize,
    pub representative: Point<T>,
    pub best: Candidate<T>,
    /// Best candidates in descending net rate, at most [`RANKING_DEPTH`].
    pub ranking: Vec<Candidate<T>>,
}

impl<T: Real> BinOptimum<T> {
    /// R*(X_k).
    pub fn r_star(&self) -> T {
        self.best.net_rate
    }
}

/// Largest admissible S for a scheme: min(C*M (J = 0) or C*M/J, L/Q, cap).
pub fn load_ceiling<T: Real>(choice: &SchemeChoice, antennas: T, coherence: T, cap: Option<T>) -> T {
    let cm = count::<T>(choice.template.size()) * antennas;
    let zf = if choice.zf_order == 0 { cm } else { cm / count(choice.zf_order) };
    let mut s = zf.min(coherence / count(choice.pilot_reuse));
    if let Some(c) = cap {
        s = s.min(c);
    }
    s
}

/// Net and group rate at `load`, zero wherever the scheme is infeasible.
fn net_at<T: Real>(
    rate: impl Fn(&SchemeConfig<T>) -> Result<SchemeRate<T>>,
    cfg: &SchemeConfig<T>,
    load: T,
) -> Result<(T, T)> {
    match rate(&cfg.with_load(load)) {
        Ok(r) => Ok((r.net_rate, r.group_rate)),
        Err(Error::Infeasible(_)) => Ok((T::zero(), T::zero())),
        Err(e) => Err(e),
    }
}

/// Maximizes (1 - QS/L) R(S) over S in (0, ceiling]: a 64-point grid, then
/// golden-section refinement around the best grid cell.
pub fn best_load<T: Real>(scn: &Scenario<T>, cfg: &SchemeConfig<T>, ceiling: T) -> Result<(T, T, T)> {
    maximize_load(|c| scheme_rate(scn, c), cfg, ceiling)
}

/// Same search against the M -> infinity rate (C = 1, Q = 1 only).
pub fn best_massive_load<T: Real>(scn: &Scenario<T>, cfg: &SchemeConfig<T>, ceiling: T) -> Result<(T, T, T)> {
    maximize_load(|c| rate_massive_limit(scn, c), cfg, ceiling)
}

fn maximize_load<T: Real>(
    rate: impl Fn(&SchemeConfig<T>) -> Result<SchemeRate<T>>,
    cfg: &SchemeConfig<T>,
    ceiling: T,
) -> Result<(T, T, T)> {
    let eval = |load: T| net_at(&rate, cfg, load);
    let n = GRID_POINTS;
    let step = ceiling / count(n);
    let mut best_k = 1;
    let mut best = (T::neg_infinity(), T::zero());
    for k in 1..=n {
        let v = eval(step * count(k))?;
        if v.0 > best.0 {
            best = v;
            best_k = k;
        }
    }
    let mut lo = step * count(best_k - 1);
    let mut hi = (step * count(best_k + 1)).min(ceiling);
    let ratio = (lit::<T>(5.0).sqrt() - T::one()) / lit(2.0);
    let tol = lit::<T>(LOAD_TOLERANCE);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let mut fa = eval(a)?.0;
    let mut fb = eval(b)?.0;
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = eval(b)?.0;
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = eval(a)?.0;
        }
    }
    let mid = (lo + hi) / lit(2.0);
    let refined = eval(mid)?;
    let grid_load = step * count(best_k);
    if refined.0 >= best.0 {
        Ok((mid, refined.0, refined.1))
    } else {
        Ok((grid_load, best.0, best.1))
    }
}

/// Best scheme of `family` for the bin generated by `representative`.
pub fn optimize_bin<T: Real>(
    template: &ScenarioTemplate<T>,
    bin_id: usize,
    representative: Point<T>,
    family: &SchemeFamily<T>,
    antennas: T,
) -> Result<BinOptimum<T>> {
    if family.choices.is_empty() {
        return Err(Error::Config("scheme family is empty".into()));
    }
    if !(antennas > T::zero()) {
        return Err(Error::Config(format!("antenna factor must be positive, got {antennas}")));
    }
    let coherence = template.system.coherence;
    let mut candidates = Vec::with_capacity(family.choices.len());
    let mut binding = String::new();
    for choice in &family.choices {
        let ceiling = load_ceiling(choice, antennas, coherence, family.max_load);
        if !(ceiling > T::zero()) {
            binding = format!("{}: loading ceiling {} is not positive", choice.label(), ceiling);
            continue;
        }
        let scn = template.scenario(choice, representative)?;
        let cfg = choice.config(ceiling, antennas);
        let (load, net, group) = best_load(&scn, &cfg, ceiling)?;
        candidates.push(Candidate { choice: *choice, config: cfg.with_load(load), group_rate: group, net_rate: net });
    }
    if candidates.is_empty() {
        return Err(Error::Infeasible(format!("no feasible scheme for bin {bin_id}; {binding}")));
    }
    // Stable sort keeps enumeration order among equal rates.
    candidates.sort_by(|a, b| b.net_rate.partial_cmp(&a.net_rate).unwrap_or(std::cmp::Ordering::Equal));
    candidates.truncate(RANKING_DEPTH);
    Ok(BinOptimum { bin_id, representative, best: candidates[0].clone(), ranking: candidates })
}

/// Optimum per bin plus the ratio against the baseline (1,1,0)Q=1 scheme
/// with its own optimized S.
#[derive(Clone, Debug, PartialEq)]
pub struct BinSweep<T> {
    pub optimum: BinOptimum<T>,
    pub baseline: Candidate<T>,
}

impl<T: Real> BinSweep<T> {
    pub fn gain_over_baseline(&self) -> T {
        self.optimum.r_star() / self.baseline.net_rate
    }
}

/// Optimizes every bin in parallel; results come back in input order.
pub fn sweep_bins<T: Real>(
    template: &ScenarioTemplate<T>,
    representatives: &[Point<T>],
    family: &SchemeFamily<T>,
    antennas: T,
) -> Result<Vec<BinSweep<T>>> {
    let baseline_family = SchemeFamily { choices: vec![SchemeChoice::baseline()], max_load: family.max_load };
    representatives
        .par_iter()
        .enumerate()
        .map(|(k, &rep)| {
            let optimum = optimize_bin(template, k, rep, family, antennas)?;
            let baseline = optimize_bin(template, k, rep, &baseline_family, antennas)?.best;
            Ok(BinSweep { optimum, baseline })
        })
        .collect()
}
