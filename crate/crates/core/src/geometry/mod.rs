//! Lattice layouts on a torus, cluster patterns, symmetric user bins and
//! frequency/pilot reuse colorings.

mod bin;
mod cluster;
mod lattice;
mod reuse;

pub use bin::{cell_representatives, distance_profile, BinDescriptor, BinPattern};
pub use cluster::{ClusterPattern, ClusterTemplate, TriangleFamily};
pub use lattice::{Dimension, Layout, Point, Site, HEX_CELLS};
pub use reuse::{loeschian_generator, ReuseAssignment};

use crate::scalar::{tolerance, Real};

const TIE_TOLERANCE: f64 = 1e-9;

/// E(x): the `zf_order - 1` clusters of D(0) other than 0 whose centroids
/// are nearest `x`. Near-ties (relative 1e-9, or a few ulps) go to the lower cluster index.
/// Only clusters sharing the reference subband are candidates, since ZF
/// constraints toward silent clusters would be vacuous.
pub fn nearest_zf_clusters<T: Real>(
    layout: &Layout<T>,
    clusters: &ClusterPattern,
    reuse: &ReuseAssignment,
    x: Point<T>,
    zf_order: usize,
) -> Vec<usize> {
    let want = zf_order.saturating_sub(1);
    let mut pool: Vec<(usize, T)> = reuse
        .active_set(0)
        .into_iter()
        .filter(|&c| c != 0)
        .map(|c| (c, layout.mod_distance(x, clusters.centroid(layout, c))))
        .collect();
    let mut picked = Vec::with_capacity(want);
    while picked.len() < want && !pool.is_empty() {
        let best = argmin_with_ties(pool.iter().map(|p| p.1));
        picked.push(pool.remove(best).0);
    }
    picked
}

/// b(x, c): position (in root order) of the BS of cluster `c` nearest `x`.
pub fn closest_bs_in_cluster<T: Real>(layout: &Layout<T>, clusters: &ClusterPattern, x: Point<T>, c: usize) -> usize {
    argmin_with_ties((0..clusters.size()).map(|b| layout.mod_distance(x, clusters.member_point(layout, c, b))))
}

fn argmin_with_ties<T: Real>(values: impl Iterator<Item = T>) -> usize {
    let shrink = T::one() - tolerance::<T>(TIE_TOLERANCE);
    let mut best = 0;
    let mut best_v = T::infinity();
    for (i, v) in values.enumerate() {
        if v < best_v * shrink || (best_v.is_infinite() && v < best_v) {
            best = i;
            best_v = v;
        }
    }
    best
}
