use super::cluster::ClusterPattern;
use super::lattice::{Dimension, Layout, Point};
use crate::error::{Error, Result};
use crate::scalar::{count, lit, tolerance, Real};

/// How to build the location set of a bin.
#[derive(Clone, Debug, PartialEq)]
pub enum BinDescriptor<T> {
    /// Orbit of one representative under the root cluster's symmetry:
    /// reflection through the cluster center (1-D) or 120 degree rotation
    /// about it (2-D).
    Orbit(Point<T>),
    /// Explicit locations, accepted only if symmetric.
    Explicit(Vec<Point<T>>),
}

/// Symmetric set of user locations X served as one group by the root cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct BinPattern<T> {
    locations: Vec<Point<T>>,
}

impl<T: Real> BinPattern<T> {
    pub fn new(layout: &Layout<T>, clusters: &ClusterPattern, desc: &BinDescriptor<T>) -> Result<Self> {
        let locations = match desc {
            BinDescriptor::Orbit(x) => orbit(layout, clusters, *x),
            BinDescriptor::Explicit(v) => {
                if v.is_empty() {
                    return Err(Error::Config("bin needs at least one location".into()));
                }
                v.clone()
            }
        };
        check_symmetry(layout, clusters, &locations)?;
        Ok(Self { locations })
    }

    /// Locations in lattice coordinates.
    pub fn locations(&self) -> &[Point<T>] {
        &self.locations
    }

    /// Multiplicity m.
    pub fn multiplicity(&self) -> usize {
        self.locations.len()
    }

    /// Locations of the translated group X + c.
    pub fn translated(&self, layout: &Layout<T>, c: usize) -> Vec<Point<T>> {
        let s = layout.site_point(c);
        self.locations.iter().map(|p| [p[0] + s[0], p[1] + s[1]]).collect()
    }
}

fn orbit<T: Real>(layout: &Layout<T>, clusters: &ClusterPattern, x: Point<T>) -> Vec<Point<T>> {
    let center = clusters.centroid(layout, 0);
    let (steps, angle) = match layout.dimension() {
        Dimension::Line => (2, T::PI()),
        Dimension::Plane => (3, lit::<T>(2.0) * T::FRAC_PI_3()),
    };
    let tol = tolerance::<T>(1e-9) * (T::one() + layout.hex_radius());
    let mut out: Vec<Point<T>> = Vec::with_capacity(steps);
    for k in 0..steps {
        let p = layout.rotate_about(x, center, angle * count(k));
        if !out.iter().any(|q| layout.mod_distance(*q, p) <= tol) {
            out.push(p);
        }
    }
    out
}

/// Distances from `x` to each BS of the root cluster, sorted.
pub fn distance_profile<T: Real>(layout: &Layout<T>, clusters: &ClusterPattern, x: Point<T>) -> Vec<T> {
    let mut d: Vec<T> = (0..clusters.size())
        .map(|b| layout.mod_distance(x, clusters.member_point(layout, 0, b)))
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    d
}

fn check_symmetry<T: Real>(layout: &Layout<T>, clusters: &ClusterPattern, xs: &[Point<T>]) -> Result<()> {
    let reference = distance_profile(layout, clusters, xs[0]);
    let tol = tolerance::<T>(1e-9);
    for x in &xs[1..] {
        let prof = distance_profile(layout, clusters, *x);
        let ok = prof
            .iter()
            .zip(&reference)
            .all(|(a, b)| (*a - *b).abs() <= tol * (T::one() + b.abs()));
        if !ok {
            return Err(Error::Symmetry(format!(
                "location {:?} has BS distances {:?}, expected {:?}",
                x, prof, reference
            )));
        }
    }
    Ok(())
}

/// Orbit representatives spanning the reference cell.
///
/// 1-D: u0 + j / density for j in 0..density/2, i.e. the half-cell [0, 1/2].
/// 2-D: a polar grid over the [0, 120) degree sector of the reference
/// hexagon, `density` radial fractions of the boundary distance times
/// `density` angles, both offset by the layout's grid offset.
pub fn cell_representatives<T: Real>(layout: &Layout<T>) -> Vec<Point<T>> {
    let k = layout.grid_density();
    let off = layout.grid_offset();
    match layout.dimension() {
        Dimension::Line => (0..k / 2).map(|j| [off[0] + count::<T>(j) / count(k), T::zero()]).collect(),
        Dimension::Plane => {
            let sector = lit::<T>(2.0) * T::FRAC_PI_3();
            let mut reps = Vec::with_capacity(k * k);
            for i in 0..k {
                let frac = (count::<T>(i) + off[0]) / count(k);
                for j in 0..k {
                    let theta = sector * (count::<T>(j) + off[1]) / count(k);
                    let rad = frac * layout.hex_boundary_distance(theta);
                    let (s, c) = theta.sin_cos();
                    reps.push(layout.from_physical([rad * c, rad * s]));
                }
            }
            reps
        }
    }
}
