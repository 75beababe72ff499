use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};

/// A point expressed in the BS-lattice basis (fractional coordinates allowed).
/// In the 1-D layout the second coordinate is always zero.
pub type Point<T> = [T; 2];

/// Integer BS-lattice coordinates.
pub type Site = [i64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    Line,
    Plane,
}

/// Number of cells in the provided hexagonal torus.
pub const HEX_CELLS: usize = 19;

// Coarse lattice generators for the hexagonal torus, as columns in BS-lattice
// coordinates. Both have squared length 19 * 3r^2 and meet at 60 degrees, so
// the torus is the 19-cell hexagonal super-cell.
const HEX_COARSE: [[i64; 2]; 2] = [[5, 2], [-2, 3]];

/// Cell layout on a torus: BS lattice modulo a coarse periodicity lattice.
#[derive(Clone, Debug)]
pub struct Layout<T> {
    dimension: Dimension,
    hex_radius: T,
    // Row-major 2x2 matrices; columns are generators.
    basis: [[T; 2]; 2],
    basis_inv: [[T; 2]; 2],
    coarse: [[i64; 2]; 2],
    coarse_inv: [[T; 2]; 2],
    sites: Vec<Site>,
    site_lookup: Vec<usize>,
    add_table: Vec<usize>,
    neg_table: Vec<usize>,
    grid_density: usize,
    grid_offset: Point<T>,
}

fn mat_vec<T: Real>(m: &[[T; 2]; 2], v: Point<T>) -> Point<T> {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn inverse<T: Real>(m: &[[T; 2]; 2]) -> [[T; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

impl<T: Real> Layout<T> {
    /// Ring of `bs_count` unit-spaced BSs. `grid_density` is the number of user
    /// grid points per unit length and must be even so that the half-step
    /// offset keeps every grid point off the cell boundaries.
    pub fn line(bs_count: usize, grid_density: usize) -> Result<Self> {
        if bs_count < 2 {
            return Err(Error::Config(format!("1-D layout needs at least 2 BSs, got {bs_count}")));
        }
        if grid_density == 0 || grid_density % 2 != 0 {
            return Err(Error::Config(format!(
                "1-D user grid density must be even and positive, got {grid_density}"
            )));
        }
        let b = bs_count as i64;
        let one = T::one();
        let zero = T::zero();
        let mut layout = Layout {
            dimension: Dimension::Line,
            hex_radius: one,
            basis: [[one, zero], [zero, one]],
            basis_inv: [[one, zero], [zero, one]],
            coarse: [[b, 0], [0, 1]],
            coarse_inv: [[one / count(bs_count), zero], [zero, one]],
            sites: (0..b).map(|i| [i, 0]).collect(),
            site_lookup: Vec::new(),
            add_table: Vec::new(),
            neg_table: Vec::new(),
            grid_density,
            grid_offset: [one / count(2 * grid_density), zero],
        };
        layout.build_tables();
        Ok(layout)
    }

    /// The 19-cell hexagonal layout with cell radius `hex_radius` (center to
    /// vertex). `grid_density` is the number of radial and angular steps of
    /// the user-location generator; `grid_offset` is its fractional
    /// (radial, angular) offset in steps.
    pub fn hexagonal(hex_radius: T, grid_density: usize, grid_offset: Point<T>) -> Result<Self> {
        if !(hex_radius > T::zero()) || !hex_radius.is_finite() {
            return Err(Error::Config(format!("hexagon radius must be positive, got {hex_radius}")));
        }
        if grid_density == 0 {
            return Err(Error::Config("2-D user grid density must be positive".into()));
        }
        for o in grid_offset {
            if !(o > T::zero() && o < T::one()) {
                return Err(Error::Config(format!(
                    "2-D grid offset must lie strictly inside (0, 1) steps, got {o}"
                )));
            }
        }
        let r = hex_radius;
        let s3 = lit::<T>(3.0).sqrt();
        let basis = [[lit::<T>(1.5) * r, T::zero()], [s3 / lit(2.0) * r, s3 * r]];
        let coarse_f = [
            [lit::<T>(HEX_COARSE[0][0] as f64), lit(HEX_COARSE[0][1] as f64)],
            [lit(HEX_COARSE[1][0] as f64), lit(HEX_COARSE[1][1] as f64)],
        ];
        let mut layout = Layout {
            dimension: Dimension::Plane,
            hex_radius: r,
            basis,
            basis_inv: inverse(&basis),
            coarse: HEX_COARSE,
            coarse_inv: inverse(&coarse_f),
            sites: Vec::new(),
            site_lookup: Vec::new(),
            add_table: Vec::new(),
            neg_table: Vec::new(),
            grid_density,
            grid_offset,
        };
        layout.sites = layout.enumerate_hex_sites();
        layout.build_tables();
        Ok(layout)
    }

    /// Dispatching constructor: 1-D takes any `bs_count >= 2`; 2-D supports
    /// only the 19-cell template.
    pub fn build(dimension: Dimension, bs_count: usize, hex_radius: T, grid_density: usize) -> Result<Self> {
        match dimension {
            Dimension::Line => Self::line(bs_count, grid_density),
            Dimension::Plane if bs_count == HEX_CELLS => {
                Self::hexagonal(hex_radius, grid_density, [lit(0.5), lit(0.5)])
            }
            Dimension::Plane => Err(Error::Config(format!(
                "2-D layout supports B = {HEX_CELLS} only, got {bs_count}"
            ))),
        }
    }

    fn enumerate_hex_sites(&self) -> Vec<Site> {
        let det = self.coarse_det() as usize;
        let mut best: Vec<Option<Site>> = vec![None; det * det];
        let norm = |s: Site| s[0] * s[0] + s[0] * s[1] + s[1] * s[1];
        for i in -6..=6 {
            for j in -6..=6 {
                let s = [i, j];
                let key = self.coset_key(s);
                let replace = match best[key] {
                    None => true,
                    Some(cur) => (norm(s), s) < (norm(cur), cur),
                };
                if replace {
                    best[key] = Some(s);
                }
            }
        }
        let mut sites: Vec<Site> = best.into_iter().flatten().collect();
        sites.sort_by_key(|&s| (norm(s), s));
        sites
    }

    fn coarse_det(&self) -> i64 {
        self.coarse[0][0] * self.coarse[1][1] - self.coarse[0][1] * self.coarse[1][0]
    }

    /// Index of the coset of `s` modulo the coarse lattice, in `0..det^2`.
    fn coset_key(&self, s: Site) -> usize {
        let det = self.coarse_det();
        let c = &self.coarse;
        // adj(P) * s is a multiple of det exactly when s lies in P * Z^2.
        let k0 = (c[1][1] * s[0] - c[0][1] * s[1]).rem_euclid(det);
        let k1 = (-c[1][0] * s[0] + c[0][0] * s[1]).rem_euclid(det);
        (k0 * det + k1) as usize
    }

    fn build_tables(&mut self) {
        let det = self.coarse_det() as usize;
        let n = self.sites.len();
        self.site_lookup = vec![usize::MAX; det * det];
        for (idx, &s) in self.sites.iter().enumerate() {
            let key = self.coset_key(s);
            self.site_lookup[key] = idx;
        }
        self.add_table = vec![0; n * n];
        self.neg_table = vec![0; n];
        for a in 0..n {
            let sa = self.sites[a];
            self.neg_table[a] = self.site_index([-sa[0], -sa[1]]);
            for b in 0..n {
                let sb = self.sites[b];
                self.add_table[a * n + b] = self.site_index([sa[0] + sb[0], sa[1] + sb[1]]);
            }
        }
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    /// Number of BSs B on the torus.
    pub fn bs_count(&self) -> usize {
        self.sites.len()
    }

    pub fn hex_radius(&self) -> T {
        self.hex_radius
    }

    pub fn grid_density(&self) -> usize {
        self.grid_density
    }

    /// Half-step offset u0 of the user grid (1-D: physical; 2-D: in steps).
    pub fn grid_offset(&self) -> Point<T> {
        self.grid_offset
    }

    /// Integer BS-lattice coordinates of each BS, origin first.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, idx: usize) -> Site {
        self.sites[idx]
    }

    /// Coarse lattice generators (columns) in BS-lattice coordinates.
    pub fn coarse_generators(&self) -> [Site; 2] {
        [[self.coarse[0][0], self.coarse[1][0]], [self.coarse[0][1], self.coarse[1][1]]]
    }

    /// BS-lattice generators (columns) in physical coordinates.
    pub fn bs_generators(&self) -> [Point<T>; 2] {
        [[self.basis[0][0], self.basis[1][0]], [self.basis[0][1], self.basis[1][1]]]
    }

    /// True if `s` lies on the coarse lattice.
    pub fn is_coarse_point(&self, s: Site) -> bool {
        self.coset_key(s) == 0
    }

    /// Index of the BS whose coset contains `s`.
    pub fn site_index(&self, s: Site) -> usize {
        let idx = self.site_lookup[self.coset_key(s)];
        debug_assert!(idx != usize::MAX);
        idx
    }

    /// Index of `a + b` modulo the coarse lattice.
    #[inline]
    pub fn add(&self, a: usize, b: usize) -> usize {
        self.add_table[a * self.sites.len() + b]
    }

    /// Index of `-a` modulo the coarse lattice.
    #[inline]
    pub fn neg(&self, a: usize) -> usize {
        self.neg_table[a]
    }

    pub fn site_point(&self, idx: usize) -> Point<T> {
        let s = self.sites[idx];
        [lit(s[0] as f64), lit(s[1] as f64)]
    }

    /// Physical coordinates of a lattice-basis point.
    pub fn to_physical(&self, p: Point<T>) -> Point<T> {
        match self.dimension {
            Dimension::Line => [p[0], T::zero()],
            Dimension::Plane => mat_vec(&self.basis, p),
        }
    }

    /// Lattice-basis coordinates of a physical point.
    pub fn from_physical(&self, p: Point<T>) -> Point<T> {
        match self.dimension {
            Dimension::Line => [p[0], T::zero()],
            Dimension::Plane => mat_vec(&self.basis_inv, p),
        }
    }

    /// Physical BS positions inside the fundamental cell, origin first.
    pub fn bs_positions(&self) -> Vec<Point<T>> {
        (0..self.bs_count()).map(|i| self.to_physical(self.site_point(i))).collect()
    }

    fn physical_norm(&self, p: Point<T>) -> T {
        let q = self.to_physical(p);
        (q[0] * q[0] + q[1] * q[1]).sqrt()
    }

    /// Representative of `p` modulo the coarse lattice with minimal physical
    /// norm.
    pub fn reduce(&self, p: Point<T>) -> Point<T> {
        match self.dimension {
            Dimension::Line => {
                let b: T = lit(self.coarse[0][0] as f64);
                let half: T = lit(0.5);
                [p[0] - b * (p[0] / b + half).floor(), T::zero()]
            }
            Dimension::Plane => {
                let t = mat_vec(&self.coarse_inv, p);
                let (r0, r1) = (t[0].round(), t[1].round());
                let c = &self.coarse;
                let shift = |a: T, b: T| -> Point<T> {
                    let ca: [[T; 2]; 2] = [
                        [lit(c[0][0] as f64), lit(c[0][1] as f64)],
                        [lit(c[1][0] as f64), lit(c[1][1] as f64)],
                    ];
                    let v = mat_vec(&ca, [a, b]);
                    [p[0] - v[0], p[1] - v[1]]
                };
                let mut best = shift(r0, r1);
                let mut best_norm = self.physical_norm(best);
                for da in [-1.0, 0.0, 1.0] {
                    for db in [-1.0, 0.0, 1.0] {
                        if da == 0.0 && db == 0.0 {
                            continue;
                        }
                        let cand = shift(r0 + lit(da), r1 + lit(db));
                        let n = self.physical_norm(cand);
                        if n < best_norm {
                            best = cand;
                            best_norm = n;
                        }
                    }
                }
                best
            }
        }
    }

    /// Distance between `u` and `v` on the torus.
    pub fn mod_distance(&self, u: Point<T>, v: Point<T>) -> T {
        self.physical_norm(self.reduce([u[0] - v[0], u[1] - v[1]]))
    }

    /// Rotates `p` about `center` by `angle` radians (2-D), or reflects it
    /// through `center` for any odd multiple of pi in 1-D.
    pub fn rotate_about(&self, p: Point<T>, center: Point<T>, angle: T) -> Point<T> {
        match self.dimension {
            Dimension::Line => [center[0] + angle.cos() * (p[0] - center[0]), T::zero()],
            Dimension::Plane => {
                let pp = self.to_physical(p);
                let cp = self.to_physical(center);
                let (s, c) = angle.sin_cos();
                let d = [pp[0] - cp[0], pp[1] - cp[1]];
                self.from_physical([cp[0] + c * d[0] - s * d[1], cp[1] + s * d[0] + c * d[1]])
            }
        }
    }

    /// Distance from the BS to its hexagonal cell boundary in direction
    /// `theta` (radians, physical frame).
    pub fn hex_boundary_distance(&self, theta: T) -> T {
        let sixty = T::FRAC_PI_3();
        let thirty = sixty / lit(2.0);
        // Edge normals point at 30 + 60k degrees.
        let k = ((theta - thirty) / sixty).round();
        let normal = thirty + k * sixty;
        let inradius = lit::<T>(3.0).sqrt() / lit(2.0) * self.hex_radius;
        inradius / (theta - normal).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_layout_sites_and_tables() {
        let l = Layout::<f64>::line(24, 20).unwrap();
        assert_eq!(l.bs_count(), 24);
        assert_eq!(l.site(23), [23, 0]);
        assert_eq!(l.add(23, 1), 0);
        assert_eq!(l.neg(1), 23);
        assert_eq!(l.grid_offset()[0], 0.025);
    }

    #[test]
    fn line_reduce_is_centered() {
        let l = Layout::<f64>::line(24, 20).unwrap();
        assert_eq!(l.reduce([23.5, 0.0])[0], -0.5);
        assert_eq!(l.reduce([12.0, 0.0])[0], -12.0);
        assert_eq!(l.mod_distance([23.5, 0.0], [0.0, 0.0]), 0.5);
    }

    #[test]
    fn hex_layout_has_nineteen_sites_in_three_rings() {
        let l = Layout::<f64>::hexagonal(1.6, 4, [0.5, 0.5]).unwrap();
        assert_eq!(l.bs_count(), 19);
        assert_eq!(l.site(0), [0, 0]);
        let r = 1.6;
        let mut dists: Vec<f64> = (0..19).map(|i| l.mod_distance(l.site_point(i), [0.0, 0.0]) / r).collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s3 = 3f64.sqrt();
        assert!((dists[1] - s3).abs() < 1e-12 && (dists[6] - s3).abs() < 1e-12);
        assert!((dists[7] - 3.0).abs() < 1e-12 && (dists[12] - 3.0).abs() < 1e-12);
        assert!((dists[13] - 2.0 * s3).abs() < 1e-12);
    }

    #[test]
    fn hex_coarse_generators_are_lattice_points() {
        let l = Layout::<f64>::hexagonal(1.0, 4, [0.5, 0.5]).unwrap();
        for g in l.coarse_generators() {
            assert!(l.is_coarse_point(g));
            let p = [g[0] as f64, g[1] as f64];
            assert!(l.mod_distance(p, [0.0, 0.0]) < 1e-12);
        }
    }

    #[test]
    fn unsupported_plane_size_rejected() {
        assert!(Layout::<f64>::build(Dimension::Plane, 7, 1.0, 4).is_err());
        assert!(Layout::<f64>::line(1, 2).is_err());
        assert!(Layout::<f64>::line(4, 3).is_err());
    }

    #[test]
    fn hex_boundary_distance_matches_inradius_and_vertex() {
        let l = Layout::<f64>::hexagonal(2.0, 4, [0.5, 0.5]).unwrap();
        let pi = std::f64::consts::PI;
        assert!((l.hex_boundary_distance(pi / 6.0) - 3f64.sqrt()).abs() < 1e-12);
        assert!((l.hex_boundary_distance(0.0) - 2.0).abs() < 1e-12);
    }
}
