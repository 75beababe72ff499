use super::lattice::{Dimension, Layout, Site};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Subband and training-codebook labels for every cluster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReuseAssignment {
    frequency_reuse: usize,
    pilot_reuse: usize,
    subband: Vec<usize>,
    codebook: Vec<usize>,
}

// Hexagonal sites are Eisenstein integers i + j*w with w = exp(i*pi/3)
// (the BS generators sit 60 degrees apart), so w^2 = w - 1.
fn eis_mul(a: Site, b: Site) -> Site {
    [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0] + a[1] * b[1]]
}

fn eis_norm(a: Site) -> i64 {
    a[0] * a[0] + a[0] * a[1] + a[1] * a[1]
}

fn eis_div_exact(a: Site, u: Site) -> Option<Site> {
    // a / u = a * conj(u) / N(u), conj(i + j w) = (i + j) - j w.
    let n = eis_norm(u);
    let p = eis_mul(a, [u[0] + u[1], -u[1]]);
    if p[0] % n == 0 && p[1] % n == 0 {
        Some([p[0] / n, p[1] / n])
    } else {
        None
    }
}

/// Coset of `z` modulo the ideal generated by `u`, as an index in 0..N(u)^2.
fn eis_coset(z: Site, u: Site) -> usize {
    let n = eis_norm(u);
    // Ideal basis columns: u and u*w = (-j, i + j).
    let (i, j) = (u[0], u[1]);
    let k0 = ((i + j) * z[0] + j * z[1]).rem_euclid(n);
    let k1 = (-j * z[0] + i * z[1]).rem_euclid(n);
    (k0 * n + k1) as usize
}

/// Smallest Eisenstein generator (i >= j >= 0) of norm `n`, if any.
pub fn loeschian_generator(n: usize) -> Option<Site> {
    let n = n as i64;
    for i in 0..=n {
        for j in 0..=i {
            if eis_norm([i, j]) == n {
                return Some([i, j]);
            }
        }
    }
    None
}

/// Relabels keys by order of first appearance so the first key gets 0.
fn first_appearance(keys: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    keys.iter()
        .map(|k| match seen.iter().position(|s| s == k) {
            Some(p) => p,
            None => {
                seen.push(*k);
                seen.len() - 1
            }
        })
        .collect()
}

impl ReuseAssignment {
    /// Periodic subband/codebook coloring. Cluster 0 always gets subband 0
    /// and codebook 0.
    ///
    /// 1-D: subband `c mod F`, codebook `(c div F) mod Q`; needs `F*Q | B`.
    /// 2-D: cosets of Eisenstein ideals of norm F and Q, labeled in BS
    /// order. The 19-cell torus is not divisible by 3, so the F = 3 coloring
    /// splits the clusters 7/6/6.
    pub fn new<T: Real>(layout: &Layout<T>, frequency_reuse: usize, pilot_reuse: usize) -> Result<Self> {
        if frequency_reuse == 0 || pilot_reuse == 0 {
            return Err(Error::Config("reuse factors must be positive".into()));
        }
        let b = layout.bs_count();
        let (subband, codebook) = match layout.dimension() {
            Dimension::Line => {
                if b % (frequency_reuse * pilot_reuse) != 0 {
                    return Err(Error::Config(format!(
                        "1-D reuse needs F*Q to divide B: F={frequency_reuse}, Q={pilot_reuse}, B={b}"
                    )));
                }
                let sub = (0..b).map(|c| c % frequency_reuse).collect();
                let cb = (0..b).map(|c| (c / frequency_reuse) % pilot_reuse).collect();
                (sub, cb)
            }
            Dimension::Plane => {
                let uf = loeschian_generator(frequency_reuse).ok_or_else(|| {
                    Error::Config(format!("F={frequency_reuse} is not of the form i^2+ij+j^2"))
                })?;
                let uq = loeschian_generator(pilot_reuse).ok_or_else(|| {
                    Error::Config(format!("Q={pilot_reuse} is not of the form i^2+ij+j^2"))
                })?;
                if frequency_reuse > b || pilot_reuse > b {
                    return Err(Error::Config("reuse factor exceeds the number of clusters".into()));
                }
                let sites = layout.sites();
                let sub = first_appearance(&sites.iter().map(|&s| eis_coset(s, uf)).collect::<Vec<_>>());
                let mut cb = vec![0; b];
                for f in 0..frequency_reuse {
                    let members: Vec<usize> = (0..b).filter(|&c| sub[c] == f).collect();
                    let Some(&anchor) = members.first() else { continue };
                    let t = sites[anchor];
                    let keys: Vec<usize> = members
                        .iter()
                        .map(|&c| {
                            let d = [sites[c][0] - t[0], sites[c][1] - t[1]];
                            let z = eis_div_exact(d, uf).expect("same coset implies divisibility");
                            eis_coset(z, uq)
                        })
                        .collect();
                    for (c, q) in members.iter().zip(first_appearance(&keys)) {
                        cb[*c] = q;
                    }
                }
                (sub, cb)
            }
        };
        Ok(Self { frequency_reuse, pilot_reuse, subband, codebook })
    }

    pub fn frequency_reuse(&self) -> usize {
        self.frequency_reuse
    }

    pub fn pilot_reuse(&self) -> usize {
        self.pilot_reuse
    }

    pub fn subband(&self, c: usize) -> usize {
        self.subband[c]
    }

    pub fn codebook(&self, c: usize) -> usize {
        self.codebook[c]
    }

    pub fn cluster_count(&self) -> usize {
        self.subband.len()
    }

    /// D(f): clusters active on subband `f`, ascending.
    pub fn active_set(&self, f: usize) -> Vec<usize> {
        (0..self.subband.len()).filter(|&c| self.subband[c] == f).collect()
    }

    /// P(q, f): clusters on subband `f` using codebook `q`, ascending.
    pub fn pilot_set(&self, q: usize, f: usize) -> Vec<usize> {
        (0..self.subband.len())
            .filter(|&c| self.subband[c] == f && self.codebook[c] == q)
            .collect()
    }

    /// Clusters sharing subband and codebook with `c` (including `c`).
    pub fn pilot_peers(&self, c: usize) -> Vec<usize> {
        self.pilot_set(self.codebook[c], self.subband[c])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_even_odd_subbands() {
        let l = Layout::<f64>::line(24, 20).unwrap();
        let r = ReuseAssignment::new(&l, 2, 1).unwrap();
        assert_eq!(r.active_set(0), (0..24).step_by(2).collect::<Vec<_>>());
        assert_eq!(r.active_set(1), (1..24).step_by(2).collect::<Vec<_>>());
    }

    #[test]
    fn trivial_reuse_puts_everything_together() {
        let l = Layout::<f64>::line(8, 2).unwrap();
        let r = ReuseAssignment::new(&l, 1, 1).unwrap();
        assert_eq!(r.active_set(0), (0..8).collect::<Vec<_>>());
        assert_eq!(r.pilot_set(0, 0), r.active_set(0));
    }

    #[test]
    fn ring_rejects_non_dividing_factors() {
        let l = Layout::<f64>::line(6, 2).unwrap();
        assert!(ReuseAssignment::new(&l, 4, 1).is_err());
        assert!(ReuseAssignment::new(&l, 2, 2).is_err());
    }

    #[test]
    fn hex_three_coloring_splits_seven_six_six() {
        let l = Layout::<f64>::hexagonal(1.6, 4, [0.5, 0.5]).unwrap();
        let r = ReuseAssignment::new(&l, 3, 1).unwrap();
        let sizes: Vec<usize> = (0..3).map(|f| r.active_set(f).len()).collect();
        assert_eq!(sizes, vec![7, 6, 6]);
        // Nearest neighbours never share a subband.
        for c in 1..7 {
            assert_ne!(r.subband(c), 0);
        }
        assert_eq!(r.subband(0), 0);
        assert_eq!(r.codebook(0), 0);
    }

    #[test]
    fn hex_pilot_sets_partition_each_subband() {
        let l = Layout::<f64>::hexagonal(1.6, 4, [0.5, 0.5]).unwrap();
        for (f, q) in [(1, 3), (3, 3), (3, 1), (1, 1)] {
            let r = ReuseAssignment::new(&l, f, q).unwrap();
            for sub in 0..f {
                let mut all: Vec<usize> = (0..q).flat_map(|cb| r.pilot_set(cb, sub)).collect();
                all.sort();
                assert_eq!(all, r.active_set(sub));
            }
        }
    }

    #[test]
    fn loeschian_numbers() {
        assert_eq!(loeschian_generator(1), Some([1, 0]));
        assert_eq!(loeschian_generator(3), Some([1, 1]));
        assert_eq!(loeschian_generator(7), Some([2, 1]));
        assert_eq!(loeschian_generator(2), None);
        assert_eq!(loeschian_generator(5), None);
    }
}
