use super::lattice::{Dimension, Layout, Point, Site};
use crate::error::{Error, Result};
use crate::scalar::{count, lit, tolerance, Real};

/// The two translate classes of three-cell triangles on the hexagonal
/// lattice. `A` contains {0, e1, e2} (centroid direction 60 degrees),
/// `B` contains {0, e1, e1 - e2} (centroid direction 0 degrees), where e1
/// and e2 are the BS-lattice generators at 30 and 90 degrees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriangleFamily {
    A,
    B,
}

/// How the cluster translate serving a bin is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusterTemplate {
    /// One BS per cluster.
    Single,
    /// Adjacent BS pair {0, 1} on the ring.
    Pair,
    /// Triangle of a fixed family, rooted at the translate nearest the bin.
    Triangle(TriangleFamily),
    /// Whichever triangle (either family) has its centroid nearest the bin.
    NearestTriangle,
}

impl ClusterTemplate {
    pub fn size(&self) -> usize {
        match self {
            ClusterTemplate::Single => 1,
            ClusterTemplate::Pair => 2,
            ClusterTemplate::Triangle(_) | ClusterTemplate::NearestTriangle => 3,
        }
    }
}

/// Clusters {root + c} for every BS c, wrapped modulo the coarse lattice.
#[derive(Clone, Debug)]
pub struct ClusterPattern {
    root: Vec<Site>,
    root_bs: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl ClusterPattern {
    /// Builds the pattern from root offsets (first offset must be the origin).
    pub fn new<T: Real>(layout: &Layout<T>, root: &[Site]) -> Result<Self> {
        if root.first() != Some(&[0, 0]) {
            return Err(Error::Config("cluster root must start at the origin".into()));
        }
        if layout.dimension() == Dimension::Line && root.iter().any(|s| s[1] != 0) {
            return Err(Error::Config("1-D cluster offsets must have zero second coordinate".into()));
        }
        let supported: &[usize] = match layout.dimension() {
            Dimension::Line => &[1, 2],
            Dimension::Plane => &[1, 3],
        };
        if !supported.contains(&root.len()) {
            return Err(Error::Config(format!(
                "cluster size {} unsupported for this layout (allowed {:?})",
                root.len(),
                supported
            )));
        }
        let root_bs: Vec<usize> = root.iter().map(|&s| layout.site_index(s)).collect();
        for i in 0..root_bs.len() {
            if root_bs[..i].contains(&root_bs[i]) {
                return Err(Error::Config(format!("cluster offsets {:?} repeat a BS modulo the torus", root)));
            }
        }
        let members = (0..layout.bs_count())
            .map(|c| root_bs.iter().map(|&b| layout.add(b, c)).collect())
            .collect();
        Ok(Self { root: root.to_vec(), root_bs, members })
    }

    /// Pattern for `template`, choosing the translate that contains BS 0 and
    /// whose centroid is nearest `anchor`.
    pub fn for_template<T: Real>(layout: &Layout<T>, template: ClusterTemplate, anchor: Point<T>) -> Result<Self> {
        let roots: Vec<Vec<Site>> = match (template, layout.dimension()) {
            (ClusterTemplate::Single, _) => vec![vec![[0, 0]]],
            (ClusterTemplate::Pair, Dimension::Line) => vec![vec![[0, 0], [1, 0]]],
            (ClusterTemplate::Triangle(fam), Dimension::Plane) => triangle_roots(fam),
            (ClusterTemplate::NearestTriangle, Dimension::Plane) => {
                let mut all = triangle_roots(TriangleFamily::A);
                all.extend(triangle_roots(TriangleFamily::B));
                all
            }
            _ => {
                return Err(Error::Config(format!("cluster template {template:?} unsupported for this layout")))
            }
        };
        let mut best = 0;
        let mut best_d = T::infinity();
        for (i, root) in roots.iter().enumerate() {
            let d = layout.mod_distance(anchor, centroid_offset(root));
            if d < best_d * (T::one() - tolerance::<T>(1e-9)) {
                best = i;
                best_d = d;
            }
        }
        Self::new(layout, &roots[best])
    }

    /// Cluster size C.
    pub fn size(&self) -> usize {
        self.root.len()
    }

    pub fn root_offsets(&self) -> &[Site] {
        &self.root
    }

    /// BS index of the b-th root offset.
    pub fn root_bs(&self) -> &[usize] {
        &self.root_bs
    }

    /// Number of clusters (one per BS translate).
    pub fn cluster_count(&self) -> usize {
        self.members.len()
    }

    /// BS indices of cluster `c`, in root order.
    pub fn members(&self, c: usize) -> &[usize] {
        &self.members[c]
    }

    /// How many clusters each BS belongs to.
    pub fn membership_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.members.len()];
        for m in &self.members {
            for &b in m {
                counts[b] += 1;
            }
        }
        counts
    }

    /// Centroid of cluster `c` in lattice coordinates.
    pub fn centroid<T: Real>(&self, layout: &Layout<T>, c: usize) -> Point<T> {
        let off = centroid_offset::<T>(&self.root);
        let s = layout.site_point(c);
        [s[0] + off[0], s[1] + off[1]]
    }

    /// Lattice coordinates of the b-th BS of cluster `c` (unwrapped).
    pub fn member_point<T: Real>(&self, layout: &Layout<T>, c: usize, b: usize) -> Point<T> {
        let s = layout.site_point(c);
        let r = self.root[b];
        [s[0] + lit(r[0] as f64), s[1] + lit(r[1] as f64)]
    }
}

fn centroid_offset<T: Real>(root: &[Site]) -> Point<T> {
    let n = count::<T>(root.len());
    let sx: i64 = root.iter().map(|s| s[0]).sum();
    let sy: i64 = root.iter().map(|s| s[1]).sum();
    [lit::<T>(sx as f64) / n, lit::<T>(sy as f64) / n]
}

fn triangle_roots(fam: TriangleFamily) -> Vec<Vec<Site>> {
    let tri: [Site; 3] = match fam {
        TriangleFamily::A => [[0, 0], [1, 0], [0, 1]],
        TriangleFamily::B => [[0, 0], [1, 0], [1, -1]],
    };
    // Each vertex in turn becomes the origin.
    (0..3)
        .map(|k| {
            let v = tri[k];
            let mut root = vec![[0, 0]];
            for (i, t) in tri.iter().enumerate() {
                if i != k {
                    root.push([t[0] - v[0], t[1] - v[1]]);
                }
            }
            root
        })
        .collect()
}
