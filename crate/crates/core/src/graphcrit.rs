//! Graph connectivity criterion for standard-basis generators: the system
//! driven by matrices `Omega_{i_k j_k}` is controllable on the sphere exactly
//! when the graph with an edge per generator index pair is connected. Isolated
//! vertices yield provably fixed basis points.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rankcond::StatePoint;

/// Standard skew basis element `Omega_ij = E_ij - E_ji` (1-indexed): +1 at
/// (i,j), -1 at (j,i). Note this differs by sign from the rotation-generator
/// convention that puts +1 at (j,i); both span the same line.
pub fn omega(n: usize, i: usize, j: usize) -> Result<DMatrix<f64>> {
    if i == j {
        return Err(Error::Input(format!("omega indices must differ, got ({i}, {j})")));
    }
    if i < 1 || j < 1 || i > n || j > n {
        return Err(Error::Input(format!(
            "omega indices ({i}, {j}) out of range 1..={n}"
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    m[(i - 1, j - 1)] = 1.0;
    m[(j - 1, i - 1)] = -1.0;
    Ok(m)
}

/// The graph associated to a standard-basis generator list: vertices v_1..v_n,
/// one edge per generator index pair (the drift edge included like any other).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSpec {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl EdgeSpec {
    /// Validates indices, normalizes each pair to i < j and drops duplicates
    /// (multiplicity is irrelevant to both connectivity and the spanned
    /// algebra).
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("vertex count must be positive".into()));
        }
        let mut normalized: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Input(format!("edge ({a}, {b}) is a self-loop")));
            }
            if a < 1 || b < 1 || a > n || b > n {
                return Err(Error::Input(format!(
                    "edge ({a}, {b}) out of range 1..={n}"
                )));
            }
            let e = (a.min(b), a.max(b));
            if !normalized.contains(&e) {
                normalized.push(e);
            }
        }
        Ok(Self { n, edges: normalized })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// One `Omega_ij` generator per (deduplicated) edge.
    pub fn generators(&self) -> Vec<DMatrix<f64>> {
        self.edges
            .iter()
            .map(|&(i, j)| omega(self.n, i, j).expect("validated edge"))
            .collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Connected components as sorted vertex lists (1-indexed), sorted by their
/// smallest vertex.
pub fn components(spec: &EdgeSpec) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(spec.n());
    for &(i, j) in spec.edges() {
        uf.union(i - 1, j - 1);
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); spec.n()];
    for v in 0..spec.n() {
        let r = uf.find(v);
        by_root[r].push(v + 1);
    }
    by_root.into_iter().filter(|c| !c.is_empty()).collect()
}

/// True iff all n vertices lie in a single component.
pub fn is_connected(spec: &EdgeSpec) -> bool {
    components(spec).len() == 1
}

/// The standard basis vectors e_k for every isolated vertex v_k: the generated
/// subgroup consists of block rotations that leave those coordinates
/// untouched, so each e_k is a fixed point of the action.
pub fn fixed_points(spec: &EdgeSpec) -> Vec<StatePoint> {
    let mut touched = vec![false; spec.n()];
    for &(i, j) in spec.edges() {
        touched[i - 1] = true;
        touched[j - 1] = true;
    }
    touched
        .iter()
        .enumerate()
        .filter(|(_, t)| !**t)
        .map(|(k, _)| {
            let mut e = nalgebra::DVector::zeros(spec.n());
            e[k] = 1.0;
            StatePoint::sphere(e).expect("unit vector")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn omega_matches_bloch_z_up_to_sign() {
        // the rotation-generator display puts +1 at (2,1); omega(3, 2, 1)
        // emits E_{21} - E_{12} which is exactly that matrix
        let m = omega(3, 2, 1).unwrap();
        let mut expected = DMatrix::zeros(3, 3);
        expected[(1, 0)] = 1.0;
        expected[(0, 1)] = -1.0;
        assert_eq!(m, expected);
    }

    #[test]
    fn omega_matches_chain4_b1() {
        let m = omega(4, 2, 3).unwrap();
        let mut expected = DMatrix::zeros(4, 4);
        expected[(1, 2)] = 1.0;
        expected[(2, 1)] = -1.0;
        assert_eq!(m, expected);
    }

    #[test]
    fn omega_antisymmetric_in_indices() {
        let sum = omega(5, 2, 4).unwrap() + omega(5, 4, 2).unwrap();
        assert_eq!(sum, DMatrix::zeros(5, 5));
    }

    #[test]
    fn omega_rejects_equal_indices() {
        assert!(matches!(omega(3, 2, 2), Err(Error::Input(_))));
    }

    #[test]
    fn chain4_graph_is_disconnected() {
        let spec = EdgeSpec::new(4, [(2, 3), (3, 4)]).unwrap();
        assert!(!is_connected(&spec));
        assert_eq!(components(&spec), vec![vec![1], vec![2, 3, 4]]);
    }

    #[test]
    fn spanning_tree_is_connected() {
        let spec = EdgeSpec::new(3, [(1, 3), (1, 2)]).unwrap();
        assert!(is_connected(&spec));
    }

    #[test]
    fn single_vertex_is_connected() {
        let spec = EdgeSpec::new(1, []).unwrap();
        assert!(is_connected(&spec));
    }

    #[test]
    fn duplicate_edges_are_idempotent() {
        let a = EdgeSpec::new(3, [(1, 2), (2, 1), (1, 2)]).unwrap();
        let b = EdgeSpec::new(3, [(1, 2)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_points_of_chain4_graph() {
        let spec = EdgeSpec::new(4, [(2, 3), (3, 4)]).unwrap();
        let fps = fixed_points(&spec);
        assert_eq!(fps.len(), 1);
        assert_eq!(fps[0].coords()[0], 1.0);
    }

    #[test]
    fn complete_graph_has_no_fixed_points() {
        let mut edges = Vec::new();
        for i in 1..=4 {
            for j in (i + 1)..=4 {
                edges.push((i, j));
            }
        }
        let spec = EdgeSpec::new(4, edges).unwrap();
        assert!(fixed_points(&spec).is_empty());
    }

    #[test]
    fn single_edge_in_n5_leaves_three_fixed_points() {
        let spec = EdgeSpec::new(5, [(1, 2)]).unwrap();
        let fps = fixed_points(&spec);
        assert_eq!(fps.len(), 3);
        for (fp, k) in fps.iter().zip([2usize, 3, 4]) {
            assert_eq!(fp.coords()[k], 1.0);
        }
    }

    #[test]
    fn connectivity_invariant_under_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let n = rng.gen_range(2..=7);
            let all: Vec<(usize, usize)> = (1..=n)
                .flat_map(|i| ((i + 1)..=n).map(move |j| (i, j)))
                .collect();
            let edges: Vec<(usize, usize)> = all
                .iter()
                .filter(|_| rng.gen_bool(0.4))
                .copied()
                .collect();
            let mut perm: Vec<usize> = (1..=n).collect();
            perm.shuffle(&mut rng);
            let relabeled: Vec<(usize, usize)> = edges
                .iter()
                .map(|&(i, j)| (perm[i - 1], perm[j - 1]))
                .collect();
            let a = EdgeSpec::new(n, edges).unwrap();
            let b = EdgeSpec::new(n, relabeled).unwrap();
            assert_eq!(is_connected(&a), is_connected(&b));
        }
    }
}
