//! The spillover matrix read as a directed graph: adjacency, reachability
//! closure, strongly connected cores, structure classes and spectrum.
//!
//! Edges point from the spillover source to the receiver: `F_ij > 0` is an
//! edge `j -> i`. Boolean matrices keep the row convention of `F`, so entry
//! `(i, j)` of the closure says whether `i` receives a direct or indirect
//! spillover from `j`.

use nalgebra::{Complex, DMatrix};
use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::model::SpilloverMatrix;
use crate::spectral::{self, PowerEstimate};

pub type BoolMatrix = DMatrix<bool>;

/// Largest dimension for which the full dense spectrum is reported.
pub const DENSE_SPECTRUM_LIMIT: usize = 16;
/// Default power scan depth for the eventual-nonnegativity test.
pub const EVENTUAL_K_MAX: usize = 50;
/// Default tolerance for the eventual-nonnegativity test, relative to the
/// max-norm of the rescaled power.
pub const EVENTUAL_TOL: f64 = 1e-12;

/// Structure labels; a matrix may carry several.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case", tag = "class", content = "blocks")]
pub enum StructureClass {
    Independent,
    OneWay,
    Separated(usize),
    StronglyConnected,
    Homogeneous,
    General,
}

impl std::fmt::Display for StructureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StructureClass::Independent => write!(f, "independent"),
            StructureClass::OneWay => write!(f, "one-way"),
            StructureClass::Separated(k) => write!(f, "separated({k})"),
            StructureClass::StronglyConnected => write!(f, "strongly-connected"),
            StructureClass::Homogeneous => write!(f, "homogeneous"),
            StructureClass::General => write!(f, "general"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EventualNonnegativity {
    pub flag: bool,
    pub witness: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub adjacency: BoolMatrix,
    pub closure: BoolMatrix,
    pub classes: Vec<StructureClass>,
    /// Non-trivial strongly connected components and self-loop singletons,
    /// each sorted ascending.
    pub cores: Vec<Vec<usize>>,
    pub irreducible: bool,
    pub weak_components: Vec<Vec<usize>>,
    pub eventually_nonnegative: EventualNonnegativity,
    /// Entries `(i, j)` with `F_ij < 0`.
    pub negative_entries: Vec<(usize, usize)>,
    pub dominant_eigenvalue: f64,
    pub power_estimate: PowerEstimate,
    /// `None` above [`DENSE_SPECTRUM_LIMIT`].
    pub spectrum: Option<Vec<Complex<f64>>>,
}

impl StructureReport {
    pub fn has(&self, class: StructureClass) -> bool {
        self.classes.contains(&class)
    }

    pub fn separated_blocks(&self) -> Option<usize> {
        self.classes.iter().find_map(|c| match c {
            StructureClass::Separated(k) => Some(*k),
            _ => None,
        })
    }
}

/// `a_ij = 1` iff `F_ij > 0`.
pub fn adjacency(matrix: &SpilloverMatrix) -> BoolMatrix {
    matrix.entries().map(|x| x > 0.0)
}

/// Reachability closure `A + A^2 + ... + A^n` in the boolean semiring,
/// computed with Warshall's algorithm.
pub fn closure(adj: &BoolMatrix) -> BoolMatrix {
    let n = adj.nrows();
    assert_eq!(n, adj.ncols(), "closure needs a square matrix");
    let mut r = adj.clone();
    for k in 0..n {
        for i in 0..n {
            if !r[(i, k)] {
                continue;
            }
            for j in 0..n {
                if r[(k, j)] {
                    r[(i, j)] = true;
                }
            }
        }
    }
    r
}

fn digraph(pattern: &BoolMatrix) -> DiGraph<(), ()> {
    let n = pattern.nrows();
    let mut g = DiGraph::with_capacity(n, 0);
    for _ in 0..n {
        g.add_node(());
    }
    for i in 0..n {
        for j in 0..n {
            if pattern[(i, j)] {
                g.add_edge(NodeIndex::new(j), NodeIndex::new(i), ());
            }
        }
    }
    g
}

/// Strongly connected components of the pattern's digraph, each sorted,
/// listed sources first (a topological order of the condensation).
pub fn strongly_connected_components(pattern: &BoolMatrix) -> Vec<Vec<usize>> {
    let g = digraph(pattern);
    // tarjan_scc yields reverse topological order
    tarjan_scc(&g)
        .into_iter()
        .rev()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|v| v.index()).collect();
            c.sort_unstable();
            c
        })
        .collect()
}

/// Cores: components of size at least two plus self-loop singletons,
/// ordered by smallest member.
pub fn cores(adj: &BoolMatrix) -> Vec<Vec<usize>> {
    let mut cores: Vec<Vec<usize>> = strongly_connected_components(adj)
        .into_iter()
        .filter(|c| c.len() >= 2 || adj[(c[0], c[0])])
        .collect();
    cores.sort_unstable_by_key(|c| c[0]);
    cores
}

/// An ordering under which `F` is strictly lower triangular (sources
/// first), or `None` when the graph has a cycle or self-loop.
pub fn triangularizing_order(adj: &BoolMatrix) -> Option<Vec<usize>> {
    if (0..adj.nrows()).any(|i| adj[(i, i)]) {
        return None;
    }
    toposort(&digraph(adj), None)
        .ok()
        .map(|order| order.into_iter().map(|v| v.index()).collect())
}

/// Connected components of the undirected version of `pattern`.
pub fn weak_components(pattern: &BoolMatrix) -> Vec<Vec<usize>> {
    let n = pattern.nrows();
    let mut uf = UnionFind::<usize>::new(n);
    for i in 0..n {
        for j in 0..n {
            if pattern[(i, j)] {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = uf.find(i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(i);
    }
    groups
}

/// Smallest `k <= k_max` with `F^k >= -tol` entrywise. Powers are rescaled
/// to unit max-norm after every multiplication, which keeps the sign
/// pattern and avoids overflow.
pub fn is_eventually_nonnegative(
    matrix: &SpilloverMatrix,
    k_max: usize,
    tol: f64,
) -> EventualNonnegativity {
    assert!(k_max >= 1, "k_max must be at least 1");
    let base = matrix.entries();
    let mut power = base.clone();
    for k in 1..=k_max {
        let scale = power.amax();
        if scale == 0.0 {
            // nilpotent: the zero matrix is nonnegative
            return EventualNonnegativity {
                flag: true,
                witness: Some(k),
            };
        }
        power /= scale;
        if power.iter().all(|&x| x >= -tol) {
            return EventualNonnegativity {
                flag: true,
                witness: Some(k),
            };
        }
        power = &power * base;
    }
    EventualNonnegativity {
        flag: false,
        witness: None,
    }
}

/// Full structural report of a spillover matrix.
pub fn classify(matrix: &SpilloverMatrix) -> StructureReport {
    let n = matrix.n();
    let adj = adjacency(matrix);
    let clo = closure(&adj);
    let cores = cores(&adj);
    let sccs = strongly_connected_components(&adj);
    let irreducible = sccs.len() == 1;
    let weak = weak_components(&clo);
    let eventual = if matrix.is_nonnegative() {
        EventualNonnegativity {
            flag: true,
            witness: Some(1),
        }
    } else {
        is_eventually_nonnegative(matrix, EVENTUAL_K_MAX, EVENTUAL_TOL)
    };
    let negative_entries: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| matrix.get(i, j) < 0.0)
        .collect();

    let mut classes = Vec::new();
    if eventual.flag {
        let off_diagonal_free = (0..n).all(|i| (0..n).all(|j| i == j || !clo[(i, j)]));
        if off_diagonal_free {
            classes.push(StructureClass::Independent);
        }
        if cores.is_empty() {
            classes.push(StructureClass::OneWay);
        }
        if weak.len() >= 2 {
            classes.push(StructureClass::Separated(weak.len()));
        }
        if clo.iter().all(|&b| b) {
            classes.push(StructureClass::StronglyConnected);
        }
        let f0 = matrix.get(0, 0);
        if f0 > 0.0 && matrix.entries().iter().all(|&x| x == f0) {
            classes.push(StructureClass::Homogeneous);
        }
    }
    if classes.is_empty() {
        classes.push(StructureClass::General);
    }

    let entries = matrix.entries();
    let power_estimate = spectral::power_dominant(entries);
    let spectrum = (n <= DENSE_SPECTRUM_LIMIT).then(|| spectral::spectrum(entries));
    let dominant_eigenvalue = if matrix.is_nonnegative() {
        spectral::perron_root(entries)
    } else if let Some(eigs) = &spectrum {
        spectral::max_real_part(eigs)
    } else {
        power_estimate.value
    };

    StructureReport {
        adjacency: adj,
        closure: clo,
        classes,
        cores,
        irreducible,
        weak_components: weak,
        eventually_nonnegative: eventual,
        negative_entries,
        dominant_eigenvalue,
        power_estimate,
        spectrum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> SpilloverMatrix {
        SpilloverMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn ones(b: &BoolMatrix) -> usize {
        b.iter().filter(|&&x| x).count()
    }

    #[test]
    fn zero_matrix_has_no_edges() {
        let f = SpilloverMatrix::zeros(3);
        let a = adjacency(&f);
        assert_eq!(ones(&a), 0);
        let r = classify(&f);
        assert!(r.has(StructureClass::Independent));
        assert!(r.has(StructureClass::OneWay));
        assert_eq!(r.separated_blocks(), Some(3));
        assert_eq!(r.dominant_eigenvalue, 0.0);
    }

    #[test]
    fn homogeneous_matrix_is_all_ones() {
        let f = SpilloverMatrix::homogeneous(3, 0.2).unwrap();
        let r = classify(&f);
        assert_eq!(ones(&r.adjacency), 9);
        assert!(r.has(StructureClass::Homogeneous));
        assert!(r.has(StructureClass::StronglyConnected));
        assert!(r.irreducible);
        assert!((r.dominant_eigenvalue - 0.6).abs() < 1e-12);
    }

    #[test]
    fn block_diagonal_closure_stays_block_diagonal() {
        let f = m(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 2.0],
            &[0.0, 0.0, 2.0, 0.0],
        ]);
        let r = classify(&f);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(r.closure[(i, j)], (i < 2) == (j < 2));
            }
        }
        assert_eq!(r.cores, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(r.separated_blocks(), Some(2));
        assert!(!r.irreducible);
    }

    #[test]
    fn self_loops_are_cores_and_not_one_way() {
        let f = m(&[&[0.0, 0.0], &[1.0, 0.5]]);
        let r = classify(&f);
        assert_eq!(r.cores, vec![vec![1]]);
        assert!(!r.has(StructureClass::OneWay));
        assert!(triangularizing_order(&r.adjacency).is_none());
    }

    #[test]
    fn eventually_nonnegative_witnesses() {
        let f = m(&[&[1.0, 2.0], &[0.0, 3.0]]);
        assert_eq!(
            is_eventually_nonnegative(&f, 5, 0.0),
            EventualNonnegativity {
                flag: true,
                witness: Some(1)
            }
        );
        // F^2 = 0
        let f = m(&[&[0.0, -1.0], &[0.0, 0.0]]);
        assert_eq!(is_eventually_nonnegative(&f, 5, 0.0).witness, Some(2));
        // F^2 = diag(1, 0)
        let f = m(&[&[-1.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(is_eventually_nonnegative(&f, 5, 0.0).witness, Some(2));
    }

    #[test]
    fn negative_matrix_without_eventual_nonnegativity_is_general() {
        // F^k = [[1, -k], [0, 1]]
        let f = m(&[&[1.0, -1.0], &[0.0, 1.0]]);
        let r = classify(&f);
        assert!(!r.eventually_nonnegative.flag);
        assert_eq!(r.classes, vec![StructureClass::General]);
        assert_eq!(r.negative_entries, vec![(0, 1)]);
    }

    #[test]
    fn large_matrices_skip_the_dense_spectrum() {
        let n = DENSE_SPECTRUM_LIMIT + 1;
        let f = SpilloverMatrix::homogeneous(n, 1.0).unwrap();
        let r = classify(&f);
        assert!(r.spectrum.is_none());
        assert!((r.dominant_eigenvalue - n as f64).abs() < 1e-9);
        assert!((r.power_estimate.value - n as f64).abs() < 1e-9);
    }

    #[test]
    fn class_names() {
        assert_eq!(StructureClass::Separated(3).to_string(), "separated(3)");
        assert_eq!(StructureClass::OneWay.to_string(), "one-way");
    }
}
