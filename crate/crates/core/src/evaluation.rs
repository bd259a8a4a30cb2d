//! Markov-equivalence machinery (DAG to CPDAG conversion) and the accuracy
//! metrics used by the experiment harness.
//!
//! The CPDAG of a DAG's equivalence class is computed by orienting
//! v-structures on the skeleton and closing under the four standard
//! orientation-propagation rules until fixpoint. Correctness is certified in
//! the test suite against an enumeration oracle that intersects edge
//! orientations across all members of the class.

use thiserror::Error;

use crate::model::{Cpdag, Dag};

/// Metric errors.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    /// Inputs live on different node counts.
    #[error("dimension mismatch: {0} vs {1} nodes")]
    DimensionMismatch(usize, usize),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    None,
    Undirected,
    /// Directed following the (row -> col) convention.
    Directed,
}

struct Pattern {
    m: usize,
    marks: Vec<Mark>, // row-major; Directed at (i,j) means i -> j
}

impl Pattern {
    fn get(&self, i: usize, j: usize) -> Mark {
        self.marks[i * self.m + j]
    }

    fn adjacent(&self, i: usize, j: usize) -> bool {
        self.get(i, j) != Mark::None || self.get(j, i) != Mark::None
    }

    fn undirected(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == Mark::Undirected
    }

    fn directed(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == Mark::Directed
    }

    fn orient(&mut self, i: usize, j: usize) {
        self.marks[i * self.m + j] = Mark::Directed;
        self.marks[j * self.m + i] = Mark::None;
    }
}

/// CPDAG of the Markov equivalence class of `dag`.
///
/// An edge is directed in the output iff it carries that direction in every
/// member of the class; all other skeleton edges come out undirected.
pub fn dag_to_cpdag(dag: &Dag) -> Cpdag {
    let m = dag.node_count();
    let mut pat = Pattern { m, marks: vec![Mark::None; m * m] };
    for &(p, c) in dag.edges() {
        pat.marks[p * m + c] = Mark::Undirected;
        pat.marks[c * m + p] = Mark::Undirected;
    }
    // v-structure orientations
    for (i, j, k) in dag.v_structures() {
        pat.orient(i, k);
        pat.orient(j, k);
    }
    // orientation propagation to fixpoint
    loop {
        let mut changed = false;
        for a in 0..m {
            for b in 0..m {
                if !pat.undirected(a, b) {
                    continue;
                }
                if rule_applies(&pat, a, b) {
                    pat.orient(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut out = Cpdag::empty(m);
    for i in 0..m {
        for j in (i + 1)..m {
            if pat.directed(i, j) {
                out.set_directed(i, j);
            } else if pat.directed(j, i) {
                out.set_directed(j, i);
            } else if pat.undirected(i, j) {
                out.set_undirected(i, j);
            }
        }
    }
    out
}

/// Whether any of the four propagation rules forces `a - b` into `a -> b`.
fn rule_applies(pat: &Pattern, a: usize, b: usize) -> bool {
    let m = pat.m;
    // R1: c -> a, a - b, c and b nonadjacent  =>  a -> b
    for c in 0..m {
        if pat.directed(c, a) && !pat.adjacent(c, b) {
            return true;
        }
    }
    // R2: a -> c -> b with a - b  =>  a -> b
    for c in 0..m {
        if pat.directed(a, c) && pat.directed(c, b) {
            return true;
        }
    }
    // R3: a - c -> b and a - d -> b with c, d nonadjacent  =>  a -> b
    for c in 0..m {
        if !(pat.undirected(a, c) && pat.directed(c, b)) {
            continue;
        }
        for d in (c + 1)..m {
            if pat.undirected(a, d) && pat.directed(d, b) && !pat.adjacent(c, d) {
                return true;
            }
        }
    }
    // R4: a - c, c -> d, d -> b, with c and b nonadjacent and a, d adjacent
    //     =>  a -> b
    for c in 0..m {
        if !pat.undirected(a, c) || pat.adjacent(c, b) {
            continue;
        }
        for d in 0..m {
            if pat.directed(c, d) && pat.directed(d, b) && pat.adjacent(a, d) {
                return true;
            }
        }
    }
    false
}

/// Markov equivalence: same skeleton and same v-structure set.
pub fn mec_equal(g1: &Dag, g2: &Dag) -> bool {
    g1.node_count() == g2.node_count()
        && g1.skeleton() == g2.skeleton()
        && g1.v_structures() == g2.v_structures()
}

/// Hamming distance between CPDAG adjacency matrices.
pub fn d_cpdag(a: &Cpdag, b: &Cpdag) -> Result<usize, EvalError> {
    let m = a.node_count();
    if b.node_count() != m {
        return Err(EvalError::DimensionMismatch(m, b.node_count()));
    }
    let mut count = 0;
    for i in 0..m {
        for j in 0..m {
            if a.get(i, j) != b.get(i, j) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// `d_cpdag` scaled by the true edge count (the paper-table variant).
pub fn d_cpdag_scaled(a: &Cpdag, b: &Cpdag, true_edges: usize) -> Result<f64, EvalError> {
    Ok(d_cpdag(a, b)? as f64 / true_edges.max(1) as f64)
}

/// Skeleton-level accuracy numbers.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SkeletonMetrics {
    /// Symmetric-difference size between undirected skeletons.
    pub shd_skeleton: usize,
    /// True positive rate (1 when the true skeleton is empty).
    pub tpr: f64,
    /// False positive rate (0 when the true skeleton is complete).
    pub fpr: f64,
}

/// Structural Hamming distance of skeletons plus TPR/FPR.
pub fn skeleton_metrics(truth: &Dag, est: &Dag) -> Result<SkeletonMetrics, EvalError> {
    let m = truth.node_count();
    if est.node_count() != m {
        return Err(EvalError::DimensionMismatch(m, est.node_count()));
    }
    let t = truth.skeleton();
    let e = est.skeleton();
    let inter = t.intersection(&e).count();
    let extra = e.difference(&t).count();
    let missing = t.difference(&e).count();
    let total_pairs = m * (m - 1) / 2;
    let tpr = if t.is_empty() { 1.0 } else { inter as f64 / t.len() as f64 };
    let negatives = total_pairs - t.len();
    let fpr = if negatives == 0 { 0.0 } else { extra as f64 / negatives as f64 };
    Ok(SkeletonMetrics { shd_skeleton: extra + missing, tpr, fpr })
}

/// Enumeration oracle: the CPDAG obtained by intersecting orientations over
/// every DAG in the Markov equivalence class. Exponential; test use only.
pub fn cpdag_by_enumeration(dag: &Dag) -> Cpdag {
    let m = dag.node_count();
    let members: Vec<Dag> = crate::scoring::enumerate_dags(m, None)
        .expect("oracle restricted to m <= 5")
        .into_iter()
        .filter(|g| mec_equal(g, dag))
        .collect();
    let mut out = Cpdag::empty(m);
    for i in 0..m {
        for j in (i + 1)..m {
            if !dag.skeleton().contains(&(i, j)) {
                continue;
            }
            let all_forward = members.iter().all(|g| g.has_edge(i, j));
            let all_backward = members.iter().all(|g| g.has_edge(j, i));
            if all_forward {
                out.set_directed(i, j);
            } else if all_backward {
                out.set_directed(j, i);
            } else {
                out.set_undirected(i, j);
            }
        }
    }
    out
}
