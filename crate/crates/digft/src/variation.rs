//! Variation measures for graph signals: TV, DV, IDV, and CDV, together with
//! the complex-to-real embedding and analytic gradients of IDV/CDV.
//!
//! IDV splits each edge weight into positive and negative parts and penalizes
//! positive-clipped differences with the former and negative-clipped
//! differences with the latter:
//!
//! ```text
//! IDV(x) = sum_ij [A_ij]+ [x_i - x_j]+^2 + [A_ij]- [x_i - x_j]-^2
//! ```
//!
//! CDV is IDV applied to the 2N-dimensional real embedding of a complex
//! adjacency matrix and signal; the embedding is the ground truth here and
//! the expanded per-component sum is a verified identity in the tests.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{C64, Graph, GraphSignal, ValueClass, WeightClass};

/// Positive part `max(0, s)`.
#[inline]
pub fn pos_part(s: f64) -> f64 {
    if s > 0.0 {
        s
    } else {
        0.0
    }
}

/// Negative part `-min(0, s)`; always nonnegative.
#[inline]
pub fn neg_part(s: f64) -> f64 {
    if s < 0.0 {
        -s
    } else {
        0.0
    }
}

/// The four variation measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum VariationKind {
    Tv,
    Dv,
    Idv,
    Cdv,
}

impl VariationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariationKind::Tv => "tv",
            VariationKind::Dv => "dv",
            VariationKind::Idv => "idv",
            VariationKind::Cdv => "cdv",
        }
    }
}

/// Variation kinds a GFT basis can be built against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FrequencyKind {
    Idv,
    Cdv,
}

impl FrequencyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrequencyKind::Idv => "idv",
            FrequencyKind::Cdv => "cdv",
        }
    }
}

/// 2N x 2N real embedding of a complex adjacency matrix,
/// `[[Re(A), -Im(A)], [Im(A), Re(A)]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealEmbedding {
    a_tilde: DMatrix<f64>,
    n: usize,
}

impl RealEmbedding {
    pub fn a_tilde(&self) -> &DMatrix<f64> {
        &self.a_tilde
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Builds the real block embedding of the graph's adjacency matrix.
pub fn complex_embed(g: &Graph) -> RealEmbedding {
    let n = g.n();
    let a = g.adj();
    let mut t = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            t[(i, j)] = z.re;
            t[(i, j + n)] = -z.im;
            t[(i + n, j)] = z.im;
            t[(i + n, j + n)] = z.re;
        }
    }
    RealEmbedding { a_tilde: t, n }
}

/// Stacks a complex vector as `[Re(x); Im(x)]`.
pub fn embed_signal(x: &DVector<C64>) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(2 * n, |k, _| if k < n { x[k].re } else { x[k - n].im })
}

/// Inverse of [`embed_signal`].
pub fn unembed_signal(y: &DVector<f64>) -> DVector<C64> {
    let n = y.len() / 2;
    DVector::from_fn(n, |k, _| C64::new(y[k], y[k + n]))
}

/// IDV sum over a real adjacency matrix; shared kernel for IDV and CDV.
pub(crate) fn idv_kernel(adj: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let n = adj.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = adj[(i, j)];
            if a == 0.0 {
                continue;
            }
            let d = x[i] - x[j];
            if a > 0.0 {
                let c = pos_part(d);
                acc += a * c * c;
            } else {
                let c = neg_part(d);
                acc += (-a) * c * c;
            }
        }
    }
    acc
}

/// Gradient of [`idv_kernel`] with respect to the signal.
pub(crate) fn idv_grad_kernel(adj: &DMatrix<f64>, u: &DVector<f64>) -> DVector<f64> {
    let n = adj.nrows();
    let mut g = DVector::<f64>::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let a = adj[(i, j)];
            if a == 0.0 {
                continue;
            }
            let d = u[i] - u[j];
            if a > 0.0 {
                let c = 2.0 * a * pos_part(d);
                g[i] += c;
                g[j] -= c;
            } else {
                let c = 2.0 * (-a) * neg_part(d);
                g[i] -= c;
                g[j] += c;
            }
        }
    }
    g
}

fn require_class(g: &Graph, op: &'static str, max: WeightClass, required: &'static str) -> Result<()> {
    if g.weight_class() > max {
        return Err(Error::WeightClass {
            op,
            required,
            actual: g.weight_class().as_str(),
        });
    }
    Ok(())
}

fn require_real_signal(x: &GraphSignal, op: &'static str) -> Result<DVector<f64>> {
    if x.value_class() == ValueClass::Complex {
        return Err(Error::SignalClass { op });
    }
    x.real_values()
}

const SYMMETRY_TOL: f64 = 1e-10;

/// Total variation `sum_{i<j} A_ij (x_i - x_j)^2` on a symmetric nonnegative
/// graph; equals the Laplacian quadratic form.
pub fn total_variation(g: &Graph, x: &GraphSignal) -> Result<f64> {
    require_class(g, "total_variation", WeightClass::Nonnegative, "nonnegative")?;
    if !g.is_symmetric(SYMMETRY_TOL) {
        let (i, j, delta) = worst_asymmetry(g);
        return Err(Error::Asymmetry { i, j, delta });
    }
    let xr = require_real_signal(x, "total_variation")?;
    check_len(g, x.len())?;
    let a = g.adj();
    let n = g.n();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = xr[i] - xr[j];
            acc += a[(i, j)].re * d * d;
        }
    }
    Ok(acc)
}

fn worst_asymmetry(g: &Graph) -> (usize, usize, f64) {
    let mut worst = (0, 0, 0.0);
    for i in 0..g.n() {
        for j in (i + 1)..g.n() {
            let delta = (g.adj()[(i, j)] - g.adj()[(j, i)]).norm();
            if delta > worst.2 {
                worst = (i, j, delta);
            }
        }
    }
    worst
}

fn check_len(g: &Graph, len: usize) -> Result<()> {
    if len != g.n() {
        return Err(Error::Dimension(format!(
            "signal length {len} does not match graph size {}",
            g.n()
        )));
    }
    Ok(())
}

/// Directed variation `sum_ij A_ij [x_i - x_j]+^2` on a nonnegative graph.
pub fn directed_variation(g: &Graph, x: &GraphSignal) -> Result<f64> {
    require_class(g, "directed_variation", WeightClass::Nonnegative, "nonnegative")?;
    let xr = require_real_signal(x, "directed_variation")?;
    check_len(g, x.len())?;
    let adj = g.real_adj()?;
    Ok(idv_kernel(&adj, &xr))
}

/// Indefinite directed variation on a real-weighted graph.
pub fn indefinite_dv(g: &Graph, x: &GraphSignal) -> Result<f64> {
    require_class(g, "indefinite_dv", WeightClass::Indefinite, "indefinite-or-narrower")?;
    let xr = require_real_signal(x, "indefinite_dv")?;
    check_len(g, x.len())?;
    let adj = g.real_adj()?;
    Ok(idv_kernel(&adj, &xr))
}

/// Complex directed variation: IDV of the real embedding. Accepts any
/// weight and value class.
pub fn complex_dv(g: &Graph, x: &GraphSignal) -> Result<f64> {
    check_len(g, x.len())?;
    let emb = complex_embed(g);
    let xt = embed_signal(x.values());
    Ok(idv_kernel(emb.a_tilde(), &xt))
}

/// Dispatches to the four measures, enforcing each one's class requirement.
pub fn variation(kind: VariationKind, g: &Graph, x: &GraphSignal) -> Result<f64> {
    match kind {
        VariationKind::Tv => total_variation(g, x),
        VariationKind::Dv => directed_variation(g, x),
        VariationKind::Idv => indefinite_dv(g, x),
        VariationKind::Cdv => complex_dv(g, x),
    }
}

/// Analytic gradient of IDV at `u`.
///
/// Componentwise, incoming weights (column i) pair with differences `u - u_i`
/// and outgoing weights (row i) with `u_i - u`:
///
/// ```text
/// g_i = 2( [A_i.]+ . [u_i 1 - u]+  -  [A_i.]- . [u_i 1 - u]-
///        - [A.i]+ . [u - u_i 1]+  +  [A.i]- . [u - u_i 1]- )
/// ```
pub fn idv_gradient(g: &Graph, u: &DVector<f64>) -> Result<DVector<f64>> {
    require_class(g, "idv_gradient", WeightClass::Indefinite, "indefinite-or-narrower")?;
    check_len(g, u.len())?;
    let adj = g.real_adj()?;
    Ok(idv_grad_kernel(&adj, u))
}

/// Gradient of CDV at a complex point, computed through the real embedding
/// and recombined as `g = g_tilde[0..N] + i g_tilde[N..2N]`.
pub fn cdv_gradient(g: &Graph, u: &DVector<C64>) -> Result<DVector<C64>> {
    check_len(g, u.len())?;
    let emb = complex_embed(g);
    let ut = embed_signal(u);
    let gt = idv_grad_kernel(emb.a_tilde(), &ut);
    Ok(unembed_signal(&gt))
}

/// Precomputed evaluator for the frequency measure used during basis
/// optimization. Operates on complex-stored vectors; the IDV path requires
/// the imaginary parts to be zero.
///
/// Nonzero weights are flattened into an edge list once (row-major, the same
/// accumulation order as the dense kernels) so the per-evaluation cost scales
/// with the edge count rather than N^2.
#[derive(Debug, Clone)]
pub struct VariationEngine {
    kind: FrequencyKind,
    n: usize,
    /// (i, j, weight) over N indices for IDV, 2N embedded indices for CDV.
    edges: Vec<(u32, u32, f64)>,
    dim: usize,
}

fn edge_list(adj: &DMatrix<f64>) -> Vec<(u32, u32, f64)> {
    let n = adj.nrows();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let w = adj[(i, j)];
            if w != 0.0 {
                edges.push((i as u32, j as u32, w));
            }
        }
    }
    edges
}

impl VariationEngine {
    pub fn new(g: &Graph, kind: FrequencyKind) -> Result<Self> {
        let (edges, dim) = match kind {
            FrequencyKind::Idv => {
                require_class(g, "variation engine", WeightClass::Indefinite, "indefinite-or-narrower")?;
                (edge_list(&g.real_adj()?), g.n())
            }
            FrequencyKind::Cdv => {
                let emb = complex_embed(g);
                (edge_list(emb.a_tilde()), 2 * g.n())
            }
        };
        Ok(VariationEngine {
            kind,
            n: g.n(),
            edges,
            dim,
        })
    }

    pub fn kind(&self) -> FrequencyKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn scratch(&self, u: &DVector<C64>) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        match self.kind {
            FrequencyKind::Idv => {
                for k in 0..self.n {
                    x[k] = u[k].re;
                }
            }
            FrequencyKind::Cdv => {
                for k in 0..self.n {
                    x[k] = u[k].re;
                    x[k + self.n] = u[k].im;
                }
            }
        }
        x
    }

    pub fn value(&self, u: &DVector<C64>) -> f64 {
        let x = self.scratch(u);
        let mut acc = 0.0;
        for &(i, j, w) in &self.edges {
            let d = x[i as usize] - x[j as usize];
            if w > 0.0 {
                let c = pos_part(d);
                acc += w * c * c;
            } else {
                let c = neg_part(d);
                acc += (-w) * c * c;
            }
        }
        acc
    }

    pub fn grad(&self, u: &DVector<C64>) -> DVector<C64> {
        let x = self.scratch(u);
        let mut g = vec![0.0; self.dim];
        for &(i, j, w) in &self.edges {
            let d = x[i as usize] - x[j as usize];
            if w > 0.0 {
                let c = 2.0 * w * pos_part(d);
                g[i as usize] += c;
                g[j as usize] -= c;
            } else {
                let c = 2.0 * (-w) * neg_part(d);
                g[i as usize] -= c;
                g[j as usize] += c;
            }
        }
        match self.kind {
            FrequencyKind::Idv => DVector::from_fn(self.n, |k, _| C64::new(g[k], 0.0)),
            FrequencyKind::Cdv => DVector::from_fn(self.n, |k, _| C64::new(g[k], g[k + self.n])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn graph2(a12: C64, a21: C64) -> Graph {
        Graph::from_complex(DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), a12, a21, c(0.0, 0.0)]))
            .unwrap()
    }

    fn real_signal(v: &[f64]) -> GraphSignal {
        GraphSignal::from_real(DVector::from_row_slice(v)).unwrap()
    }

    #[test]
    fn pos_neg_parts() {
        assert_eq!(pos_part(2.5), 2.5);
        assert_eq!(neg_part(2.5), 0.0);
        assert_eq!(pos_part(-3.0), 0.0);
        assert_eq!(neg_part(-3.0), 3.0);
        assert_eq!(pos_part(0.0), 0.0);
        assert_eq!(neg_part(0.0), 0.0);
    }

    #[test]
    fn tv_two_node() {
        let g = graph2(c(1.0, 0.0), c(1.0, 0.0));
        let tv = total_variation(&g, &real_signal(&[1.0, 0.0])).unwrap();
        assert!((tv - 1.0).abs() < 1e-12);
        // Constant signal has zero variation.
        let tv = total_variation(&g, &real_signal(&[3.0, 3.0])).unwrap();
        assert_eq!(tv, 0.0);
    }

    #[test]
    fn tv_rejects_directed() {
        let g = graph2(c(1.0, 0.0), c(0.0, 0.0));
        assert!(matches!(
            total_variation(&g, &real_signal(&[1.0, 0.0])),
            Err(Error::Asymmetry { .. })
        ));
    }

    #[test]
    fn dv_examples() {
        // A_12 = 2, x = (3, 1): 2 * (2)^2 = 8.
        let g = graph2(c(2.0, 0.0), c(0.0, 0.0));
        assert!((directed_variation(&g, &real_signal(&[3.0, 1.0])).unwrap() - 8.0).abs() < 1e-12);
        // Flow against the edge direction is clipped away.
        let g = graph2(c(1.0, 0.0), c(0.0, 0.0));
        assert_eq!(directed_variation(&g, &real_signal(&[0.0, 1.0])).unwrap(), 0.0);
        // Undirected 2-cycle matches TV.
        let g = graph2(c(1.0, 0.0), c(1.0, 0.0));
        let x = real_signal(&[1.0, 0.0]);
        let dv = directed_variation(&g, &x).unwrap();
        let tv = total_variation(&g, &x).unwrap();
        assert!((dv - 1.0).abs() < 1e-12);
        assert!((dv - tv).abs() < 1e-12);
    }

    #[test]
    fn dv_rejects_indefinite() {
        let g = graph2(c(-1.0, 0.0), c(0.0, 0.0));
        assert!(matches!(
            directed_variation(&g, &real_signal(&[1.0, 0.0])),
            Err(Error::WeightClass { .. })
        ));
    }

    #[test]
    fn idv_examples() {
        let g = graph2(c(-1.0, 0.0), c(0.0, 0.0));
        // [A]- = 1 and [x1 - x2]- = 1.
        assert!((indefinite_dv(&g, &real_signal(&[0.0, 1.0])).unwrap() - 1.0).abs() < 1e-12);
        // Positive difference sees only [A]+ = 0.
        assert_eq!(indefinite_dv(&g, &real_signal(&[1.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn idv_reduces_to_dv_on_nonnegative() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = 5;
            let mut adj = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.4) {
                        adj[(i, j)] = rng.gen_range(0.0..2.0);
                    }
                }
            }
            let g = Graph::from_real(adj).unwrap();
            let x = real_signal(&(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
            let dv = directed_variation(&g, &x).unwrap();
            let idv = indefinite_dv(&g, &x).unwrap();
            assert!((dv - idv).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_block_structure() {
        // A_12 = i, N = 2: entries -1 at (0,3) and +1 at (2,1), zeros elsewhere.
        let g = graph2(c(0.0, 1.0), c(0.0, 0.0));
        let emb = complex_embed(&g);
        let t = emb.a_tilde();
        assert_eq!(t[(0, 3)], -1.0);
        assert_eq!(t[(2, 1)], 1.0);
        let mut nonzero = 0;
        for v in t.iter() {
            if *v != 0.0 {
                nonzero += 1;
            }
        }
        assert_eq!(nonzero, 2);

        // Real A embeds block-diagonally.
        let g = graph2(c(2.0, 0.0), c(-1.0, 0.0));
        let t = complex_embed(&g);
        let t = t.a_tilde();
        assert_eq!(t[(0, 1)], 2.0);
        assert_eq!(t[(2, 3)], 2.0);
        assert_eq!(t[(1, 0)], -1.0);
        assert_eq!(t[(3, 2)], -1.0);
        assert_eq!(t[(0, 3)], 0.0);
    }

    #[test]
    fn embedding_matvec_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = 4;
            let mut adj = DMatrix::<C64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        adj[(i, j)] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    }
                }
            }
            let g = Graph::from_complex(adj.clone()).unwrap();
            let x = DVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let emb = complex_embed(&g);
            let y_t = emb.a_tilde() * embed_signal(&x);
            let y = unembed_signal(&y_t);
            let direct = &adj * &x;
            for k in 0..n {
                assert!((y[k] - direct[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn embed_signal_example() {
        let x = dvector![c(0.0, 1.0), c(0.0, 0.0)];
        let xt = embed_signal(&x);
        assert_eq!(xt.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
        // Unit norm preserved.
        assert!((xt.norm() - x.norm()).abs() < 1e-15);
    }

    #[test]
    fn cdv_examples() {
        // A_12 = i, x = (i, 0) -> 1.
        let g = graph2(c(0.0, 1.0), c(0.0, 0.0));
        let x = GraphSignal::from_complex(dvector![c(0.0, 1.0), c(0.0, 0.0)]).unwrap();
        assert!((complex_dv(&g, &x).unwrap() - 1.0).abs() < 1e-12);

        // Real A, real x: CDV = IDV.
        let g = graph2(c(-2.0, 0.0), c(1.0, 0.0));
        let x = real_signal(&[0.4, -0.3]);
        assert!(
            (complex_dv(&g, &x).unwrap() - indefinite_dv(&g, &x).unwrap()).abs() < 1e-12
        );
    }

    #[test]
    fn cdv_splits_on_real_graphs() {
        // Real A, complex x: CDV = IDV(A, Re x) + IDV(A, Im x).
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..50 {
            let n = 5;
            let mut adj = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.5) {
                        adj[(i, j)] = rng.gen_range(-1.0..1.0);
                    }
                }
            }
            let g = Graph::from_real(adj).unwrap();
            let xc = DVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let x = GraphSignal::from_complex(xc.clone()).unwrap();
            let re = GraphSignal::from_real(xc.map(|z| z.re)).unwrap();
            let im = GraphSignal::from_real(xc.map(|z| z.im)).unwrap();
            let lhs = complex_dv(&g, &x).unwrap();
            let rhs = indefinite_dv(&g, &re).unwrap() + indefinite_dv(&g, &im).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn variation_dispatch_and_class_errors() {
        let g = graph2(c(1.0, 0.0), c(0.0, 0.0));
        let x = real_signal(&[1.0, 0.0]);
        // IDV on a nonnegative graph equals DV.
        assert_eq!(
            variation(VariationKind::Idv, &g, &x).unwrap(),
            variation(VariationKind::Dv, &g, &x).unwrap()
        );
        // TV on a directed graph is a class/asymmetry error.
        assert!(variation(VariationKind::Tv, &g, &x).is_err());
        // CDV on an indefinite graph with a real signal equals IDV.
        let gi = graph2(c(-1.0, 0.0), c(0.0, 0.0));
        let x = real_signal(&[0.0, 1.0]);
        assert!(
            (variation(VariationKind::Cdv, &gi, &x).unwrap()
                - variation(VariationKind::Idv, &gi, &x).unwrap())
            .abs()
                < 1e-15
        );
    }

    #[test]
    fn idv_gradient_examples() {
        // A_12 = 1, u = (1, 0) -> (2, -2).
        let g = graph2(c(1.0, 0.0), c(0.0, 0.0));
        let grad = idv_gradient(&g, &dvector![1.0, 0.0]).unwrap();
        assert!((grad[0] - 2.0).abs() < 1e-12);
        assert!((grad[1] + 2.0).abs() < 1e-12);

        // Constant u has zero gradient.
        let g = graph2(c(-1.0, 0.0), c(2.0, 0.0));
        let grad = idv_gradient(&g, &dvector![0.7, 0.7]).unwrap();
        assert_eq!(grad.norm(), 0.0);
    }

    #[test]
    fn idv_gradient_matches_laplacian_on_symmetric() {
        // Nonnegative symmetric A: gradient is 2 L u away from kinks.
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let n = 6;
        let mut adj = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(0.7) {
                    let w = rng.gen_range(0.1..1.0);
                    adj[(i, j)] = w;
                    adj[(j, i)] = w;
                }
            }
        }
        let g = Graph::from_real(adj.clone()).unwrap();
        let u = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let grad = idv_gradient(&g, &u).unwrap();
        let degrees = DVector::from_fn(n, |i, _| adj.column(i).sum());
        let lap = DMatrix::from_diagonal(&degrees) - &adj;
        let expected = 2.0 * lap * &u;
        assert!((grad - expected).norm() < 1e-10);
    }

    #[test]
    fn cdv_gradient_examples() {
        // Real A, real u: gradient real and equal to the IDV gradient.
        let g = graph2(c(-1.5, 0.0), c(0.5, 0.0));
        let u = dvector![c(0.3, 0.0), c(-0.8, 0.0)];
        let gc = cdv_gradient(&g, &u).unwrap();
        let gr = idv_gradient(&g, &dvector![0.3, -0.8]).unwrap();
        for k in 0..2 {
            assert_eq!(gc[k].im, 0.0);
            assert!((gc[k].re - gr[k]).abs() < 1e-12);
        }

        // A_12 = i, u = (i, 0) -> (2i, -2).
        let g = graph2(c(0.0, 1.0), c(0.0, 0.0));
        let u = dvector![c(0.0, 1.0), c(0.0, 0.0)];
        let gc = cdv_gradient(&g, &u).unwrap();
        assert!((gc[0] - c(0.0, 2.0)).norm() < 1e-12);
        assert!((gc[1] - c(-2.0, 0.0)).norm() < 1e-12);

        // Zero matrix: zero gradient.
        let g = Graph::from_complex(DMatrix::zeros(3, 3)).unwrap();
        let u = dvector![c(1.0, 2.0), c(-1.0, 0.5), c(0.0, 0.0)];
        assert_eq!(cdv_gradient(&g, &u).unwrap().norm(), 0.0);
    }

    /// Central finite differences of a scalar function of a real vector.
    fn fd_grad(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        let mut p = x.clone();
        for k in 0..x.len() {
            p[k] = x[k] + h;
            let fp = f(&p);
            p[k] = x[k] - h;
            let fm = f(&p);
            p[k] = x[k];
            g[k] = (fp - fm) / (2.0 * h);
        }
        g
    }

    fn smooth_point(adj: &DMatrix<f64>, rng: &mut ChaCha12Rng) -> DVector<f64> {
        // Resample until no pairwise difference is within 1e-8 of zero on an edge.
        let n = adj.nrows();
        'outer: loop {
            let u = DVector::<f64>::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            for i in 0..n {
                for j in 0..n {
                    if adj[(i, j)] != 0.0 && (u[i] - u[j]).abs() < 1e-8 {
                        continue 'outer;
                    }
                }
            }
            return u;
        }
    }

    #[test]
    fn idv_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..100 {
            let n = 6;
            let mut adj = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.5) {
                        let w: f64 = rng.gen_range(-1.0..1.0);
                        if w.abs() > 1e-8 {
                            adj[(i, j)] = w;
                        }
                    }
                }
            }
            let g = Graph::from_real(adj.clone()).unwrap();
            let u = smooth_point(&adj, &mut rng);
            let analytic = idv_gradient(&g, &u).unwrap();
            let numeric = fd_grad(|v| idv_kernel(&adj, v), &u, 1e-6);
            let scale = analytic.norm().max(numeric.norm()).max(1e-12);
            assert!(
                (analytic - numeric).norm() / scale < 1e-5,
                "relative gradient mismatch"
            );
        }
    }

    #[test]
    fn cdv_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        for _ in 0..100 {
            let n = 4;
            let mut adj = DMatrix::<C64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.6) {
                        adj[(i, j)] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    }
                }
            }
            let g = Graph::from_complex(adj).unwrap();
            let emb = complex_embed(&g);
            let ut = smooth_point(emb.a_tilde(), &mut rng);
            let u = unembed_signal(&ut);
            let analytic = embed_signal(&cdv_gradient(&g, &u).unwrap());
            let numeric = fd_grad(|v| idv_kernel(emb.a_tilde(), v), &ut, 1e-6);
            let scale = analytic.norm().max(numeric.norm()).max(1e-12);
            assert!((analytic - numeric).norm() / scale < 1e-5);
        }
    }

    #[test]
    fn engine_matches_public_operations() {
        let mut rng = ChaCha12Rng::seed_from_u64(53);
        for _ in 0..50 {
            let n = 6;
            let mut adj = DMatrix::<C64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.4) {
                        adj[(i, j)] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    }
                }
            }
            let g = Graph::from_complex(adj).unwrap();
            let u = DVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let engine = VariationEngine::new(&g, FrequencyKind::Cdv).unwrap();
            let x = GraphSignal::from_complex(u.clone()).unwrap();
            assert_eq!(engine.value(&u), complex_dv(&g, &x).unwrap());
            assert_eq!(engine.grad(&u), cdv_gradient(&g, &u).unwrap());

            let gi = Graph::from_real(g.adj().map(|z| z.re)).unwrap();
            let ur = u.map(|z| C64::new(z.re, 0.0));
            let engine = VariationEngine::new(&gi, FrequencyKind::Idv).unwrap();
            let xr = GraphSignal::from_real(u.map(|z| z.re)).unwrap();
            assert_eq!(engine.value(&ur), indefinite_dv(&gi, &xr).unwrap());
            let grad = engine.grad(&ur);
            let expected = idv_gradient(&gi, &u.map(|z| z.re)).unwrap();
            for k in 0..n {
                assert_eq!(grad[k].re, expected[k]);
                assert_eq!(grad[k].im, 0.0);
            }
        }
    }

    #[test]
    fn gradient_continuous_at_kink() {
        // [x]+^2 is C1: approaching a kink from both sides converges to the
        // kink value of the analytic gradient.
        let g = graph2(c(1.0, 0.0), c(0.0, 0.0));
        let at_kink = idv_gradient(&g, &dvector![0.5, 0.5]).unwrap();
        for eps in [1e-3, 1e-6, 1e-9] {
            let above = idv_gradient(&g, &dvector![0.5 + eps, 0.5]).unwrap();
            let below = idv_gradient(&g, &dvector![0.5 - eps, 0.5]).unwrap();
            assert!((above.clone() - &at_kink).norm() < 3.0 * eps);
            assert!((below.clone() - &at_kink).norm() < 3.0 * eps);
        }
    }
}
