//! Underlying undirected graph, Laplacian, symmetric eigendecomposition, and
//! the variation upper bound.
//!
//! The eigensolver is a cyclic Jacobi sweep: at the sizes this crate targets
//! (N up to a few hundred) it is simple, accurate, and fully deterministic,
//! which the greedy basis builder relies on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{C64, Graph};

/// Ascending eigenvalues with orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// Symmetric nonnegative graph with entries `max(|A_ij|, |A_ji|)`.
pub fn underlying_undirected(g: &Graph) -> Graph {
    let n = g.n();
    let a = g.adj();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(0.0, 0.0)
        } else {
            C64::new(a[(i, j)].norm().max(a[(j, i)].norm()), 0.0)
        }
    });
    Graph::from_complex(m).expect("underlying undirected graph is always valid")
}

const SYMMETRY_TOL: f64 = 1e-10;

/// Combinatorial Laplacian `L = D - A` with `D_ii = sum_j A_ji`.
pub fn laplacian(g: &Graph) -> Result<DMatrix<f64>> {
    if !g.is_symmetric(SYMMETRY_TOL) {
        for i in 0..g.n() {
            for j in (i + 1)..g.n() {
                let delta = (g.adj()[(i, j)] - g.adj()[(j, i)]).norm();
                if delta > SYMMETRY_TOL {
                    return Err(Error::Asymmetry { i, j, delta });
                }
            }
        }
    }
    let a = g.real_adj()?;
    if a.iter().any(|w| *w < 0.0) {
        return Err(Error::WeightClass {
            op: "laplacian",
            required: "nonnegative",
            actual: g.weight_class().as_str(),
        });
    }
    let n = g.n();
    let mut l = -a.clone();
    for i in 0..n {
        l[(i, i)] = a.column(i).sum();
    }
    Ok(l)
}

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues are returned ascending with matching eigenvector columns, each
/// flipped so its largest-magnitude component (lowest index on ties) is
/// positive.
pub fn symmetric_eig(m: &DMatrix<f64>) -> Result<EigenBasis> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let delta = (m[(i, j)] - m[(j, i)]).abs();
            if delta > SYMMETRY_TOL * scale {
                return Err(Error::Asymmetry { i, j, delta });
            }
        }
    }

    let mut a = m.clone();
    // Work on the symmetrized copy so tiny input asymmetries cannot bias the sweep.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);

    let off = |a: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[(p, q)].abs();
            }
        }
        s
    };

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off(&a) <= 1e-15 * scale * (n * n) as f64 {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    // Degenerate rotation; avoid overflow in theta^2.
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        let new_p = akp - s * (akq + tau * akp);
                        let new_q = akq + s * (akp - tau * akq);
                        a[(k, p)] = new_p;
                        a[(p, k)] = new_p;
                        a[(k, q)] = new_q;
                        a[(q, k)] = new_q;
                    }
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp - s * (vkq + tau * vkp);
                    v[(k, q)] = vkq + s * (vkp - tau * vkq);
                }
            }
        }
    }
    if !converged && off(&a) > 1e-15 * scale * (n * n) as f64 {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(i, i)]
            .partial_cmp(&a[(j, j)])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let mut eigenvalues = DVector::zeros(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = a[(src, src)];
        let mut col = v.column(src).clone_owned();
        // Sign convention: largest-magnitude component positive, ties by
        // lowest index.
        let mut best = 0;
        for k in 1..n {
            if col[k].abs() > col[best].abs() {
                best = k;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(EigenBasis {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest eigenvalue of the Laplacian of the underlying undirected graph.
///
/// Variants of a graph with equal weight moduli share one value. For DV on
/// nonnegative graphs this bounds the variation of every unit vector; for
/// IDV/CDV it holds for random unit vectors on the ensembles studied here,
/// while adversarial vectors on graphs with bidirectional opposite-sign
/// edges can reach up to twice it.
pub fn dv_upper_bound(g: &Graph) -> f64 {
    let und = underlying_undirected(g);
    let l = laplacian(&und).expect("underlying graph is symmetric nonnegative");
    let eig = symmetric_eig(&l).expect("Laplacian eigendecomposition");
    eig.eigenvalues[g.n() - 1].max(0.0)
}
