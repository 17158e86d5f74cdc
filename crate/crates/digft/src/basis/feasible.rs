//! Feasible (orthonormality-preserving) optimization: the max-frequency
//! vector search on the unit sphere and the dispersion-minimizing descent on
//! the manifold of orthonormal matrices.
//!
//! Manifold steps use the Cayley transform of the skew form
//! `W = G U^H - U G^H`, which keeps `U^H U = I` exactly for every step size.
//! Step lengths are Barzilai-Borwein with nonmonotone backtracking.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::basis::{
    BasisMethod, DescentConfig, GftBasis, GreedyConfig, complement_basis, dispersion_seq,
    greedy_basis, phase_set,
};
use crate::error::{Error, Result};
use crate::graph::{C64, Graph, WeightClass};
use crate::seeding::{derive_seed, streams};
use crate::spectral::{laplacian, symmetric_eig, underlying_undirected};
use crate::variation::{FrequencyKind, VariationEngine};

fn c64(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn normalize_vec(v: &DVector<C64>) -> DVector<C64> {
    let n = v.norm();
    if n == 0.0 { v.clone() } else { v / c64(n) }
}

fn re_inner_vec(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    a.dotc(b).re
}

fn re_inner_mat(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.dotc(b).re
}

/// Zero-variation DC vector fixed as the first basis column.
///
/// For IDV this is the real constant `1/sqrt(N)`. For CDV on a graph with
/// imaginary weights the real constant does not embed to a constant
/// 2N-vector, so the complex constant `(1+i)/sqrt(2N)` is used instead; its
/// embedding is constant, making its CDV exactly zero.
pub(crate) fn dc_vector(g: &Graph, kind: FrequencyKind) -> DVector<C64> {
    let n = g.n();
    match kind {
        FrequencyKind::Idv => DVector::from_element(n, c64(1.0 / (n as f64).sqrt())),
        FrequencyKind::Cdv => {
            if g.weight_class() == WeightClass::Complex {
                let a = 1.0 / (2.0 * n as f64).sqrt();
                DVector::from_element(n, C64::new(a, a))
            } else {
                DVector::from_element(n, c64(1.0 / (n as f64).sqrt()))
            }
        }
    }
}

fn random_unit(dim: usize, complex: bool, rng: &mut ChaCha12Rng) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| {
        let re: f64 = rng.sample(rand_distr::StandardNormal);
        let im: f64 = if complex {
            rng.sample(rand_distr::StandardNormal)
        } else {
            0.0
        };
        C64::new(re, im)
    });
    normalize_vec(&v)
}

/// Modified Gram-Schmidt (two passes). Degenerate columns are replaced by
/// projected coordinate vectors so the result is always orthonormal.
fn mgs(mut m: DMatrix<C64>) -> DMatrix<C64> {
    let (nr, nc) = (m.nrows(), m.ncols());
    for k in 0..nc {
        let mut col = m.column(k).clone_owned();
        for _ in 0..2 {
            for j in 0..k {
                let prev = m.column(j).clone_owned();
                let coef = prev.dotc(&col);
                col -= prev * coef;
            }
        }
        let mut norm = col.norm();
        if norm < 1e-10 {
            for basis_idx in 0..nr {
                let mut e = DVector::<C64>::zeros(nr);
                e[basis_idx] = c64(1.0);
                for j in 0..k {
                    let prev = m.column(j).clone_owned();
                    let coef = prev.dotc(&e);
                    e -= prev * coef;
                }
                if e.norm() > 1e-6 {
                    col = e;
                    norm = col.norm();
                    break;
                }
            }
        }
        m.set_column(k, &(col / c64(norm)));
    }
    m
}

/// One Cayley-transform step along the skew form `W = G U^H - U G^H`:
/// `U(tau) = (I + tau/2 W)^{-1} (I - tau/2 W) U`. The result is orthonormal
/// for every `tau`; `tau = 0` returns `U` unchanged.
pub fn stiefel_step(u: &DMatrix<C64>, g: &DMatrix<C64>, tau: f64) -> Result<DMatrix<C64>> {
    if u.shape() != g.shape() {
        return Err(Error::Dimension(format!(
            "gradient shape {:?} does not match point shape {:?}",
            g.shape(),
            u.shape()
        )));
    }
    if tau == 0.0 {
        return Ok(u.clone());
    }
    let w = g * u.adjoint() - u * g.adjoint();
    let n = w.nrows();
    let half = c64(tau / 2.0);
    let id = DMatrix::<C64>::identity(n, n);
    let lhs = &id + &w * half;
    let rhs = (&id - &w * half) * u;
    lhs.lu().solve(&rhs).ok_or(Error::SingularStep(tau))
}

/// Chain-rule factors `2 (2 f_k - f_{k-1} - f_{k+1})` of the endpoint-
/// inclusive dispersion with respect to each sorted frequency, with virtual
/// neighbors `f_0 = 0` and `f_{N+1} = f_max`.
pub(crate) fn gap_coefficients(sorted_freqs: &[f64], f_max: f64) -> Vec<f64> {
    let n = sorted_freqs.len();
    (0..n)
        .map(|k| {
            let prev = if k == 0 { 0.0 } else { sorted_freqs[k - 1] };
            let next = if k + 1 == n { f_max } else { sorted_freqs[k + 1] };
            2.0 * (2.0 * sorted_freqs[k] - prev - next)
        })
        .collect()
}

/// Gradient of the endpoint-inclusive dispersion with respect to the basis
/// columns, holding the given ascending-frequency `order` fixed.
///
/// `order[pos]` names the column with the `pos`-th smallest frequency;
/// columns listed in `fixed` (the DC and max-frequency columns of the
/// feasible method) get a zero gradient.
pub fn dispersion_gradient(
    g: &Graph,
    kind: FrequencyKind,
    u: &DMatrix<C64>,
    order: &[usize],
    f_max: f64,
    fixed: &[usize],
) -> Result<DMatrix<C64>> {
    let engine = VariationEngine::new(g, kind)?;
    let n = u.ncols();
    if u.nrows() != g.n() {
        return Err(Error::Dimension(format!(
            "basis has {} rows, graph has {} vertices",
            u.nrows(),
            g.n()
        )));
    }
    if order.len() != n {
        return Err(Error::Invalid(format!(
            "order has length {}, expected {n}",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &col in order {
        if col >= n || seen[col] {
            return Err(Error::Invalid("order is not a permutation".into()));
        }
        seen[col] = true;
    }
    let freqs: Vec<f64> = (0..n)
        .map(|k| engine.value(&u.column(k).clone_owned()))
        .collect();
    let sorted: Vec<f64> = order.iter().map(|&col| freqs[col]).collect();
    let coefs = gap_coefficients(&sorted, f_max);
    let mut grad = DMatrix::<C64>::zeros(u.nrows(), n);
    for (pos, &col) in order.iter().enumerate() {
        if fixed.contains(&col) {
            continue;
        }
        let gcol = engine.grad(&u.column(col).clone_owned()) * c64(coefs[pos]);
        grad.set_column(col, &gcol);
    }
    Ok(grad)
}

struct AscentOutcome {
    y: DVector<C64>,
    value: f64,
}

/// Maximizes `engine.value(Q y)` over unit `y` by projected gradient ascent
/// with BB steps and a nonmonotone (window-min) acceptance rule. The value
/// never drops below the start value.
fn sphere_ascent(
    engine: &VariationEngine,
    q: &DMatrix<C64>,
    y0: DVector<C64>,
    cfg: &DescentConfig,
) -> AscentOutcome {
    let phi = |y: &DVector<C64>| engine.value(&(q * y));
    let mut y = normalize_vec(&y0);
    let mut f = phi(&y);
    let mut best = (f, y.clone());
    let mut history: VecDeque<f64> = VecDeque::from([f]);
    let mut prev: Option<(DVector<C64>, DVector<C64>)> = None;
    let mut tau_prev = cfg.initial_step;
    let mut flat_iters = 0usize;

    for _ in 0..cfg.max_iters {
        let gy = q.adjoint() * engine.grad(&(q * &y));
        let radial = re_inner_vec(&y, &gy);
        let gt = &gy - &y * c64(radial);
        let ng2 = re_inner_vec(&gt, &gt);
        if ng2.sqrt() <= 1e-12 * f.abs().max(1.0) {
            break;
        }
        let mut tau = match &prev {
            Some((py, pgt)) => {
                let s = &y - py;
                let d = &gt - pgt;
                let ss = re_inner_vec(&s, &s);
                let sd = re_inner_vec(&s, &d).abs();
                if sd > 1e-300 {
                    (ss / sd).clamp(1e-10, 1e3)
                } else {
                    tau_prev
                }
            }
            None => cfg.initial_step,
        };
        let f_ref = history.iter().copied().fold(f64::INFINITY, f64::min);
        let mut accepted = None;
        for _ in 0..60 {
            let cand = normalize_vec(&(&y + &gt * c64(tau)));
            let fc = phi(&cand);
            if fc >= f_ref + cfg.sufficient_decrease * tau * ng2 {
                accepted = Some((cand, fc));
                break;
            }
            tau *= cfg.shrink;
            if tau < 1e-14 {
                break;
            }
        }
        let Some((y_new, f_new)) = accepted else { break };
        prev = Some((y, gt));
        tau_prev = tau;
        let rel = (f_new - f).abs() / f.abs().max(1.0);
        y = y_new;
        f = f_new;
        if f > best.0 {
            best = (f, y.clone());
        }
        history.push_back(f);
        if history.len() > cfg.window {
            history.pop_front();
        }
        if rel <= cfg.tol_rel_obj {
            flat_iters += 1;
            if flat_iters >= 2 {
                break;
            }
        } else {
            flat_iters = 0;
        }
    }
    AscentOutcome { y: best.1, value: best.0 }
}

/// Searches for the maximum-frequency unit vector with the default phase
/// grid for warm starts.
pub fn max_frequency_vector(
    g: &Graph,
    kind: FrequencyKind,
    cfg: &DescentConfig,
) -> Result<(DVector<C64>, f64)> {
    max_frequency_vector_with(g, kind, cfg, GreedyConfig::default().phase_grid_size)
}

/// Max-frequency search. Ascends within the orthogonal complement of the DC
/// vector (the shift direction of IDV, so nothing is lost there; for CDV it
/// restricts to vectors that can actually share a basis with the DC column),
/// starting from every sign/phase-rotated underlying-Laplacian eigenvector
/// plus `cfg.restarts` random unit starts.
pub fn max_frequency_vector_with(
    g: &Graph,
    kind: FrequencyKind,
    cfg: &DescentConfig,
    phase_grid: usize,
) -> Result<(DVector<C64>, f64)> {
    cfg.validate()?;
    let engine = VariationEngine::new(g, kind)?;
    let n = g.n();
    if n == 1 {
        return Ok((DVector::from_element(1, c64(1.0)), 0.0));
    }
    let dc = dc_vector(g, kind);
    let q = complement_basis(std::slice::from_ref(&dc), n, n - 1)?;
    let eig = symmetric_eig(&laplacian(&underlying_undirected(g))?)?;
    let phases = phase_set(kind, phase_grid.max(2));
    let complex_path = kind == FrequencyKind::Cdv;

    let mut starts: Vec<DVector<C64>> = Vec::new();
    for i in 0..n {
        let v = eig.eigenvectors.column(i).map(|x| c64(x));
        for s in &phases {
            let y = q.adjoint() * (&v * *s);
            if y.norm() > 1e-8 {
                starts.push(normalize_vec(&y));
            }
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.rng_seed, streams::MAX_FREQUENCY, 0));
    for _ in 0..cfg.restarts {
        starts.push(random_unit(n - 1, complex_path, &mut rng));
    }

    let outcomes: Vec<(usize, AscentOutcome)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(idx, y0)| (idx, sphere_ascent(&engine, &q, y0, cfg)))
        .collect();
    let best = outcomes
        .into_iter()
        .max_by(|(ia, a), (ib, b)| {
            a.value
                .partial_cmp(&b.value)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ib.cmp(ia))
        })
        .expect("at least one start");
    let u = normalize_vec(&(&q * best.1.y));
    let f = engine.value(&u);
    Ok((u, f))
}

/// Feasible basis with diagnostics.
#[derive(Debug, Clone)]
pub struct FeasibleResult {
    pub basis: GftBasis,
    /// True when some restart ran out of iterations before meeting the
    /// objective tolerance.
    pub iterations_exhausted: bool,
    /// Objective at the greedy warm start (restart 0's initial point).
    pub warm_start_dispersion: f64,
    /// Endpoint-inclusive objective of the returned basis.
    pub final_dispersion: f64,
    pub best_restart: usize,
}

/// Objective over the free middle block, expressed in complement
/// coordinates: columns are `[u1, Q V, u_max]` and the objective is the
/// dispersion of all column frequencies with endpoints `(0, f_max)`.
struct MiddleObjective<'a> {
    engine: &'a VariationEngine,
    q: &'a DMatrix<C64>,
    f_dc: f64,
    f_max_col: f64,
    f_max: f64,
    n: usize,
}

impl MiddleObjective<'_> {
    fn all_freqs(&self, v: &DMatrix<C64>) -> (DMatrix<C64>, Vec<f64>) {
        let mid = self.q * v;
        let mut freqs = Vec::with_capacity(self.n);
        freqs.push(self.f_dc);
        for k in 0..mid.ncols() {
            freqs.push(self.engine.value(&mid.column(k).clone_owned()));
        }
        freqs.push(self.f_max_col);
        (mid, freqs)
    }

    fn value_of_freqs(&self, freqs: &[f64]) -> f64 {
        let mut sorted = freqs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        dispersion_seq(&sorted, self.f_max)
    }

    fn value(&self, v: &DMatrix<C64>) -> f64 {
        let (_, freqs) = self.all_freqs(v);
        self.value_of_freqs(&freqs)
    }

    /// Euclidean gradient in complement coordinates plus the objective,
    /// using the ascending order at the current point (ties by column index).
    fn euclid_grad(&self, v: &DMatrix<C64>) -> (DMatrix<C64>, f64) {
        let (mid, freqs) = self.all_freqs(v);
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| {
            freqs[a]
                .partial_cmp(&freqs[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let sorted: Vec<f64> = order.iter().map(|&c| freqs[c]).collect();
        let coefs = gap_coefficients(&sorted, self.f_max);
        let mut grad_mid = DMatrix::<C64>::zeros(self.q.nrows(), self.n - 2);
        for (pos, &col) in order.iter().enumerate() {
            if col == 0 || col == self.n - 1 {
                continue; // fixed DC / max columns
            }
            let k = col - 1;
            let gcol = self.engine.grad(&mid.column(k).clone_owned()) * c64(coefs[pos]);
            grad_mid.set_column(k, &gcol);
        }
        (self.q.adjoint() * grad_mid, dispersion_seq(&sorted, self.f_max))
    }
}

struct RestartOutcome {
    v: DMatrix<C64>,
    objective: f64,
    initial_objective: f64,
    exhausted: bool,
}

/// Nonmonotone BB descent over the square orthonormal free block.
fn descend_middle(obj: &MiddleObjective, v0: DMatrix<C64>, cfg: &DescentConfig) -> RestartOutcome {
    let (mut g_v, mut f) = obj.euclid_grad(&v0);
    let initial_objective = f;
    let mut v = v0;
    let mut best = (f, v.clone());
    let mut history: VecDeque<f64> = VecDeque::from([f]);
    let mut prev: Option<(DMatrix<C64>, DMatrix<C64>)> = None;
    let mut tau_prev = cfg.initial_step;
    let mut flat_iters = 0usize;
    let mut exhausted = true;

    for _ in 0..cfg.max_iters {
        let w = &g_v * v.adjoint() - &v * g_v.adjoint();
        let w2 = re_inner_mat(&w, &w);
        if w2.sqrt() <= 1e-12 * f.abs().max(1.0) {
            exhausted = false;
            break;
        }
        let dd = -0.5 * w2;
        let mut tau = match &prev {
            Some((pv, pg)) => {
                let s = &v - pv;
                let d = &g_v - pg;
                let ss = re_inner_mat(&s, &s);
                let sd = re_inner_mat(&s, &d).abs();
                if sd > 1e-300 {
                    (ss / sd).clamp(1e-10, 1e3)
                } else {
                    tau_prev
                }
            }
            None => cfg.initial_step,
        };
        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut accepted = None;
        for _ in 0..60 {
            match stiefel_step(&v, &g_v, tau) {
                Ok(cand) => {
                    let fc = obj.value(&cand);
                    if fc <= f_ref + cfg.sufficient_decrease * tau * dd {
                        accepted = Some((cand, fc));
                        break;
                    }
                }
                Err(_) => {}
            }
            tau *= cfg.shrink;
            if tau < 1e-14 {
                break;
            }
        }
        let Some((v_new, f_new)) = accepted else {
            // Line search stalled: no further descent along the Cayley curve.
            exhausted = false;
            break;
        };
        prev = Some((v.clone(), g_v.clone()));
        tau_prev = tau;
        let rel = (f_new - f).abs() / f.abs().max(1.0);
        v = v_new;
        let refreshed = obj.euclid_grad(&v);
        g_v = refreshed.0;
        f = f_new;
        if f < best.0 {
            best = (f, v.clone());
        }
        history.push_back(f);
        if history.len() > cfg.window {
            history.pop_front();
        }
        if rel <= cfg.tol_rel_obj {
            flat_iters += 1;
            if flat_iters >= 2 {
                exhausted = false;
                break;
            }
        } else {
            flat_iters = 0;
        }
    }
    RestartOutcome {
        v: best.1,
        objective: best.0,
        initial_objective,
        exhausted,
    }
}

/// Two-step feasible basis with the default greedy warm-start configuration.
pub fn feasible_basis(g: &Graph, kind: FrequencyKind, cfg: &DescentConfig) -> Result<FeasibleResult> {
    feasible_basis_with(g, kind, cfg, &GreedyConfig::default())
}

/// Two-step feasible basis: fixes the DC column and the max-frequency
/// column, then minimizes endpoint-inclusive dispersion over the orthonormal
/// free block in complement coordinates. Restart 0 starts from the greedy
/// basis; the remaining restarts use random orthonormal completions.
pub fn feasible_basis_with(
    g: &Graph,
    kind: FrequencyKind,
    cfg: &DescentConfig,
    gcfg: &GreedyConfig,
) -> Result<FeasibleResult> {
    cfg.validate()?;
    gcfg.validate()?;
    let n = g.n();
    if n < 3 {
        return Err(Error::Invalid(format!(
            "feasible method needs n >= 3, got {n}"
        )));
    }
    let engine = VariationEngine::new(g, kind)?;
    let complex_path = kind == FrequencyKind::Cdv;
    let (u_max, f_max) = max_frequency_vector_with(g, kind, cfg, gcfg.phase_grid_size)?;
    let dc = dc_vector(g, kind);
    let f_dc = engine.value(&dc);
    let q = complement_basis(&[dc.clone(), u_max.clone()], n, n - 2)?;
    let obj = MiddleObjective {
        engine: &engine,
        q: &q,
        f_dc,
        f_max_col: f_max,
        f_max,
        n,
    };

    // Restart 0: the greedy basis, adapted to the fixed columns by
    // projecting its middle columns into the complement.
    let greedy = greedy_basis(g, kind, gcfg)?;
    let mut warm_cols: Vec<DVector<C64>> = Vec::with_capacity(n - 2);
    for k in 1..n - 1 {
        let mut col = greedy.columns.column(k).clone_owned();
        for _ in 0..2 {
            for fixed in [&dc, &u_max].into_iter().chain(warm_cols.iter()) {
                let coef = fixed.dotc(&col);
                col -= fixed * coef;
            }
        }
        let norm = col.norm();
        if norm > 1e-6 {
            warm_cols.push(col / c64(norm));
        }
    }
    if warm_cols.len() < n - 2 {
        let mut fixed: Vec<DVector<C64>> = vec![dc.clone(), u_max.clone()];
        fixed.extend(warm_cols.iter().cloned());
        let fill = complement_basis(&fixed, n, n - 2 - warm_cols.len())?;
        for k in 0..fill.ncols() {
            warm_cols.push(fill.column(k).clone_owned());
        }
    }
    let mut warm = DMatrix::<C64>::zeros(n, n - 2);
    for (k, col) in warm_cols.iter().enumerate() {
        warm.set_column(k, col);
    }
    let v_warm = mgs(q.adjoint() * warm);

    let mut initials = Vec::with_capacity(cfg.restarts);
    initials.push(v_warm);
    for r in 1..cfg.restarts {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(
            cfg.rng_seed,
            streams::FEASIBLE_RESTART,
            r as u64,
        ));
        let m = DMatrix::from_fn(n - 2, n - 2, |_, _| {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = if complex_path {
                rng.sample(rand_distr::StandardNormal)
            } else {
                0.0
            };
            C64::new(re, im)
        });
        initials.push(mgs(m));
    }

    let outcomes: Vec<(usize, RestartOutcome)> = initials
        .into_par_iter()
        .enumerate()
        .map(|(r, v0)| (r, descend_middle(&obj, v0, cfg)))
        .collect();

    let warm_start_dispersion = outcomes[0].1.initial_objective;
    let iterations_exhausted = outcomes.iter().any(|(_, o)| o.exhausted);
    let (best_restart, best) = outcomes
        .into_iter()
        .min_by(|(ia, a), (ib, b)| {
            a.objective
                .partial_cmp(&b.objective)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(ia.cmp(ib))
        })
        .expect("at least one restart");

    let mut columns = DMatrix::<C64>::zeros(n, n);
    columns.set_column(0, &dc);
    let mid = &q * &best.v;
    for k in 0..n - 2 {
        columns.set_column(k + 1, &mid.column(k));
    }
    columns.set_column(n - 1, &u_max);
    let basis = GftBasis::from_columns(columns, &engine, BasisMethod::Feasible, g.digest(), f_max);
    Ok(FeasibleResult {
        final_dispersion: best.objective,
        basis,
        iterations_exhausted,
        warm_start_dispersion,
        best_restart,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn quick_cfg(seed: u64) -> DescentConfig {
        DescentConfig {
            restarts: 3,
            max_iters: 400,
            rng_seed: seed,
            ..DescentConfig::default()
        }
    }

    fn random_orthonormal(n: usize, complex: bool, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = if complex {
                rng.sample(rand_distr::StandardNormal)
            } else {
                0.0
            };
            C64::new(re, im)
        });
        mgs(m)
    }

    #[test]
    fn stiefel_step_tau_zero_is_identity() {
        let u = random_orthonormal(5, true, 1);
        let g = DMatrix::from_fn(5, 5, |i, j| c(i as f64 - j as f64, 0.3 * j as f64));
        let stepped = stiefel_step(&u, &g, 0.0).unwrap();
        assert_eq!(stepped, u);
    }

    #[test]
    fn stiefel_step_preserves_orthonormality() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for &complex in &[false, true] {
            let u = random_orthonormal(6, complex, 3);
            let g = DMatrix::from_fn(6, 6, |_, _| {
                C64::new(
                    rng.gen_range(-1.0..1.0),
                    if complex { rng.gen_range(-1.0..1.0) } else { 0.0 },
                )
            });
            for tau in [1e-3, 0.1, 1.0, 17.0] {
                let stepped = stiefel_step(&u, &g, tau).unwrap();
                let gram = stepped.adjoint() * &stepped;
                let defect = (&gram - DMatrix::<C64>::identity(6, 6))
                    .iter()
                    .fold(0.0f64, |a, z| a.max(z.norm()));
                assert!(defect <= 1e-10, "tau={tau}, defect={defect}");
            }
        }
    }

    #[test]
    fn stiefel_step_fixed_point_for_symmetric_factor() {
        // G = U S with Hermitian S makes W vanish.
        let u = random_orthonormal(5, true, 7);
        let mut s = DMatrix::from_fn(5, 5, |i, j| c((i + j) as f64, (i as f64) - (j as f64)));
        let s_h = s.adjoint();
        s = (&s + s_h) * c(0.5, 0.0);
        let g = &u * s;
        let stepped = stiefel_step(&u, &g, 0.25).unwrap();
        assert!((stepped - &u).norm() < 1e-10);
    }

    #[test]
    fn gap_coefficients_vanish_for_equal_spacing() {
        let f_max = 3.0;
        let n = 5;
        let freqs: Vec<f64> = (1..=n).map(|k| k as f64 * f_max / (n + 1) as f64).collect();
        for coef in gap_coefficients(&freqs, f_max) {
            assert!(coef.abs() < 1e-12);
        }
    }

    #[test]
    fn max_frequency_on_undirected_is_lambda_max() {
        let adj = dmatrix![0.0, 1.0, 0.0, 1.0;
                           1.0, 0.0, 1.0, 0.0;
                           0.0, 1.0, 0.0, 1.0;
                           1.0, 0.0, 1.0, 0.0];
        let g = Graph::from_real(adj).unwrap();
        let (u, f) = max_frequency_vector(&g, FrequencyKind::Idv, &quick_cfg(1)).unwrap();
        let l = laplacian(&g).unwrap();
        let eig = symmetric_eig(&l).unwrap();
        let lam_max = eig.eigenvalues[3];
        assert!((f - lam_max).abs() < 1e-6, "f={f}, lambda_max={lam_max}");
        // u is the top eigenvector up to sign.
        let top = eig.eigenvectors.column(3).map(|x| c(x, 0.0));
        let overlap = top.dotc(&u).norm();
        assert!(overlap > 1.0 - 1e-6);
    }

    #[test]
    fn max_frequency_two_node_directed() {
        let g = Graph::from_real(dmatrix![0.0, 1.0; 0.0, 0.0]).unwrap();
        let (u, f) = max_frequency_vector(&g, FrequencyKind::Idv, &quick_cfg(2)).unwrap();
        assert!((f - 2.0).abs() < 1e-9);
        let s = 1.0 / 2.0f64.sqrt();
        let expected = nalgebra::dvector![c(s, 0.0), c(-s, 0.0)];
        assert!((&u - expected).norm() < 1e-6 || (&u + nalgebra::dvector![c(-s, 0.0), c(s, 0.0)]).norm() < 1e-6);
    }

    #[test]
    fn max_frequency_zero_graph() {
        let g = Graph::from_real(DMatrix::zeros(4, 4)).unwrap();
        let (_, f) = max_frequency_vector(&g, FrequencyKind::Idv, &quick_cfg(3)).unwrap();
        assert_eq!(f, 0.0);
    }

    fn fd_dispersion_grad(
        g: &Graph,
        kind: FrequencyKind,
        u: &DMatrix<C64>,
        order: &[usize],
        f_max: f64,
        h: f64,
    ) -> DMatrix<C64> {
        let engine = VariationEngine::new(g, kind).unwrap();
        let value = |m: &DMatrix<C64>| {
            let freqs: Vec<f64> = (0..m.ncols())
                .map(|k| engine.value(&m.column(k).clone_owned()))
                .collect();
            let sorted: Vec<f64> = order.iter().map(|&c| freqs[c]).collect();
            dispersion_seq(&sorted, f_max)
        };
        let n = u.nrows();
        let mut grad = DMatrix::<C64>::zeros(n, u.ncols());
        for col in 0..u.ncols() {
            for row in 0..n {
                for part in 0..2 {
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    let delta = if part == 0 { c(h, 0.0) } else { c(0.0, h) };
                    up[(row, col)] += delta;
                    dn[(row, col)] -= delta;
                    let d = (value(&up) - value(&dn)) / (2.0 * h);
                    if part == 0 {
                        grad[(row, col)] += c(d, 0.0);
                    } else {
                        grad[(row, col)] += c(0.0, d);
                    }
                }
            }
        }
        grad
    }

    #[test]
    fn dispersion_gradient_matches_finite_differences() {
        // Directed 3-path with a random feasible point.
        let g = Graph::from_real(dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 1.0; 0.0, 0.0, 0.0]).unwrap();
        let u = random_orthonormal(3, false, 11);
        let engine = VariationEngine::new(&g, FrequencyKind::Idv).unwrap();
        let freqs: Vec<f64> = (0..3).map(|k| engine.value(&u.column(k).clone_owned())).collect();
        let mut order: Vec<usize> = vec![0, 1, 2];
        order.sort_by(|&a, &b| freqs[a].partial_cmp(&freqs[b]).unwrap());
        let f_max = freqs.iter().cloned().fold(0.0, f64::max) + 0.5;
        let analytic =
            dispersion_gradient(&g, FrequencyKind::Idv, &u, &order, f_max, &[]).unwrap();
        let numeric = fd_dispersion_grad(&g, FrequencyKind::Idv, &u, &order, f_max, 1e-6);
        // Imaginary parts are meaningless on the IDV path; compare real parts.
        let mut worst = 0.0f64;
        let mut scale = 1e-9f64;
        for (a, b) in analytic.iter().zip(numeric.iter()) {
            worst = worst.max((a.re - b.re).abs());
            scale = scale.max(a.re.abs()).max(b.re.abs());
        }
        assert!(worst / scale < 1e-4, "rel err {}", worst / scale);
    }

    #[test]
    fn dispersion_gradient_complex_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let n = 3;
        let mut adj = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.gen_bool(0.8) {
                    adj[(i, j)] = match rng.gen_range(0..4) {
                        0 => c(1.0, 0.0),
                        1 => c(-1.0, 0.0),
                        2 => c(0.0, 1.0),
                        _ => c(0.0, -1.0),
                    };
                }
            }
        }
        let g = Graph::from_complex(adj).unwrap();
        let u = random_orthonormal(n, true, 17);
        let engine = VariationEngine::new(&g, FrequencyKind::Cdv).unwrap();
        let freqs: Vec<f64> = (0..n).map(|k| engine.value(&u.column(k).clone_owned())).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| freqs[a].partial_cmp(&freqs[b]).unwrap());
        let f_max = freqs.iter().cloned().fold(0.0, f64::max) + 0.5;
        let analytic =
            dispersion_gradient(&g, FrequencyKind::Cdv, &u, &order, f_max, &[]).unwrap();
        let numeric = fd_dispersion_grad(&g, FrequencyKind::Cdv, &u, &order, f_max, 1e-6);
        let diff = (&analytic - &numeric).norm();
        let scale = analytic.norm().max(numeric.norm()).max(1e-9);
        assert!(diff / scale < 1e-4, "rel err {}", diff / scale);
    }

    #[test]
    fn dispersion_gradient_zero_graph_is_zero() {
        let g = Graph::from_complex(DMatrix::zeros(4, 4)).unwrap();
        let u = random_orthonormal(4, true, 19);
        let grad =
            dispersion_gradient(&g, FrequencyKind::Cdv, &u, &[0, 1, 2, 3], 0.0, &[]).unwrap();
        assert_eq!(grad.norm(), 0.0);
    }

    #[test]
    fn dispersion_gradient_zeroes_fixed_columns() {
        let g = Graph::from_real(dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 1.0; 1.0, 0.0, 0.0]).unwrap();
        let u = random_orthonormal(3, false, 23);
        let grad =
            dispersion_gradient(&g, FrequencyKind::Idv, &u, &[0, 1, 2], 5.0, &[0, 2]).unwrap();
        assert_eq!(grad.column(0).norm(), 0.0);
        assert_eq!(grad.column(2).norm(), 0.0);
    }

    #[test]
    fn feasible_on_directed_path() {
        let g = Graph::from_real(dmatrix![0.0, 1.0, 0.0; 0.0, 0.0, 1.0; 0.0, 0.0, 0.0]).unwrap();
        let res = feasible_basis(&g, FrequencyKind::Idv, &quick_cfg(5)).unwrap();
        assert!(res.basis.orthonormality_defect() <= 1e-8);
        assert!(res.basis.frequencies[0].abs() <= 1e-12, "DC column has zero frequency");
        assert!(res.final_dispersion <= res.warm_start_dispersion + 1e-9);
    }

    #[test]
    fn feasible_rejects_tiny_graphs() {
        let g = Graph::from_real(dmatrix![0.0, 1.0; 0.0, 0.0]).unwrap();
        assert!(feasible_basis(&g, FrequencyKind::Idv, &quick_cfg(6)).is_err());
    }

    #[test]
    fn feasible_deterministic() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let n = 6;
        let mut adj = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.gen_bool(0.4) {
                    adj[(i, j)] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                }
            }
        }
        let g = Graph::from_real(adj).unwrap();
        let a = feasible_basis(&g, FrequencyKind::Idv, &quick_cfg(7)).unwrap();
        let b = feasible_basis(&g, FrequencyKind::Idv, &quick_cfg(7)).unwrap();
        assert_eq!(a.basis.frequencies, b.basis.frequencies);
        assert_eq!(a.basis.columns, b.basis.columns);
        assert_eq!(a.best_restart, b.best_restart);
    }

    #[test]
    fn feasible_improves_on_warm_start_and_dominates_greedy_max() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for trial in 0..4 {
            let n = 8;
            let mut adj = DMatrix::<C64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.3) {
                        adj[(i, j)] = match rng.gen_range(0..4) {
                            0 => c(1.0, 0.0),
                            1 => c(-1.0, 0.0),
                            2 => c(0.0, 1.0),
                            _ => c(0.0, -1.0),
                        };
                    }
                }
            }
            let g = Graph::from_complex(adj).unwrap();
            let greedy = greedy_basis(&g, FrequencyKind::Cdv, &GreedyConfig::default()).unwrap();
            let res = feasible_basis(&g, FrequencyKind::Cdv, &quick_cfg(trial)).unwrap();
            assert!(res.basis.orthonormality_defect() <= 1e-8);
            assert!(res.final_dispersion <= res.warm_start_dispersion + 1e-9);
            assert!(
                res.basis.max_frequency() >= greedy.max_frequency() - 1e-9,
                "trial {trial}: feasible max {} vs greedy max {}",
                res.basis.max_frequency(),
                greedy.max_frequency()
            );
        }
    }
}
