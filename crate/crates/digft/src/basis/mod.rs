//! GFT basis builders: greedy sign/phase selection over underlying-Laplacian
//! eigenvectors, and the feasible (orthonormality-preserving) descent method.

mod feasible;

pub use feasible::{
    FeasibleResult, dispersion_gradient, feasible_basis, feasible_basis_with,
    max_frequency_vector, max_frequency_vector_with, stiefel_step,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{C64, Graph};
use crate::spectral::{laplacian, symmetric_eig, underlying_undirected};
use crate::variation::{FrequencyKind, VariationEngine};

/// Which optimizer produced a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BasisMethod {
    Greedy,
    Feasible,
}

impl BasisMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BasisMethod::Greedy => "greedy",
            BasisMethod::Feasible => "feasible",
        }
    }
}

/// Orthonormal GFT basis with per-column frequencies in ascending order.
#[derive(Debug, Clone)]
pub struct GftBasis {
    /// N x N orthonormal columns, ascending by frequency.
    pub columns: DMatrix<C64>,
    /// frequencies[k] = variation of column k under `kind`.
    pub frequencies: Vec<f64>,
    pub kind: FrequencyKind,
    pub method: BasisMethod,
    /// Identifier of the source graph (content digest).
    pub graph_ref: String,
    /// Upper frequency endpoint used by the builder's dispersion objective.
    pub f_max: f64,
}

impl GftBasis {
    /// Assembles a basis from unsorted columns, computing frequencies and
    /// permuting into ascending-frequency order (ties by column index).
    pub(crate) fn from_columns(
        columns: DMatrix<C64>,
        engine: &VariationEngine,
        method: BasisMethod,
        graph_ref: String,
        f_max: f64,
    ) -> Self {
        let n = columns.ncols();
        let freqs: Vec<f64> = (0..n)
            .map(|k| engine.value(&columns.column(k).clone_owned()))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            freqs[a]
                .partial_cmp(&freqs[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut sorted = DMatrix::<C64>::zeros(columns.nrows(), n);
        let mut sorted_freqs = Vec::with_capacity(n);
        for (dst, &src) in order.iter().enumerate() {
            sorted.set_column(dst, &columns.column(src));
            sorted_freqs.push(freqs[src]);
        }
        GftBasis {
            columns: sorted,
            frequencies: sorted_freqs,
            kind: engine.kind(),
            method,
            graph_ref,
            f_max,
        }
    }

    pub fn n(&self) -> usize {
        self.columns.ncols()
    }

    /// Max-norm of `U^H U - I`.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.columns.adjoint() * &self.columns;
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - C64::new(expected, 0.0)).norm());
            }
        }
        worst
    }

    pub fn max_frequency(&self) -> f64 {
        *self.frequencies.last().expect("basis is non-empty")
    }

    /// Sum of squared consecutive frequency gaps, endpoints excluded.
    pub fn dispersion_endpoint_free(&self) -> f64 {
        self.frequencies
            .windows(2)
            .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
            .sum()
    }

    /// Dispersion over the sequence `(0, frequencies..., f_max)`.
    pub fn dispersion_with_endpoints(&self) -> f64 {
        dispersion_seq(&self.frequencies, self.f_max)
    }

    /// True when every column has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.columns.iter().all(|z| z.im == 0.0)
    }
}

/// Greedy selection parameters. `phase_grid_size` only applies to the
/// complex path; the real path always uses the sign set {+1, -1}.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GreedyConfig {
    pub phase_grid_size: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig { phase_grid_size: 16 }
    }
}

impl GreedyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.phase_grid_size < 2 {
            return Err(Error::Invalid(format!(
                "phase grid size must be >= 2, got {}",
                self.phase_grid_size
            )));
        }
        Ok(())
    }
}

/// Descent hyperparameters shared by the max-frequency search and the
/// feasible basis optimizer. Step control is Barzilai-Borwein with
/// nonmonotone backtracking.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DescentConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub initial_step: f64,
    pub window: usize,
    pub sufficient_decrease: f64,
    pub shrink: f64,
    pub tol_rel_obj: f64,
    pub rng_seed: u64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            restarts: 10,
            max_iters: 5000,
            initial_step: 1e-2,
            window: 10,
            sufficient_decrease: 1e-4,
            shrink: 0.5,
            tol_rel_obj: 1e-8,
            rng_seed: 0,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 || self.window == 0 {
            return Err(Error::Invalid("restarts, max_iters, window must be positive".into()));
        }
        if !(self.initial_step > 0.0 && self.sufficient_decrease > 0.0 && self.tol_rel_obj > 0.0) {
            return Err(Error::Invalid("steps and tolerances must be positive".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Invalid(format!(
                "shrink must lie in (0,1), got {}",
                self.shrink
            )));
        }
        Ok(())
    }
}

/// Dispersion of the gap sequence `(0, freqs..., f_max)`; `freqs` must be
/// sorted ascending by the caller.
pub(crate) fn dispersion_seq(sorted: &[f64], f_max: f64) -> f64 {
    let mut prev = 0.0;
    let mut acc = 0.0;
    for &f in sorted {
        let gap = f - prev;
        acc += gap * gap;
        prev = f;
    }
    let last = f_max - prev;
    acc + last * last
}

/// Spectral dispersion: sum of squared consecutive gaps over the sequence
/// `(0, freqs..., f_max)`.
pub fn spectral_dispersion(freqs: &[f64], f_max: f64) -> Result<f64> {
    for (i, w) in freqs.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(Error::Unsorted(i + 1));
        }
    }
    if let Some(&last) = freqs.last() {
        if f_max < last - 1e-9 {
            return Err(Error::Invalid(format!(
                "f_max {f_max} below largest frequency {last}"
            )));
        }
    }
    Ok(dispersion_seq(freqs, f_max))
}

/// Sign/phase candidates for the greedy search.
pub(crate) fn phase_set(kind: FrequencyKind, k: usize) -> Vec<C64> {
    match kind {
        FrequencyKind::Idv => vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
        FrequencyKind::Cdv => (0..k)
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                C64::new(theta.cos(), theta.sin())
            })
            .collect(),
    }
}

/// Greedy basis: per eigenvector of the underlying undirected Laplacian,
/// pick one sign (+-1) or phase (e^{i theta_k}) minimizing the dispersion of
/// the selected-so-far frequency set with endpoints (0, f_max over all
/// candidates). Indices are processed in ascending eigenvalue order; exactly
/// one candidate is taken per eigenvector.
pub fn greedy_basis(g: &Graph, kind: FrequencyKind, gcfg: &GreedyConfig) -> Result<GftBasis> {
    gcfg.validate()?;
    let engine = VariationEngine::new(g, kind)?;
    let und = underlying_undirected(g);
    let l = laplacian(&und)?;
    let eig = symmetric_eig(&l)?;
    let n = g.n();
    let phases = phase_set(kind, gcfg.phase_grid_size);

    // Variation of every rotated candidate.
    let mut cand_freqs = vec![vec![0.0; phases.len()]; n];
    let mut f_max_greedy = 0.0f64;
    for i in 0..n {
        let v = eig.eigenvectors.column(i).map(|x| C64::new(x, 0.0));
        for (s_idx, s) in phases.iter().enumerate() {
            let f = engine.value(&(&v * *s));
            cand_freqs[i][s_idx] = f;
            f_max_greedy = f_max_greedy.max(f);
        }
    }

    let mut selected_sorted: Vec<f64> = Vec::with_capacity(n);
    let mut choices = Vec::with_capacity(n);
    for i in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for (s_idx, &f) in cand_freqs[i].iter().enumerate() {
            let pos = selected_sorted.partition_point(|&x| x <= f);
            let mut trial = selected_sorted.clone();
            trial.insert(pos, f);
            let d = dispersion_seq(&trial, f_max_greedy);
            if best.is_none() || d < best.unwrap().1 {
                best = Some((s_idx, d));
            }
        }
        let (s_idx, _) = best.expect("at least one phase candidate");
        let f = cand_freqs[i][s_idx];
        let pos = selected_sorted.partition_point(|&x| x <= f);
        selected_sorted.insert(pos, f);
        choices.push(s_idx);
    }

    let mut columns = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        let s = phases[choices[i]];
        let col = eig.eigenvectors.column(i).map(|x| C64::new(x, 0.0) * s);
        columns.set_column(i, &col);
    }
    Ok(GftBasis::from_columns(
        columns,
        &engine,
        BasisMethod::Greedy,
        g.digest(),
        f_max_greedy,
    ))
}

/// Orthonormal basis of the orthogonal complement of `fixed` inside C^n,
/// built deterministically from coordinate vectors by modified Gram-Schmidt.
pub(crate) fn complement_basis(
    fixed: &[DVector<C64>],
    n: usize,
    want: usize,
) -> Result<DMatrix<C64>> {
    let mut accepted: Vec<DVector<C64>> = Vec::with_capacity(want);
    for k in 0..n {
        if accepted.len() == want {
            break;
        }
        let mut v = DVector::<C64>::zeros(n);
        v[k] = C64::new(1.0, 0.0);
        for f in fixed.iter().chain(accepted.iter()) {
            let coef = f.dotc(&v);
            v -= f * coef;
        }
        // Second pass to keep orthogonality tight.
        for f in fixed.iter().chain(accepted.iter()) {
            let coef = f.dotc(&v);
            v -= f * coef;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            accepted.push(v / C64::new(norm, 0.0));
        }
    }
    if accepted.len() < want {
        return Err(Error::Invalid(format!(
            "could not build a {want}-dimensional complement basis"
        )));
    }
    let mut q = DMatrix::<C64>::zeros(n, want);
    for (k, col) in accepted.iter().enumerate() {
        q.set_column(k, col);
    }
    Ok(q)
}
