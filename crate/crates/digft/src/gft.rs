//! Forward/inverse graph Fourier transforms and power-spectrum analysis.
//!
//! With an orthonormal basis `U`, the transform is `x_hat = U^H x` and the
//! inverse is `x = U x_hat`; both preserve the signal norm.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::basis::GftBasis;
use crate::error::{Error, Result};
use crate::graph::{C64, GraphSignal, SignalSeries};

/// GFT coefficients of one signal.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Coefficient per harmonic, ordered ascending by basis frequency.
    pub coefficients: DVector<C64>,
    pub frequencies: Vec<f64>,
    pub basis_ref: String,
}

/// Per-harmonic total power of a signal series.
#[derive(Debug, Clone)]
pub struct PowerSpectrum {
    /// `P_k = sum_t |x_hat_k(t)|^2`.
    pub powers: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub basis_ref: String,
}

fn check_dims(basis: &GftBasis, len: usize) -> Result<()> {
    if basis.n() != len {
        return Err(Error::Dimension(format!(
            "signal length {len} does not match basis size {}",
            basis.n()
        )));
    }
    Ok(())
}

/// Forward transform `x_hat = U^H x`.
pub fn forward(basis: &GftBasis, x: &GraphSignal) -> Result<Spectrum> {
    check_dims(basis, x.len())?;
    let coefficients = basis.columns.adjoint() * x.values();
    Ok(Spectrum {
        coefficients,
        frequencies: basis.frequencies.clone(),
        basis_ref: basis.graph_ref.clone(),
    })
}

/// Inverse transform `x = U x_hat`.
pub fn inverse(basis: &GftBasis, s: &Spectrum) -> Result<GraphSignal> {
    check_dims(basis, s.coefficients.len())?;
    let values = &basis.columns * &s.coefficients;
    GraphSignal::from_complex(values)
}

/// Time-by-harmonic coefficient matrix (rows = time steps, columns =
/// harmonics); the per-harmonic traces behind a power spectrum.
pub fn coefficient_matrix(basis: &GftBasis, series: &SignalSeries) -> Result<DMatrix<C64>> {
    check_dims(basis, series.signal_len())?;
    let t = series.len();
    let n = basis.n();
    let mut m = DMatrix::<C64>::zeros(t, n);
    for (row, frame) in series.frames().iter().enumerate() {
        let coef = basis.columns.adjoint() * frame.values();
        for k in 0..n {
            m[(row, k)] = coef[k];
        }
    }
    Ok(m)
}

/// Total power per harmonic over a signal series.
pub fn power_spectrum(basis: &GftBasis, series: &SignalSeries) -> Result<PowerSpectrum> {
    if series.is_empty() {
        return Err(Error::Invalid("power spectrum of an empty series".into()));
    }
    let coef = coefficient_matrix(basis, series)?;
    let n = basis.n();
    let mut powers = vec![0.0; n];
    for row in 0..coef.nrows() {
        for k in 0..n {
            powers[k] += coef[(row, k)].norm_sqr();
        }
    }
    Ok(PowerSpectrum {
        powers,
        frequencies: basis.frequencies.clone(),
        basis_ref: basis.graph_ref.clone(),
    })
}

/// Sums harmonic powers by label; unlabeled harmonics fall into "other".
pub fn group_powers(
    p: &PowerSpectrum,
    groups: &BTreeMap<usize, String>,
) -> Result<BTreeMap<String, f64>> {
    let n = p.powers.len();
    for &index in groups.keys() {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, n });
        }
    }
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for (k, &power) in p.powers.iter().enumerate() {
        let label = groups.get(&k).cloned().unwrap_or_else(|| "other".to_string());
        *out.entry(label).or_insert(0.0) += power;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisMethod, GftBasis};
    use crate::variation::FrequencyKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn identity_basis(n: usize) -> GftBasis {
        GftBasis {
            columns: DMatrix::<C64>::identity(n, n),
            frequencies: (0..n).map(|k| k as f64).collect(),
            kind: FrequencyKind::Cdv,
            method: BasisMethod::Greedy,
            graph_ref: "test".into(),
            f_max: (n - 1) as f64,
        }
    }

    fn random_unitary_basis(n: usize, seed: u64) -> GftBasis {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut cols: Vec<DVector<C64>> = Vec::new();
        while cols.len() < n {
            let mut v = DVector::from_fn(n, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            for prev in &cols {
                let coef = prev.dotc(&v);
                v -= prev * coef;
            }
            let norm = v.norm();
            if norm > 1e-6 {
                cols.push(v / c(norm, 0.0));
            }
        }
        let mut columns = DMatrix::<C64>::zeros(n, n);
        for (k, col) in cols.iter().enumerate() {
            columns.set_column(k, col);
        }
        GftBasis {
            columns,
            frequencies: (0..n).map(|k| k as f64 * 0.5).collect(),
            kind: FrequencyKind::Cdv,
            method: BasisMethod::Feasible,
            graph_ref: "test".into(),
            f_max: (n - 1) as f64 * 0.5,
        }
    }

    #[test]
    fn identity_basis_is_identity_transform() {
        let basis = identity_basis(3);
        let x = GraphSignal::from_complex(nalgebra::dvector![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 1.0)])
            .unwrap();
        let s = forward(&basis, &x).unwrap();
        assert!((&s.coefficients - x.values()).norm() < 1e-15);
    }

    #[test]
    fn basis_column_maps_to_coordinate() {
        let basis = random_unitary_basis(5, 3);
        for k in 0..5 {
            let x = GraphSignal::from_complex(basis.columns.column(k).clone_owned()).unwrap();
            let s = forward(&basis, &x).unwrap();
            for j in 0..5 {
                let expected = if j == k { 1.0 } else { 0.0 };
                assert!((s.coefficients[j] - c(expected, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let basis = random_unitary_basis(6, 9);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x = GraphSignal::from_complex(DVector::from_fn(6, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }))
            .unwrap();
            let s = forward(&basis, &x).unwrap();
            // Parseval.
            assert!((s.coefficients.norm() - x.values().norm()).abs() < 1e-9);
            let back = inverse(&basis, &s).unwrap();
            assert!((back.values() - x.values()).norm() < 1e-9);
        }
    }

    #[test]
    fn forward_is_linear() {
        let basis = random_unitary_basis(4, 21);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let xv = DVector::from_fn(4, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let yv = DVector::from_fn(4, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let a = c(0.7, -0.2);
        let b = c(-1.3, 0.4);
        let lhs = forward(
            &basis,
            &GraphSignal::from_complex(&xv * a + &yv * b).unwrap(),
        )
        .unwrap();
        let sx = forward(&basis, &GraphSignal::from_complex(xv).unwrap()).unwrap();
        let sy = forward(&basis, &GraphSignal::from_complex(yv).unwrap()).unwrap();
        let rhs = sx.coefficients * a + sy.coefficients * b;
        assert!((lhs.coefficients - rhs).norm() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let basis = identity_basis(3);
        let x = GraphSignal::from_real(nalgebra::dvector![1.0, 2.0]).unwrap();
        assert!(matches!(forward(&basis, &x), Err(Error::Dimension(_))));
    }

    #[test]
    fn power_spectrum_single_frame_identity() {
        let basis = identity_basis(3);
        let x = GraphSignal::from_complex(nalgebra::dvector![c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0)])
            .unwrap();
        let series = SignalSeries::new(vec![0.0], vec![x.clone()]).unwrap();
        let p = power_spectrum(&basis, &series).unwrap();
        for k in 0..3 {
            assert!((p.powers[k] - x.values()[k].norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn power_spectrum_repeated_column() {
        let basis = random_unitary_basis(4, 33);
        let col = GraphSignal::from_complex(basis.columns.column(1).clone_owned()).unwrap();
        let t = 7;
        let series = SignalSeries::new(
            (0..t).map(|k| k as f64).collect(),
            vec![col; t],
        )
        .unwrap();
        let p = power_spectrum(&basis, &series).unwrap();
        assert!((p.powers[1] - t as f64).abs() < 1e-9);
        for k in [0usize, 2, 3] {
            assert!(p.powers[k].abs() < 1e-9);
        }
    }

    #[test]
    fn total_power_identity() {
        let basis = random_unitary_basis(5, 41);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let frames: Vec<GraphSignal> = (0..20)
            .map(|_| {
                GraphSignal::from_complex(DVector::from_fn(5, |_, _| {
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                }))
                .unwrap()
            })
            .collect();
        let signal_power: f64 = frames.iter().map(|f| f.values().norm_squared()).sum();
        let series = SignalSeries::new((0..20).map(|k| k as f64).collect(), frames).unwrap();
        let p = power_spectrum(&basis, &series).unwrap();
        let total: f64 = p.powers.iter().sum();
        assert!((total - signal_power).abs() / signal_power < 1e-6);
    }

    #[test]
    fn group_powers_cases() {
        let p = PowerSpectrum {
            powers: vec![1.0, 2.0, 3.0, 4.0],
            frequencies: vec![0.0, 1.0, 2.0, 3.0],
            basis_ref: "test".into(),
        };
        // All in one group.
        let groups: BTreeMap<usize, String> =
            (0..4).map(|k| (k, "all".to_string())).collect();
        let out = group_powers(&p, &groups).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out["all"] - 10.0).abs() < 1e-12);

        // Empty grouping: everything lands in "other".
        let out = group_powers(&p, &BTreeMap::new()).unwrap();
        assert!((out["other"] - 10.0).abs() < 1e-12);

        // Two disjoint groups plus the remainder preserve the grand total.
        let groups: BTreeMap<usize, String> = BTreeMap::from([
            (0, "a".to_string()),
            (2, "b".to_string()),
        ]);
        let out = group_powers(&p, &groups).unwrap();
        let total: f64 = out.values().sum();
        assert!((total - 10.0).abs() < 1e-12);
        assert!((out["a"] - 1.0).abs() < 1e-12);
        assert!((out["b"] - 3.0).abs() < 1e-12);
        assert!((out["other"] - 6.0).abs() < 1e-12);

        // Out-of-range index.
        let groups: BTreeMap<usize, String> = BTreeMap::from([(9, "x".to_string())]);
        assert!(matches!(
            group_powers(&p, &groups),
            Err(Error::IndexOutOfRange { .. })
        ));
    }
}
