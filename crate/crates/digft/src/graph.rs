//! Graph and signal data model shared by every other module.
//!
//! Adjacency matrices are stored dense with complex-capable entries and a
//! weight-class tag recording the narrowest class that contains all weights.
//! Everything is immutable after construction.

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Narrowest weight class containing every entry of an adjacency matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum WeightClass {
    Nonnegative,
    Indefinite,
    Complex,
}

impl WeightClass {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightClass::Nonnegative => "nonnegative",
            WeightClass::Indefinite => "indefinite",
            WeightClass::Complex => "complex",
        }
    }
}

/// Directed graph with dense complex-capable adjacency matrix.
///
/// Invariants enforced at construction: square with side `n >= 1`, zero
/// diagonal, and `weight_class` equal to the narrowest class containing all
/// entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adj: DMatrix<C64>,
    weight_class: WeightClass,
}

fn infer_class(adj: &DMatrix<C64>) -> WeightClass {
    let mut class = WeightClass::Nonnegative;
    for z in adj.iter() {
        if z.im != 0.0 {
            return WeightClass::Complex;
        }
        if z.re < 0.0 {
            class = WeightClass::Indefinite;
        }
    }
    class
}

impl Graph {
    /// Builds a graph from a complex adjacency matrix, inferring the
    /// narrowest weight class. Rejects non-square input and self-loops.
    pub fn from_complex(adj: DMatrix<C64>) -> Result<Self> {
        if adj.nrows() != adj.ncols() {
            return Err(Error::Dimension(format!(
                "adjacency matrix must be square, got {}x{}",
                adj.nrows(),
                adj.ncols()
            )));
        }
        let n = adj.nrows();
        if n == 0 {
            return Err(Error::Dimension("adjacency matrix must have side >= 1".into()));
        }
        for i in 0..n {
            if adj[(i, i)] != C64::new(0.0, 0.0) {
                return Err(Error::SelfLoop(i));
            }
        }
        for z in adj.iter() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::Invalid("adjacency entries must be finite".into()));
            }
        }
        let weight_class = infer_class(&adj);
        Ok(Graph {
            n,
            adj,
            weight_class,
        })
    }

    pub fn from_real(adj: DMatrix<f64>) -> Result<Self> {
        Self::from_complex(adj.map(|x| C64::new(x, 0.0)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adj(&self) -> &DMatrix<C64> {
        &self.adj
    }

    pub fn weight_class(&self) -> WeightClass {
        self.weight_class
    }

    /// Real view of the adjacency matrix. Errors for Complex-class graphs.
    pub fn real_adj(&self) -> Result<DMatrix<f64>> {
        if self.weight_class == WeightClass::Complex {
            return Err(Error::WeightClass {
                op: "real_adj",
                required: "indefinite-or-narrower",
                actual: self.weight_class.as_str(),
            });
        }
        Ok(self.adj.map(|z| z.re))
    }

    /// Graph with every weight replaced by its modulus.
    pub fn absolute(&self) -> Graph {
        let adj = self.adj.map(|z| C64::new(z.norm(), 0.0));
        Graph {
            n: self.n,
            weight_class: WeightClass::Nonnegative,
            adj,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if (self.adj[(i, j)] - self.adj[(j, i)]).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Short content digest used as a graph identifier in reports and bases.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.n.to_le_bytes());
        for z in self.adj.iter() {
            hasher.update(z.re.to_le_bytes());
            hasher.update(z.im.to_le_bytes());
        }
        let out = hasher.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Value class of a graph signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ValueClass {
    Real,
    Complex,
}

/// A scalar value per vertex, real- or complex-valued.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSignal {
    values: DVector<C64>,
    value_class: ValueClass,
}

impl GraphSignal {
    pub fn from_complex(values: DVector<C64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension("signal must have length >= 1".into()));
        }
        for z in values.iter() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::Invalid("signal entries must be finite".into()));
            }
        }
        let value_class = if values.iter().all(|z| z.im == 0.0) {
            ValueClass::Real
        } else {
            ValueClass::Complex
        };
        Ok(GraphSignal {
            values,
            value_class,
        })
    }

    pub fn from_real(values: DVector<f64>) -> Result<Self> {
        Self::from_complex(values.map(|x| C64::new(x, 0.0)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<C64> {
        &self.values
    }

    pub fn value_class(&self) -> ValueClass {
        self.value_class
    }

    pub fn real_values(&self) -> Result<DVector<f64>> {
        if self.value_class == ValueClass::Complex {
            return Err(Error::SignalClass { op: "real_values" });
        }
        Ok(self.values.map(|z| z.re))
    }
}

/// Time-indexed sequence of graph signals sharing one length.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    times: Vec<f64>,
    frames: Vec<GraphSignal>,
}

impl SignalSeries {
    pub fn new(times: Vec<f64>, frames: Vec<GraphSignal>) -> Result<Self> {
        if times.len() != frames.len() {
            return Err(Error::Dimension(format!(
                "series has {} timestamps but {} frames",
                times.len(),
                frames.len()
            )));
        }
        if frames.is_empty() {
            return Err(Error::Invalid("signal series must be non-empty".into()));
        }
        let n = frames[0].len();
        for (k, f) in frames.iter().enumerate() {
            if f.len() != n {
                return Err(Error::Dimension(format!(
                    "frame {k} has length {}, expected {n}",
                    f.len()
                )));
            }
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Invalid(format!(
                    "timestamps must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(SignalSeries { times, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn signal_len(&self) -> usize {
        self.frames[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> &[GraphSignal] {
        &self.frames
    }
}

/// Outcome of the Dale's-law diagnostic.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct DalesLawReport {
    pub compliant: bool,
    /// Vertices whose outgoing (row) weights mix signs.
    pub offending_rows: Vec<usize>,
}

/// Checks that every vertex has single-signed outgoing weights (row i of A).
///
/// Diagnostic only; complex graphs are rejected since the sign test needs
/// real weights.
pub fn check_dales_law(g: &Graph) -> Result<DalesLawReport> {
    if g.weight_class() == WeightClass::Complex {
        return Err(Error::WeightClass {
            op: "check_dales_law",
            required: "indefinite-or-narrower",
            actual: g.weight_class().as_str(),
        });
    }
    let mut offending_rows = Vec::new();
    for i in 0..g.n() {
        let mut pos = false;
        let mut neg = false;
        for j in 0..g.n() {
            let w = g.adj()[(i, j)].re;
            if w > 0.0 {
                pos = true;
            } else if w < 0.0 {
                neg = true;
            }
        }
        if pos && neg {
            offending_rows.push(i);
        }
    }
    Ok(DalesLawReport {
        compliant: offending_rows.is_empty(),
        offending_rows,
    })
}
