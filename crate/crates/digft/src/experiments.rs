//! Random-graph ensembles, the ordering-discordance study, and the
//! greedy-vs-feasible comparison harness.
//!
//! Everything is a pure function of (config, master seed): per-instance RNG
//! seeds come from the counter-based scheme in [`crate::seeding`], so
//! instances are reproducible in isolation and the aggregates are
//! independent of execution order.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::basis::{DescentConfig, GreedyConfig, feasible_basis_with, greedy_basis};
use crate::error::Result;
use crate::graph::{C64, Graph, GraphSignal};
use crate::seeding::{derive_seed, streams};
use crate::variation::{FrequencyKind, VariationKind, variation};

/// Random graph classes from the simulation study.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum GraphClass {
    /// Cycle lattice; each lattice edge gets one random direction unless
    /// `bidirectional` is set.
    RingLattice { n: usize, bidirectional: bool },
    /// Directed edge per ordered pair with probability `p`.
    ErdosRenyi { n: usize, p: f64 },
    /// Ordered pairs with probability `p_in` within a community and `p_out`
    /// across.
    StochasticBlock {
        communities: usize,
        per_community: usize,
        p_in: f64,
        p_out: f64,
    },
}

impl GraphClass {
    pub fn n(&self) -> usize {
        match self {
            GraphClass::RingLattice { n, .. } => *n,
            GraphClass::ErdosRenyi { n, .. } => *n,
            GraphClass::StochasticBlock {
                communities,
                per_community,
                ..
            } => communities * per_community,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            GraphClass::RingLattice { .. } => "ring",
            GraphClass::ErdosRenyi { .. } => "er",
            GraphClass::StochasticBlock { .. } => "sbm",
        }
    }

    pub fn ring_default() -> Self {
        GraphClass::RingLattice {
            n: 16,
            bidirectional: false,
        }
    }

    pub fn er_default() -> Self {
        GraphClass::ErdosRenyi { n: 16, p: 0.2 }
    }

    pub fn sbm_default() -> Self {
        GraphClass::StochasticBlock {
            communities: 3,
            per_community: 8,
            p_in: 0.5,
            p_out: 0.1,
        }
    }

    /// The three classes of the simulation study.
    pub fn paper_classes() -> Vec<GraphClass> {
        vec![Self::ring_default(), Self::er_default(), Self::sbm_default()]
    }
}

/// One ensemble: a graph class, a weight set, and a master seed.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnsembleConfig {
    pub class: GraphClass,
    /// Weights drawn i.i.d. uniformly from this set (default {1,-1,i,-i}).
    pub weight_set: Vec<C64>,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn new(class: GraphClass, seed: u64) -> Self {
        EnsembleConfig {
            class,
            weight_set: default_weight_set(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.class.n() < 2 {
            return Err(Error::Invalid("ensembles need n >= 2".into()));
        }
        let prob_ok = match self.class {
            GraphClass::ErdosRenyi { p, .. } => (0.0..=1.0).contains(&p),
            GraphClass::StochasticBlock { p_in, p_out, .. } => {
                (0.0..=1.0).contains(&p_in) && (0.0..=1.0).contains(&p_out)
            }
            GraphClass::RingLattice { .. } => true,
        };
        if !prob_ok {
            return Err(Error::Invalid("edge probabilities must lie in [0,1]".into()));
        }
        if self.weight_set.is_empty() {
            return Err(Error::Invalid("weight set must be non-empty".into()));
        }
        Ok(())
    }
}

pub fn default_weight_set() -> Vec<C64> {
    vec![
        C64::new(1.0, 0.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(0.0, -1.0),
    ]
}

/// A complex graph together with its indefinite (+-i replaced by +-1) and
/// all-ones positive derivations; all three share one sparsity pattern.
#[derive(Debug, Clone)]
pub struct DerivedGraphs {
    pub g: Graph,
    pub g_i: Graph,
    pub g_p: Graph,
}

fn draw_weight(set: &[C64], rng: &mut ChaCha12Rng) -> C64 {
    set[rng.gen_range(0..set.len())]
}

/// Generates the complex graph for (`cfg`, `instance_seed`) and its derived
/// indefinite and positive variants.
pub fn generate(cfg: &EnsembleConfig, instance_seed: u64) -> Result<DerivedGraphs> {
    cfg.validate()?;
    let mut rng =
        ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, streams::ENSEMBLE_GRAPH, instance_seed));
    let n = cfg.class.n();
    let mut adj = DMatrix::<C64>::zeros(n, n);
    match &cfg.class {
        GraphClass::RingLattice { bidirectional, .. } => {
            for i in 0..n {
                let j = (i + 1) % n;
                if *bidirectional {
                    adj[(i, j)] = draw_weight(&cfg.weight_set, &mut rng);
                    adj[(j, i)] = draw_weight(&cfg.weight_set, &mut rng);
                } else {
                    let w = draw_weight(&cfg.weight_set, &mut rng);
                    if rng.gen_bool(0.5) {
                        adj[(i, j)] = w;
                    } else {
                        adj[(j, i)] = w;
                    }
                }
            }
        }
        GraphClass::ErdosRenyi { p, .. } => {
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(*p) {
                        adj[(i, j)] = draw_weight(&cfg.weight_set, &mut rng);
                    }
                }
            }
        }
        GraphClass::StochasticBlock {
            per_community,
            p_in,
            p_out,
            ..
        } => {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let p = if i / per_community == j / per_community {
                        *p_in
                    } else {
                        *p_out
                    };
                    if rng.gen_bool(p) {
                        adj[(i, j)] = draw_weight(&cfg.weight_set, &mut rng);
                    }
                }
            }
        }
    }

    let adj_i = adj.map(|z| {
        if z.im != 0.0 {
            C64::new(z.im.signum(), 0.0)
        } else {
            z
        }
    });
    let adj_p = adj.map(|z| {
        if z != C64::new(0.0, 0.0) {
            C64::new(1.0, 0.0)
        } else {
            z
        }
    });
    Ok(DerivedGraphs {
        g: Graph::from_complex(adj)?,
        g_i: Graph::from_complex(adj_i)?,
        g_p: Graph::from_complex(adj_p)?,
    })
}

/// Uniformly distributed unit vector in R^n (normalized Gaussian).
pub fn random_real_unit(n: usize, rng: &mut ChaCha12Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Per-instance discordance flags for one class.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClassDiscordance {
    pub class: String,
    pub seed: u64,
    /// (IDV comparison discordant, CDV comparison discordant) per instance.
    pub flags: Vec<(bool, bool)>,
    pub discordant: usize,
    pub comparisons: usize,
    pub fraction_discordant: f64,
}

/// Aggregated discordance study results.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DiscordanceReport {
    pub per_class: Vec<ClassDiscordance>,
    pub discordant: usize,
    pub comparisons: usize,
    pub fraction_discordant: f64,
    pub instances_per_class: usize,
    pub master_seed: u64,
}

const SIGN_TIE_TOL: f64 = 1e-12;

fn sign_with_tie(delta: f64) -> i8 {
    if delta.abs() <= SIGN_TIE_TOL {
        0
    } else if delta > 0.0 {
        1
    } else {
        -1
    }
}

/// Runs the ordering-discordance experiment: per instance, two random real
/// unit vectors are compared under DV on the positive graph versus IDV on
/// the indefinite graph and CDV on the complex graph. Ties count as
/// concordant.
pub fn discordance_experiment(
    configs: &[EnsembleConfig],
    instances: usize,
    master_seed: u64,
) -> Result<DiscordanceReport> {
    let mut per_class = Vec::with_capacity(configs.len());
    let mut total_disc = 0usize;
    let mut total_cmp = 0usize;
    for (class_idx, cfg) in configs.iter().enumerate() {
        cfg.validate()?;
        let class_seed = derive_seed(master_seed, class_idx as u64, 0);
        let cfg = EnsembleConfig {
            seed: class_seed,
            ..cfg.clone()
        };
        let flags: Vec<(bool, bool)> = (0..instances)
            .into_par_iter()
            .map(|t| {
                let derived = generate(&cfg, t as u64).expect("validated config");
                let n = cfg.class.n();
                let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(
                    class_seed,
                    streams::DISCORDANCE_SIGNALS,
                    t as u64,
                ));
                let x = GraphSignal::from_real(random_real_unit(n, &mut rng)).expect("unit vector");
                let y = GraphSignal::from_real(random_real_unit(n, &mut rng)).expect("unit vector");
                let dv_x = variation(VariationKind::Dv, &derived.g_p, &x).expect("dv");
                let dv_y = variation(VariationKind::Dv, &derived.g_p, &y).expect("dv");
                let idv_x = variation(VariationKind::Idv, &derived.g_i, &x).expect("idv");
                let idv_y = variation(VariationKind::Idv, &derived.g_i, &y).expect("idv");
                let cdv_x = variation(VariationKind::Cdv, &derived.g, &x).expect("cdv");
                let cdv_y = variation(VariationKind::Cdv, &derived.g, &y).expect("cdv");
                let s_dv = sign_with_tie(dv_x - dv_y);
                let s_idv = sign_with_tie(idv_x - idv_y);
                let s_cdv = sign_with_tie(cdv_x - cdv_y);
                let disc_idv = s_dv != 0 && s_idv != 0 && s_dv != s_idv;
                let disc_cdv = s_dv != 0 && s_cdv != 0 && s_dv != s_cdv;
                (disc_idv, disc_cdv)
            })
            .collect();
        let discordant = flags.iter().map(|&(a, b)| a as usize + b as usize).sum();
        let comparisons = 2 * instances;
        total_disc += discordant;
        total_cmp += comparisons;
        per_class.push(ClassDiscordance {
            class: cfg.class.label().to_string(),
            seed: class_seed,
            fraction_discordant: discordant as f64 / comparisons as f64,
            flags,
            discordant,
            comparisons,
        });
    }
    Ok(DiscordanceReport {
        per_class,
        discordant: total_disc,
        comparisons: total_cmp,
        fraction_discordant: total_disc as f64 / total_cmp as f64,
        instances_per_class: instances,
        master_seed,
    })
}

/// One basis run inside the method comparison.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ComparisonRecord {
    pub class: String,
    pub instance: usize,
    pub kind: String,
    pub method: String,
    pub max_freq: f64,
    /// Paper-style dispersion over basis frequencies, no endpoints.
    pub delta_paper: f64,
    /// Dispersion including the (0, f_max) endpoints.
    pub delta_endpoints: f64,
    pub orthonormality_defect: f64,
    pub warm_start_dispersion: Option<f64>,
    pub seed: u64,
}

/// Greedy-vs-feasible comparison over M graphs per class.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ComparisonReport {
    pub records: Vec<ComparisonRecord>,
    pub m_per_class: usize,
    pub master_seed: u64,
}

impl ComparisonReport {
    /// Pearson correlation between the paper-style dispersion and the
    /// maximum frequency across all records.
    pub fn dispersion_max_freq_correlation(&self) -> f64 {
        pearson(
            &self.records.iter().map(|r| r.delta_paper).collect::<Vec<_>>(),
            &self.records.iter().map(|r| r.max_freq).collect::<Vec<_>>(),
        )
    }
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Runs greedy and feasible bases under IDV (on the indefinite derivation)
/// and CDV (on the complex graph) for M instances per class.
pub fn method_comparison(
    configs: &[EnsembleConfig],
    m: usize,
    master_seed: u64,
    dcfg: &DescentConfig,
    gcfg: &GreedyConfig,
) -> Result<ComparisonReport> {
    for cfg in configs {
        cfg.validate()?;
    }
    dcfg.validate()?;
    gcfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..m).map(move |t| (c, t)))
        .collect();
    let results: Vec<Vec<ComparisonRecord>> = jobs
        .into_par_iter()
        .map(|(class_idx, t)| {
            let base = &configs[class_idx];
            let class_seed = derive_seed(master_seed, class_idx as u64, 0);
            let cfg = EnsembleConfig {
                seed: class_seed,
                ..base.clone()
            };
            let derived = generate(&cfg, t as u64).expect("validated config");
            let instance_seed = derive_seed(class_seed, streams::ENSEMBLE_GRAPH, t as u64);
            let mut records = Vec::with_capacity(4);
            for (kind, graph) in [
                (FrequencyKind::Idv, &derived.g_i),
                (FrequencyKind::Cdv, &derived.g),
            ] {
                let greedy = greedy_basis(graph, kind, gcfg).expect("greedy basis");
                records.push(ComparisonRecord {
                    class: cfg.class.label().to_string(),
                    instance: t,
                    kind: kind.as_str().to_string(),
                    method: "greedy".to_string(),
                    max_freq: greedy.max_frequency(),
                    delta_paper: greedy.dispersion_endpoint_free(),
                    delta_endpoints: greedy.dispersion_with_endpoints(),
                    orthonormality_defect: greedy.orthonormality_defect(),
                    warm_start_dispersion: None,
                    seed: instance_seed,
                });
                let run_cfg = DescentConfig {
                    rng_seed: derive_seed(instance_seed, kind as u64, 1),
                    ..dcfg.clone()
                };
                let feas = feasible_basis_with(graph, kind, &run_cfg, gcfg).expect("feasible basis");
                records.push(ComparisonRecord {
                    class: cfg.class.label().to_string(),
                    instance: t,
                    kind: kind.as_str().to_string(),
                    method: "feasible".to_string(),
                    max_freq: feas.basis.max_frequency(),
                    delta_paper: feas.basis.dispersion_endpoint_free(),
                    delta_endpoints: feas.basis.dispersion_with_endpoints(),
                    orthonormality_defect: feas.basis.orthonormality_defect(),
                    warm_start_dispersion: Some(feas.warm_start_dispersion),
                    seed: instance_seed,
                });
            }
            records
        })
        .collect();
    Ok(ComparisonReport {
        records: results.into_iter().flatten().collect(),
        m_per_class: m,
        master_seed,
    })
}
