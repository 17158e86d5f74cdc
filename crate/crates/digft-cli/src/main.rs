//! `digft`: graph Fourier transforms for signed and complex directed graphs.
//!
//! Exit codes: 0 success, 1 failed validation, 2 usage error, 3 input/parse
//! error, 4 numerical failure.

mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use digft::basis::{
    DescentConfig, GftBasis, GreedyConfig, feasible_basis_with, greedy_basis,
};
use digft::experiments::{
    EnsembleConfig, GraphClass, discordance_experiment, generate, method_comparison,
};
use digft::gft::{coefficient_matrix, group_powers, power_spectrum};
use digft::graph::{Graph, check_dales_law};
use digft::io::{
    GraphFormat, format_complex, load_basis, load_graph, load_signal_series, save_basis,
    save_graph_edge_list,
};
use digft::variation::{FrequencyKind, VariationKind, variation};
use digft::{Error, WeightClass};

use manifest::ManifestBuilder;

#[derive(Parser)]
#[command(
    name = "digft",
    version,
    about = "Graph Fourier transforms for directed graphs with signed or complex weights"
)]
struct Cli {
    /// Worker threads for experiments and restarts (env: DIGFT_JOBS;
    /// default: available cores). Output is independent of this value.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one random graph instance (complex weights from {1,-1,i,-i}).
    Gen(GenArgs),
    /// Print the variation of a signal on a graph.
    Variation(VariationArgs),
    /// Build a GFT basis and write it to a directory.
    Basis(BasisArgs),
    /// Transform a signal series: write the time-by-harmonic coefficients.
    Transform(TransformArgs),
    /// Per-harmonic total power of a signal series, optionally grouped.
    Spectra(SpectraArgs),
    /// Ordering-discordance study across the three random graph classes.
    ExperimentDiscordance(DiscordanceArgs),
    /// Greedy-vs-feasible comparison over M graphs per class.
    ExperimentCompare(CompareArgs),
    /// Structural checks on a graph file.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Ring,
    Er,
    Sbm,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Tv,
    Dv,
    Idv,
    Cdv,
}

#[derive(Clone, Copy, ValueEnum)]
enum FreqKindArg {
    Idv,
    Cdv,
}

impl From<FreqKindArg> for FrequencyKind {
    fn from(k: FreqKindArg) -> Self {
        match k {
            FreqKindArg::Idv => FrequencyKind::Idv,
            FreqKindArg::Cdv => FrequencyKind::Cdv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Greedy,
    Feasible,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    EdgeList,
    Dense,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    class: ClassArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instance counter within the ensemble.
    #[arg(long, default_value_t = 0)]
    instance: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the derived indefinite (`_gi`) and positive (`_gp`) graphs.
    #[arg(long)]
    emit_derived: bool,
    /// Vertex count (ring/ER classes).
    #[arg(long)]
    n: Option<usize>,
    /// ER attachment probability per ordered pair.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
    #[arg(long)]
    communities: Option<usize>,
    #[arg(long)]
    per_community: Option<usize>,
    /// Keep both directions of every ring-lattice edge.
    #[arg(long)]
    bidirectional_ring: bool,
}

#[derive(Args)]
struct VariationArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Signal series CSV with exactly one row.
    #[arg(long)]
    signal: PathBuf,
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, value_enum, default_value = "edge-list")]
    format: FormatArg,
}

#[derive(Args)]
struct BasisArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum)]
    kind: FreqKindArg,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Phase-grid size for the complex path.
    #[arg(long = "K", default_value_t = 16)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "edge-list")]
    format: FormatArg,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    basis: PathBuf,
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectraArgs {
    #[arg(long)]
    basis: PathBuf,
    #[arg(long)]
    series: PathBuf,
    /// JSON mapping of group label to harmonic indices.
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiscordanceArgs {
    #[arg(long, default_value_t = 10000)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long = "M", default_value_t = 20)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long = "K", default_value_t = 16)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Also require single-signed outgoing weights per vertex.
    #[arg(long)]
    dales_law: bool,
    #[arg(long, value_enum, default_value = "edge-list")]
    format: FormatArg,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NoConvergence(_) | Error::SingularStep(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli
        .jobs
        .or_else(|| {
            std::env::var("DIGFT_JOBS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .max(1);
    if rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .is_err()
    {
        // Pool already initialized (only possible in tests); proceed.
    }
    match run(cli.command, jobs) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn graph_format(f: FormatArg) -> GraphFormat {
    match f {
        FormatArg::EdgeList => GraphFormat::EdgeList,
        FormatArg::Dense => GraphFormat::DenseCsv,
    }
}

fn run(command: Command, jobs: usize) -> Result<u8, Error> {
    match command {
        Command::Gen(args) => run_gen(args, jobs),
        Command::Variation(args) => run_variation(args),
        Command::Basis(args) => run_basis(args, jobs),
        Command::Transform(args) => run_transform(args, jobs),
        Command::Spectra(args) => run_spectra(args, jobs),
        Command::ExperimentDiscordance(args) => run_discordance(args, jobs),
        Command::ExperimentCompare(args) => run_compare(args, jobs),
        Command::Validate(args) => run_validate(args),
    }
}

fn build_class(args: &GenArgs) -> GraphClass {
    match args.class {
        ClassArg::Ring => GraphClass::RingLattice {
            n: args.n.unwrap_or(16),
            bidirectional: args.bidirectional_ring,
        },
        ClassArg::Er => GraphClass::ErdosRenyi {
            n: args.n.unwrap_or(16),
            p: args.p.unwrap_or(0.2),
        },
        ClassArg::Sbm => GraphClass::StochasticBlock {
            communities: args.communities.unwrap_or(3),
            per_community: args.per_community.unwrap_or(8),
            p_in: args.p_in.unwrap_or(0.5),
            p_out: args.p_out.unwrap_or(0.1),
        },
    }
}

fn run_gen(args: GenArgs, jobs: usize) -> Result<u8, Error> {
    let mut manifest = ManifestBuilder::new("gen", args.seed, jobs);
    let class = build_class(&args);
    let cfg = EnsembleConfig::new(class, args.seed);
    manifest.set_config(serde_json::json!({
        "ensemble": &cfg,
        "instance": args.instance,
        "emit_derived": args.emit_derived,
    }));
    let derived = generate(&cfg, args.instance)?;
    save_graph_edge_list(&derived.g, &args.out)?;
    let mut written = vec![args.out.clone()];
    if args.emit_derived {
        let stem = args.out.file_stem().unwrap_or_default().to_string_lossy();
        let ext = args
            .out
            .extension()
            .map(|e| format!(".{}", e.to_string_lossy()))
            .unwrap_or_default();
        let dir = args.out.parent().unwrap_or(Path::new("."));
        let gi = dir.join(format!("{stem}_gi{ext}"));
        let gp = dir.join(format!("{stem}_gp{ext}"));
        save_graph_edge_list(&derived.g_i, &gi)?;
        save_graph_edge_list(&derived.g_p, &gp)?;
        written.push(gi);
        written.push(gp);
    }
    manifest.write_sibling(&args.out)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(0)
}

fn load_single_signal(path: &Path) -> Result<digft::GraphSignal, Error> {
    let series = load_signal_series(path)?;
    if series.len() != 1 {
        return Err(Error::Invalid(format!(
            "expected a single-frame signal, got {} rows; use `transform` for series",
            series.len()
        )));
    }
    Ok(series.frames()[0].clone())
}

fn run_variation(args: VariationArgs) -> Result<u8, Error> {
    let g = load_graph(&args.graph, graph_format(args.format))?;
    let x = load_single_signal(&args.signal)?;
    let kind = match args.kind {
        KindArg::Tv => VariationKind::Tv,
        KindArg::Dv => VariationKind::Dv,
        KindArg::Idv => VariationKind::Idv,
        KindArg::Cdv => VariationKind::Cdv,
    };
    let value = variation(kind, &g, &x)?;
    println!("{value}");
    Ok(0)
}

fn run_basis(args: BasisArgs, jobs: usize) -> Result<u8, Error> {
    let mut manifest = ManifestBuilder::new("basis", args.seed, jobs);
    manifest.add_input(&args.graph)?;
    let g = load_graph(&args.graph, graph_format(args.format))?;
    let kind: FrequencyKind = args.kind.into();
    let gcfg = GreedyConfig {
        phase_grid_size: args.k,
    };
    let dcfg = DescentConfig {
        restarts: args.restarts,
        max_iters: args.max_iters,
        rng_seed: args.seed,
        ..DescentConfig::default()
    };
    let config_echo = serde_json::json!({
        "kind": kind.as_str(),
        "method": match args.method { MethodArg::Greedy => "greedy", MethodArg::Feasible => "feasible" },
        "K": args.k,
        "descent": &dcfg,
    });
    manifest.set_config(config_echo.clone());
    let basis = match args.method {
        MethodArg::Greedy => greedy_basis(&g, kind, &gcfg)?,
        MethodArg::Feasible => {
            let res = feasible_basis_with(&g, kind, &dcfg, &gcfg)?;
            if res.iterations_exhausted {
                eprintln!("note: iteration budget exhausted before the objective tolerance");
            }
            res.basis
        }
    };
    save_basis(&basis, &args.out, &config_echo)?;
    manifest.write_into(&args.out)?;
    println!(
        "basis: n={} kind={} method={} f_max={:.6} dispersion={:.6} (endpoint-free {:.6})",
        basis.n(),
        basis.kind.as_str(),
        basis.method.as_str(),
        basis.f_max,
        basis.dispersion_with_endpoints(),
        basis.dispersion_endpoint_free()
    );
    Ok(0)
}

fn load_basis_checked(dir: &Path) -> Result<GftBasis, Error> {
    let basis = load_basis(dir)?;
    let defect = basis.orthonormality_defect();
    if defect > 1e-6 {
        return Err(Error::Invalid(format!(
            "basis at {} is not orthonormal (defect {defect:e})",
            dir.display()
        )));
    }
    Ok(basis)
}

fn run_transform(args: TransformArgs, jobs: usize) -> Result<u8, Error> {
    let mut manifest = ManifestBuilder::new("transform", 0, jobs);
    manifest.add_input(&args.basis.join("columns.csv"))?;
    manifest.add_input(&args.series)?;
    manifest.set_config(serde_json::json!({
        "basis": args.basis.display().to_string(),
        "series": args.series.display().to_string(),
    }));
    let basis = load_basis_checked(&args.basis)?;
    let series = load_signal_series(&args.series)?;
    let coef = coefficient_matrix(&basis, &series)?;
    let mut out = String::new();
    use std::fmt::Write as _;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..basis.n()).map(|k| format!("h{k}")))
        .collect();
    let _ = writeln!(out, "{}", header.join(","));
    for (row, t) in series.times().iter().enumerate() {
        let mut cells = vec![format!("{t}")];
        cells.extend((0..basis.n()).map(|k| format_complex(coef[(row, k)])));
        let _ = writeln!(out, "{}", cells.join(","));
    }
    std::fs::write(&args.out, out).map_err(|e| Error::io(&args.out, e))?;
    manifest.write_sibling(&args.out)?;
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn parse_groups(path: &Path, n: usize) -> Result<BTreeMap<usize, String>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse(path, 1, "expected an object of label -> [indices]"))?;
    let mut groups = BTreeMap::new();
    for (label, indices) in obj {
        let arr = indices.as_array().ok_or_else(|| {
            Error::parse(path, 1, format!("group `{label}` must list harmonic indices"))
        })?;
        for v in arr {
            let idx = v
                .as_u64()
                .ok_or_else(|| Error::parse(path, 1, "harmonic indices must be integers"))?
                as usize;
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, n });
            }
            if groups.insert(idx, label.clone()).is_some() {
                return Err(Error::parse(
                    path,
                    1,
                    format!("harmonic {idx} labeled more than once"),
                ));
            }
        }
    }
    Ok(groups)
}

fn run_spectra(args: SpectraArgs, jobs: usize) -> Result<u8, Error> {
    let mut manifest = ManifestBuilder::new("spectra", 0, jobs);
    manifest.add_input(&args.basis.join("columns.csv"))?;
    manifest.add_input(&args.series)?;
    let basis = load_basis_checked(&args.basis)?;
    let series = load_signal_series(&args.series)?;
    let power = power_spectrum(&basis, &series)?;
    let mut out = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(out, "k,frequency,value");
    for (k, (f, p)) in power
        .frequencies
        .iter()
        .zip(power.powers.iter())
        .enumerate()
    {
        let _ = writeln!(out, "{k},{f},{p}");
    }
    std::fs::write(&args.out, out).map_err(|e| Error::io(&args.out, e))?;
    let mut config = serde_json::json!({
        "basis": args.basis.display().to_string(),
        "series": args.series.display().to_string(),
    });
    if let Some(groups_path) = &args.groups {
        manifest.add_input(groups_path)?;
        let groups = parse_groups(groups_path, basis.n())?;
        let grouped = group_powers(&power, &groups)?;
        let mut gout = String::new();
        let _ = writeln!(gout, "label,value");
        for (label, value) in &grouped {
            let _ = writeln!(gout, "{label},{value}");
        }
        let gpath = args.out.with_extension("groups.csv");
        std::fs::write(&gpath, gout).map_err(|e| Error::io(&gpath, e))?;
        config["groups"] = serde_json::json!(groups_path.display().to_string());
        println!("wrote {}", gpath.display());
    }
    manifest.set_config(config);
    manifest.write_sibling(&args.out)?;
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn run_discordance(args: DiscordanceArgs, jobs: usize) -> Result<u8, Error> {
    let mut manifest = ManifestBuilder::new("experiment-discordance", args.seed, jobs);
    let configs: Vec<EnsembleConfig> = GraphClass::paper_classes()
        .into_iter()
        .map(|class| EnsembleConfig::new(class, args.seed))
        .collect();
    manifest.set_config(serde_json::json!({
        "instances": args.instances,
        "classes": &configs,
    }));
    let report = discordance_experiment(&configs, args.instances, args.seed)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let summary = serde_json::json!({
        "master_seed": report.master_seed,
        "instances_per_class": report.instances_per_class,
        "comparisons": report.comparisons,
        "discordant": report.discordant,
        "fraction_discordant": report.fraction_discordant,
        "per_class": report.per_class.iter().map(|c| serde_json::json!({
            "class": c.class,
            "seed": c.seed,
            "discordant": c.discordant,
            "comparisons": c.comparisons,
            "fraction_discordant": c.fraction_discordant,
        })).collect::<Vec<_>>(),
        "ensembles": &configs,
    });
    let json_path = args.out.join("report.json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .map_err(|e| Error::io(&json_path, e))?;

    let mut csv = String::from("class,instance,comparison,discordant\n");
    use std::fmt::Write as _;
    for class in &report.per_class {
        for (t, (idv, cdv)) in class.flags.iter().enumerate() {
            let _ = writeln!(csv, "{},{t},idv,{}", class.class, *idv as u8);
            let _ = writeln!(csv, "{},{t},cdv,{}", class.class, *cdv as u8);
        }
    }
    let csv_path = args.out.join("discordance.csv");
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    manifest.write_into(&args.out)?;
    println!(
        "discordance: {}/{} = {:.6}",
        report.discordant, report.comparisons, report.fraction_discordant
    );
    for c in &report.per_class {
        println!("  {}: {:.6}", c.class, c.fraction_discordant);
    }
    Ok(0)
}

fn run_compare(args: CompareArgs, jobs: usize) -> Result<u8, Error> {
    let mut manifest = ManifestBuilder::new("experiment-compare", args.seed, jobs);
    let configs: Vec<EnsembleConfig> = GraphClass::paper_classes()
        .into_iter()
        .map(|class| EnsembleConfig::new(class, args.seed))
        .collect();
    let dcfg = DescentConfig {
        restarts: args.restarts,
        max_iters: args.max_iters,
        rng_seed: args.seed,
        ..DescentConfig::default()
    };
    let gcfg = GreedyConfig {
        phase_grid_size: args.k,
    };
    manifest.set_config(serde_json::json!({
        "M": args.m,
        "classes": &configs,
        "descent": &dcfg,
        "K": args.k,
    }));
    let report = method_comparison(&configs, args.m, args.seed, &dcfg, &gcfg)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let correlation = report.dispersion_max_freq_correlation();
    let summary = serde_json::json!({
        "master_seed": report.master_seed,
        "m_per_class": report.m_per_class,
        "records": report.records.len(),
        "dispersion_max_freq_correlation": correlation,
        "ensembles": &configs,
        "descent": &dcfg,
    });
    let json_path = args.out.join("report.json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .map_err(|e| Error::io(&json_path, e))?;

    let mut csv = String::from("class,instance,kind,method,max_freq,delta_paper,delta_endpoints\n");
    use std::fmt::Write as _;
    for r in &report.records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.class, r.instance, r.kind, r.method, r.max_freq, r.delta_paper, r.delta_endpoints
        );
    }
    let csv_path = args.out.join("comparison.csv");
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    manifest.write_into(&args.out)?;
    println!(
        "compare: {} records, dispersion/max-frequency correlation {:.4}",
        report.records.len(),
        correlation
    );
    Ok(0)
}


fn run_validate(args: ValidateArgs) -> Result<u8, Error> {
    let g: Graph = load_graph(&args.graph, graph_format(args.format))?;
    let edges = g
        .adj()
        .iter()
        .filter(|z| **z != digft::C64::new(0.0, 0.0))
        .count();
    println!(
        "graph: n={} weight_class={} edges={} symmetric={}",
        g.n(),
        g.weight_class().as_str(),
        edges,
        g.is_symmetric(1e-12)
    );
    let mut ok = true;
    if args.dales_law {
        if g.weight_class() == WeightClass::Complex {
            return Err(Error::Invalid(
                "Dale's law check needs real weights; graph is complex".into(),
            ));
        }
        let report = check_dales_law(&g)?;
        if report.compliant {
            println!("dales-law: compliant");
        } else {
            ok = false;
            println!(
                "dales-law: violated by rows {:?}",
                report.offending_rows
            );
        }
    }
    Ok(if ok { 0 } else { 1 })
}
