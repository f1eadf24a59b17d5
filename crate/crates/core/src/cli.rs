//! Command-line front end. Results go to `out`, warnings and errors to `err`.
//!
//! Exit codes: 0 success, 1 internal failure or failed verification,
//! 2 invalid input, 3 regime warning under `--strict`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::clusters::{cluster_count_bound, enumerate_clusters, AdjacencyGraph};
use crate::energy::{choose_order, energy_estimate, radius_estimate, series_from_state};
use crate::error::{Error, Result};
use crate::kernel::matrix_element;
use crate::model::{SpinModel, TwoQubitOperator};
use crate::oracle::{self, QUBIT_CAP};
use crate::pauli::parse_pauli_expression;
use crate::random::{random_hermitian, random_kernel_query, random_model, Topology};
use crate::response::{choose_correlator_order, correlator_with, CorrelatorQuery, Regime};
use crate::setalg::dump_coefficients;
use crate::solver::{solve_with, SolveOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_REGIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "ktseries", version, about = "Perturbative ground-state energies and correlators of gapped qubit models")]
pub struct Cli {
    /// Output mode.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Worker threads (default: KT_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Exit with code 3 when the result carries a regime warning.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct OrderChoice {
    /// Truncation order p.
    #[arg(long)]
    pub order: Option<usize>,
    /// Target precision δ; the order is chosen from the rigorous bound.
    #[arg(long)]
    pub precision: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SolveFlags {
    /// Drop table entries with |C| at or below this value.
    #[arg(long, default_value_t = 0.0)]
    pub prune_threshold: f64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Model parameters: n, Δ, J, d, ε₀, ε₀*.
    Info {
        #[arg(long)]
        model: PathBuf,
    },
    /// Truncated ground-state energy at ε with its error bound.
    Energy {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        epsilon: f64,
        #[command(flatten)]
        order: OrderChoice,
        #[command(flatten)]
        solve: SolveFlags,
        /// Write the coefficient table as JSON lines.
        #[arg(long)]
        dump_coefficients: Option<PathBuf>,
    },
    /// Series coefficients E₁..E_p.
    Series {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        order: OrderChoice,
        #[command(flatten)]
        solve: SolveFlags,
        #[arg(long)]
        dump_coefficients: Option<PathBuf>,
    },
    /// Two-point correlator ⟨O_st⟩ at ε.
    Correlate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        t: usize,
        /// Pauli expression such as "0.5*ZZ - XI", or a file holding one or a JSON 4×4 matrix.
        #[arg(long, allow_hyphen_values = true)]
        observable: String,
        #[arg(long, allow_hyphen_values = true)]
        epsilon: f64,
        #[command(flatten)]
        order: OrderChoice,
        #[command(flatten)]
        solve: SolveFlags,
    },
    /// Connected clusters of a given size through a vertex.
    Clusters {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vertex: usize,
        #[arg(long)]
        size: usize,
        /// Also print every cluster.
        #[arg(long)]
        list: bool,
    },
    /// Cross-check the series against exact diagonalization on seeded random models.
    Verify {
        #[arg(long, default_value_t = 8)]
        max_qubits: usize,
        #[arg(long, default_value_t = 4)]
        seeds: u64,
    },
}

/// What a command produced besides its output text.
struct Outcome {
    warning: Option<String>,
    failed: bool,
}

impl Outcome {
    fn ok() -> Self {
        Outcome { warning: None, failed: false }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return e.exit_code();
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_VALIDATION;
    }
    match execute(&cli, out) {
        Ok(outcome) => {
            if let Some(w) = &outcome.warning {
                let _ = writeln!(err, "warning: {w}");
            }
            if outcome.failed {
                EXIT_FAILURE
            } else if cli.strict && outcome.warning.is_some() {
                EXIT_REGIME
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_FAILURE
            }
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var("KT_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("KT_THREADS must be a positive integer, got {v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::InvalidArgument("thread count must be positive".into()));
        }
        // A second call in the same process keeps the first pool, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn options(flags: &SolveFlags) -> Result<SolveOptions> {
    if !(flags.prune_threshold >= 0.0) || !flags.prune_threshold.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "prune threshold must be finite and non-negative, got {}",
            flags.prune_threshold
        )));
    }
    Ok(SolveOptions {
        prune_threshold: flags.prune_threshold,
        ..SolveOptions::default()
    })
}

fn load_model(path: &Path) -> Result<SpinModel> {
    SpinModel::from_path(path).map_err(|e| match e {
        Error::Io(io) => Error::InvalidArgument(format!("cannot read model file {}: {io}", path.display())),
        other => other,
    })
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon must be finite, got {eps}")))
    }
}

fn energy_order(model: &SpinModel, choice: &OrderChoice) -> Result<usize> {
    match (choice.order, choice.precision) {
        (Some(0), _) => Err(Error::InvalidArgument("order must be at least 1".into())),
        (Some(p), _) => Ok(p),
        (None, Some(delta)) => choose_order(model.n(), model.delta(), delta),
        (None, None) => Err(Error::InvalidArgument("one of --order or --precision is required".into())),
    }
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn complex_text(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{:e}", z.re)
    } else {
        format!("{:e} {:+e}i", z.re, z.im)
    }
}

fn optional_text(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| format!("{v:e}"))
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<Outcome> {
    match &cli.command {
        Command::Info { model } => info(&load_model(model)?, cli.format, out),
        Command::Energy {
            model,
            epsilon,
            order,
            solve,
            dump_coefficients,
        } => {
            let model = load_model(model)?;
            check_epsilon(*epsilon)?;
            let p = energy_order(&model, order)?;
            energy(&model, *epsilon, p, options(solve)?, dump_coefficients.as_deref(), cli.format, out)
        }
        Command::Series {
            model,
            order,
            solve,
            dump_coefficients,
        } => {
            let model = load_model(model)?;
            let p = energy_order(&model, order)?;
            series(&model, p, options(solve)?, dump_coefficients.as_deref(), cli.format, out)
        }
        Command::Correlate {
            model,
            s,
            t,
            observable,
            epsilon,
            order,
            solve,
        } => {
            let model = load_model(model)?;
            check_epsilon(*epsilon)?;
            let observable = read_observable(observable)?;
            let p = match (order.order, order.precision) {
                (Some(p), _) => p,
                (None, Some(delta)) => choose_correlator_order(delta, model.coupling(), model.max_degree())?,
                (None, None) => unreachable!("clap enforces the order group"),
            };
            let query = CorrelatorQuery {
                s: *s,
                t: *t,
                observable,
                eps: *epsilon,
                order: p,
            };
            correlate(&model, &query, options(solve)?, cli.format, out)
        }
        Command::Clusters {
            model,
            vertex,
            size,
            list,
        } => clusters(&load_model(model)?, *vertex, *size, *list, cli.format, out),
        Command::Verify { max_qubits, seeds } => verify(*max_qubits, *seeds, cli.format, out),
    }
}

fn info(model: &SpinModel, format: Format, out: &mut dyn Write) -> Result<Outcome> {
    match format {
        Format::Json => write_json(
            out,
            &json!({
                "n": model.n(),
                "Delta": model.delta(),
                "J": model.coupling(),
                "d": model.max_degree(),
                "eps0": model.eps0(),
                "eps0_star": model.eps0_star(),
            }),
        )?,
        Format::Text => {
            writeln!(out, "n         {}", model.n())?;
            writeln!(out, "Delta     {}", model.delta())?;
            writeln!(out, "J         {}", model.coupling())?;
            writeln!(out, "d         {}", model.max_degree())?;
            writeln!(out, "eps0      {:e}", model.eps0())?;
            writeln!(out, "eps0_star {:e}", model.eps0_star())?;
        }
    }
    Ok(Outcome::ok())
}

fn dump_table(state: &crate::solver::SolverState<Complex64>, path: Option<&Path>) -> Result<()> {
    if let Some(path) = path {
        let file = File::create(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot create {}: {e}", path.display())))?;
        let mut file = BufWriter::new(file);
        dump_coefficients(state.table(), &mut file)?;
        file.flush()?;
    }
    Ok(())
}

fn energy(
    model: &SpinModel,
    eps: f64,
    p: usize,
    options: SolveOptions,
    dump: Option<&Path>,
    format: Format,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let state = solve_with(model, p.saturating_sub(1).max(1), options);
    dump_table(&state, dump)?;
    let series = series_from_state(model, &state, p);
    let estimate = energy_estimate(&series, eps);
    let radius = radius_estimate(&series);
    match format {
        Format::Json => write_json(
            out,
            &json!({
                "E": estimate.value.re,
                "bound": estimate.bound,
                "p": p,
                "eps0": model.eps0(),
                "coefficients": series.coeffs.iter().map(|c| c.re).collect::<Vec<_>>(),
                "radius_estimate": radius,
            }),
        )?,
        Format::Text => {
            writeln!(out, "E       {}", complex_text(estimate.value))?;
            writeln!(out, "bound   {}", optional_text(estimate.bound))?;
            writeln!(out, "p       {p}")?;
            writeln!(out, "eps0    {:e}", model.eps0())?;
            for (q, c) in series.coeffs.iter().enumerate() {
                writeln!(out, "E_{:<5} {}", q + 1, complex_text(*c))?;
            }
            writeln!(out, "radius  {} (heuristic)", optional_text(radius))?;
        }
    }
    Ok(Outcome {
        warning: estimate.warning,
        failed: false,
    })
}

fn series(
    model: &SpinModel,
    p: usize,
    options: SolveOptions,
    dump: Option<&Path>,
    format: Format,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let state = solve_with(model, p.saturating_sub(1).max(1), options);
    dump_table(&state, dump)?;
    let series = series_from_state(model, &state, p);
    let radius = radius_estimate(&series);
    match format {
        Format::Json => {
            let rows: Vec<_> = series
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| json!({"q": i + 1, "re": c.re, "im": c.im, "bound": series.coefficient_bound(i + 1)}))
                .collect();
            write_json(
                out,
                &json!({
                    "p": p,
                    "coefficients": rows,
                    "radius_estimate": radius,
                    "radius_is_heuristic": true,
                }),
            )?
        }
        Format::Text => {
            for (i, c) in series.coeffs.iter().enumerate() {
                writeln!(out, "E_{:<5} {}", i + 1, complex_text(*c))?;
            }
            writeln!(out, "radius  {} (heuristic)", optional_text(radius))?;
        }
    }
    Ok(Outcome::ok())
}

fn read_observable(arg: &str) -> Result<TwoQubitOperator> {
    let path = Path::new(arg);
    if !path.is_file() {
        return parse_pauli_expression(arg);
    }
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('[') {
        let m: [[[f64; 2]; 4]; 4] = serde_json::from_str(&text)?;
        let entries = std::array::from_fn(|r| std::array::from_fn(|c| Complex64::new(m[r][c][0], m[r][c][1])));
        Ok(TwoQubitOperator::new(entries))
    } else {
        parse_pauli_expression(text.trim())
    }
}

fn correlate(
    model: &SpinModel,
    query: &CorrelatorQuery,
    options: SolveOptions,
    format: Format,
    out: &mut dyn Write,
) -> Result<Outcome> {
    let k = correlator_with(model, query, options)?;
    match format {
        Format::Json => write_json(
            out,
            &json!({
                "K": k.value.re,
                "bound": k.bound,
                "p": k.order,
                "regime": k.regime.as_str(),
            }),
        )?,
        Format::Text => {
            writeln!(out, "K       {}", complex_text(k.value))?;
            writeln!(out, "bound   {}", optional_text(k.bound))?;
            writeln!(out, "p       {}", k.order)?;
            writeln!(out, "regime  {}", k.regime.as_str())?;
        }
    }
    let warning = (k.regime == Regime::None).then(|| {
        format!(
            "|epsilon| = {:e} exceeds eps0*/(2d) = {:e}; no rigorous error bound",
            query.eps.abs(),
            model.eps0_star() / (2.0 * model.max_degree() as f64)
        )
    });
    Ok(Outcome { warning, failed: false })
}

fn clusters(model: &SpinModel, vertex: usize, size: usize, list: bool, format: Format, out: &mut dyn Write) -> Result<Outcome> {
    if vertex >= model.n() {
        return Err(Error::InvalidVertex(vertex));
    }
    if size == 0 {
        return Err(Error::InvalidArgument("cluster size must be at least 1".into()));
    }
    let graph = AdjacencyGraph::from_model(model);
    let found = enumerate_clusters(&graph, vertex, size);
    let bound = cluster_count_bound(&graph, size);
    match format {
        Format::Json => {
            let mut doc = json!({"count": found.len(), "bound": bound.to_string()});
            if list {
                doc["clusters"] = json!(found.iter().map(|s| s.members().to_vec()).collect::<Vec<_>>());
            }
            write_json(out, &doc)?
        }
        Format::Text => {
            writeln!(out, "count {}", found.len())?;
            writeln!(out, "bound {bound}")?;
            if list {
                for s in &found {
                    let ids: Vec<String> = s.iter().map(|u| u.to_string()).collect();
                    writeln!(out, "{{{}}}", ids.join(","))?;
                }
            }
        }
    }
    Ok(Outcome::ok())
}

#[derive(Serialize)]
struct CheckRow {
    name: &'static str,
    passed: usize,
    total: usize,
    ok: bool,
}

#[derive(Default)]
struct Tally {
    passed: usize,
    total: usize,
}

impl Tally {
    fn record(&mut self, ok: bool) {
        self.total += 1;
        self.passed += ok as usize;
    }
}

const VERIFY_ORDER: usize = 6;
const KERNEL_QUERIES_PER_SEED: usize = 250;

fn verify_topology(seed: u64, n: usize) -> Topology {
    match seed % 3 {
        0 => Topology::Path(n),
        1 => Topology::Ring(n),
        _ if n >= 4 => Topology::Grid(2, n / 2),
        _ => Topology::Path(n),
    }
}

fn verify(max_qubits: usize, seeds: u64, format: Format, out: &mut dyn Write) -> Result<Outcome> {
    if !(2..=QUBIT_CAP).contains(&max_qubits) {
        return Err(Error::InvalidArgument(format!("--max-qubits must lie in 2..={QUBIT_CAP}, got {max_qubits}")));
    }
    if seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be at least 1".into()));
    }
    let names = ["series-bound", "gap", "norm-bound", "correlator", "kernel", "clusters", "extract-rebuild"];
    let mut tallies: Vec<Tally> = names.iter().map(|_| Tally::default()).collect();
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=max_qubits);
        let model = random_model(&mut rng, verify_topology(seed, n));
        let eps0 = model.eps0();

        let state = solve_with(&model, VERIFY_ORDER - 1, SolveOptions::default());
        let series = series_from_state(&model, &state, VERIFY_ORDER);
        let exact = oracle::ground(&model, eps0)?;
        for p in 1..=VERIFY_ORDER {
            let approx: f64 = (1..=p).map(|q| series.coefficient(q).re * eps0.powi(q as i32)).sum();
            let bound = crate::energy::truncation_bound(model.n(), model.delta(), p);
            tallies[0].record((approx - exact.energy).abs() <= bound);
        }

        tallies[1].record(oracle::gap(&model, 2.0 * eps0)? >= model.delta() / 2.0);

        let deep = solve_with(&model, 8, SolveOptions::default());
        let norms_ok = deep
            .norms()
            .iter()
            .enumerate()
            .all(|(i, &chi)| chi <= 2f64.powi(-15) / (2.0 * eps0).powi(i as i32 + 1));
        let d = model.max_degree() as f64;
        let chi1_ok = deep.norms()[0] <= 2.0 * d * model.coupling() / model.delta();
        tallies[2].record(norms_ok && chi1_ok);

        let pick = &model.edges()[rng.gen_range(0..model.edges().len())];
        let observable = random_hermitian(&mut rng, 1.0);
        let eps = model.eps0_star() / (2.0 * d);
        for p in [0usize, 2, 4] {
            let query = CorrelatorQuery {
                s: pick.u,
                t: pick.v,
                observable: observable.clone(),
                eps,
                order: p,
            };
            let k = correlator_with(&model, &query, SolveOptions::default())?;
            let ground = oracle::ground(&model, eps)?;
            let reference = oracle::expectation(&ground.state, &observable, pick.u, pick.v);
            let bound = k.bound.unwrap_or(f64::INFINITY);
            tallies[3].record((k.real() - reference).abs() <= bound + 1e-8);
        }

        for _ in 0..KERNEL_QUERIES_PER_SEED {
            let q = random_kernel_query(&mut rng, 6.min(max_qubits));
            let sets: Vec<_> = q.sets.iter().collect();
            let fast = matrix_element(&q.target, &sets, &q.edge);
            let dense = oracle::dense_commutator_element(q.n, &q.target, &sets, q.edge.u, q.edge.v, &q.edge.op)?;
            tallies[4].record((fast - dense).norm() <= 1e-12);
        }

        let graph = AdjacencyGraph::from_model(&model);
        for size in 1..=n.min(6) {
            let u = rng.gen_range(0..n);
            tallies[5].record(enumerate_clusters(&graph, u, size).len() as u128 <= cluster_count_bound(&graph, size));
        }

        let scaled = oracle::ground(&model, 64.0 * eps0)?;
        let coeffs = oracle::extract_creation_coefficients(&scaled.state)?;
        let rebuilt = oracle::rebuild_state(&coeffs);
        let norm0 = scaled.state[0];
        let err = rebuilt
            .iter()
            .zip(&scaled.state)
            .map(|(r, s)| (r - s / norm0).norm())
            .fold(0.0, f64::max);
        tallies[6].record(err <= 1e-10);
    }
    let rows: Vec<CheckRow> = names
        .iter()
        .zip(&tallies)
        .map(|(&name, t)| CheckRow {
            name,
            passed: t.passed,
            total: t.total,
            ok: t.passed == t.total,
        })
        .collect();
    let all_ok = rows.iter().all(|r| r.ok);
    match format {
        Format::Json => write_json(out, &json!({"checks": rows, "ok": all_ok}))?,
        Format::Text => {
            for r in &rows {
                writeln!(out, "{:<16} {:>5}/{:<5} {}", r.name, r.passed, r.total, if r.ok { "PASS" } else { "FAIL" })?;
            }
            writeln!(out, "{}", if all_ok { "all checks passed" } else { "some checks FAILED" })?;
        }
    }
    Ok(Outcome {
        warning: None,
        failed: !all_ok,
    })
}
