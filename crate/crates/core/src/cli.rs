//! Command line: `run`, `gen-graph` and `report`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::engine::EngineConfig;
use crate::error::Error;
use crate::graph::{
    generate_with_density, induced_mask, load_graph, load_partition, oracle_msf, random_partition, Family, Partition, WeightedGraph,
};
use crate::pwa::{edge_dump, solve_msf, solve_pwa, value_dump, AggregationSpec, MsfOutcome};

/// Largest graph the centralized oracles are run on.
pub const ORACLE_CAP: usize = 4096;

#[derive(Parser, Debug)]
#[command(name = "congest-mst", about = "Memory-bounded distributed MST, MSF and partwise aggregation on a simulated CONGEST network")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one instance and write results and metrics.
    Run(RunConfig),
    /// Write a generated graph as an edge list.
    GenGraph {
        /// `family:n:seed`, e.g. `random:64:1`.
        #[arg(long)]
        gen: String,
        /// Extra edges per vertex on top of the random tree (random family).
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Collect run summaries into a scaling table sorted by n.
    Report {
        files: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Mode {
    Mst,
    Msf,
    Pwa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
pub enum AssertLevel {
    Off,
    Invariants,
    Oracle,
}

#[derive(clap::Args, Debug, Clone)]
pub struct RunConfig {
    #[arg(long, value_enum, default_value_t = Mode::Mst)]
    pub mode: Mode,
    /// Edge-list file (`n m` header, then `u v w` lines, 1-based).
    #[arg(long, conflicts_with = "gen")]
    pub graph: Option<PathBuf>,
    /// Generator `family:n:seed`; `CONGEST_MST_SEED` overrides the seed.
    #[arg(long)]
    pub gen: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub density: f64,
    /// Partition file (`v part` lines). In msf mode it induces the mask.
    #[arg(long)]
    pub parts: Option<PathBuf>,
    /// Random connected partition into this many parts instead of a file.
    #[arg(long, conflicts_with = "parts")]
    pub random_parts: Option<usize>,
    /// Aggregation for pwa mode: min, max, sum or xor.
    #[arg(long, default_value = "sum")]
    pub agg: String,
    /// Inputs for pwa mode (`v value` lines); default is the vertex id.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub c_w: u32,
    #[arg(long, default_value_t = 64)]
    pub c_m: u32,
    #[arg(long, default_value_t = 1 << 20)]
    pub round_cap: u64,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Base name of the output files (default derived from the instance).
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long = "assert", value_enum, default_value_t = AssertLevel::Invariants)]
    pub assert_level: AssertLevel,
    /// Also write the per-round slot-ownership trace as JSON.
    #[arg(long)]
    pub trace: bool,
}

/// Parse `family:n:seed`.
pub fn parse_gen(spec: &str) -> Result<(Family, usize, u64), Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [fam, n, seed] = parts[..] else {
        return Err(Error::Usage(format!("generator {spec:?} is not family:n:seed")));
    };
    let n = n.parse().map_err(|_| Error::Usage(format!("bad vertex count {n:?}")))?;
    let seed = seed.parse().map_err(|_| Error::Usage(format!("bad seed {seed:?}")))?;
    Ok((fam.parse()?, n, seed))
}

fn seed_override(seed: u64) -> Result<u64, Error> {
    match std::env::var("CONGEST_MST_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| Error::Usage(format!("CONGEST_MST_SEED={s:?} is not an integer"))),
        Err(_) => Ok(seed),
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

/// Run-level summary: one CSV row per run, the input of `report`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub mode: Mode,
    pub n: usize,
    pub m: usize,
    pub d_t: u32,
    pub k_b: u32,
    pub rounds: u64,
    pub frames: u64,
    pub peak_bits: u64,
    pub budget_bits: u64,
    pub phases_one: usize,
    pub phases_two: usize,
    pub max_cycles_per_phase: usize,
    pub congestion_violations: u64,
    pub bound_violations: u64,
    pub root_store_violations: u64,
}

pub const SUMMARY_HEADER: &str = "name,mode,n,m,d_t,k_b,rounds,frames,peak_bits,budget_bits,phases_one,phases_two,max_cycles_per_phase,congestion_violations,bound_violations,root_store_violations";

impl Summary {
    pub fn new(name: &str, mode: Mode, g: &WeightedGraph, out: &MsfOutcome) -> Self {
        let m = &out.metrics;
        Summary {
            name: name.to_string(),
            mode,
            n: g.n(),
            m: g.m(),
            d_t: out.setup.env.dt,
            k_b: out.setup.env.kb,
            rounds: m.rounds_elapsed,
            frames: m.frames_sent,
            peak_bits: m.global_peak,
            budget_bits: out.widths.budget,
            phases_one: out.setup.phase1.phases.len(),
            phases_two: out.phases.len(),
            max_cycles_per_phase: out.phases.iter().map(|p| p.cycles).max().unwrap_or(0),
            congestion_violations: m.congestion_violations,
            bound_violations: m.bound_violations,
            root_store_violations: m.root_store_violations,
        }
    }

    pub fn to_csv(&self) -> String {
        let mode = match self.mode {
            Mode::Mst => "mst",
            Mode::Msf => "msf",
            Mode::Pwa => "pwa",
        };
        format!(
            "{SUMMARY_HEADER}\n{},{mode},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.name,
            self.n,
            self.m,
            self.d_t,
            self.k_b,
            self.rounds,
            self.frames,
            self.peak_bits,
            self.budget_bits,
            self.phases_one,
            self.phases_two,
            self.max_cycles_per_phase,
            self.congestion_violations,
            self.bound_violations,
            self.root_store_violations
        )
    }
}

/// Files written by a run.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub result: PathBuf,
    pub summary: PathBuf,
    pub phases: PathBuf,
    pub trace: Option<PathBuf>,
}

fn load_values(g: &WeightedGraph, path: &Path) -> Result<Vec<u64>, Error> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let mut xs = vec![None; g.n()];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let parsed = match f[..] {
            [v, x] => v.parse::<usize>().ok().zip(x.parse::<u64>().ok()),
            _ => None,
        };
        let Some((v, x)) = parsed.filter(|(v, _)| (1..=g.n()).contains(v)) else {
            return Err(Error::Parse { line: i + 1, msg: format!("expected \"v value\", got {line:?}") });
        };
        xs[v - 1] = Some(x);
    }
    xs.into_iter().enumerate().map(|(v, x)| x.ok_or_else(|| Error::Graph(format!("vertex {} has no input", v + 1)))).collect()
}

/// Execute a `run` configuration. Returns the written files.
pub fn run(cfg: &RunConfig) -> Result<Artifacts, Error> {
    let (g, default_name, seed) = match (&cfg.graph, &cfg.gen) {
        (Some(p), None) => {
            let stem = p.file_stem().map_or("graph".into(), |s| s.to_string_lossy().into_owned());
            (load_graph(p, cfg.mode == Mode::Mst)?, stem, 0)
        }
        (None, Some(spec)) => {
            let (fam, n, seed) = parse_gen(spec)?;
            let seed = seed_override(seed)?;
            (generate_with_density(fam, n, seed, cfg.density)?, format!("{fam}-{n}-{seed}"), seed)
        }
        _ => return Err(Error::Usage("give exactly one of --graph and --gen".into())),
    };
    if cfg.assert_level == AssertLevel::Oracle && g.n() > ORACLE_CAP {
        return Err(Error::Usage(format!("oracle assertions are limited to n <= {ORACLE_CAP}")));
    }
    let partition = || -> Result<Partition, Error> {
        match (&cfg.parts, cfg.random_parts) {
            (Some(p), _) => load_partition(&g, p),
            (None, Some(k)) => Ok(random_partition(&g, k, seed)),
            (None, None) => Err(Error::Usage(format!("{:?} mode needs --parts or --random-parts", cfg.mode))),
        }
    };
    let engine = EngineConfig { word_constant: cfg.c_w, memory_constant: cfg.c_m, round_cap: cfg.round_cap, trace: cfg.trace };
    let mode_tag = format!("{:?}", cfg.mode).to_lowercase();
    let name = cfg.name.clone().unwrap_or_else(|| format!("{mode_tag}-{default_name}"));
    let header = format!("# {mode_tag} n={} m={}\n", g.n(), g.m());
    let (outcome, result) = match cfg.mode {
        Mode::Mst | Mode::Msf => {
            let mask = if cfg.mode == Mode::Msf { Some(induced_mask(&g, &partition()?)) } else { None };
            let out = solve_msf(&g, mask.as_ref(), engine)?;
            if cfg.assert_level == AssertLevel::Oracle && out.edges != oracle_msf(&g, mask.as_ref()) {
                return Err(Error::Invariant("recorded edges differ from the Kruskal oracle".into()));
            }
            let dump = edge_dump(&g, &out.edges);
            (out, dump)
        }
        Mode::Pwa => {
            let p = partition()?;
            let xs = match &cfg.inputs {
                Some(path) => load_values(&g, path)?,
                None => (1..=g.n() as u64).collect(),
            };
            let bits = crate::engine::bits_for(xs.iter().copied().max().unwrap_or(0));
            let spec = AggregationSpec::by_name(&cfg.agg, bits)?;
            let out = solve_pwa(&g, &p, &spec, &xs, engine)?;
            if cfg.assert_level == AssertLevel::Oracle {
                for v in 0..g.n() {
                    let part = p.part(v as u32);
                    let want = spec.fold((0..g.n()).filter(|&u| p.part(u as u32) == part).map(|u| xs[u]));
                    if out.outputs[v] != want {
                        return Err(Error::Invariant(format!("vertex {} output {} differs from the fold {want}", v + 1, out.outputs[v])));
                    }
                }
            }
            let dump = value_dump(&out.outputs);
            (out.msf, dump)
        }
    };
    if cfg.assert_level >= AssertLevel::Invariants {
        let m = &outcome.metrics;
        if m.congestion_violations + m.bound_violations + m.root_store_violations > 0 {
            return Err(Error::Invariant(format!(
                "violations: congestion {}, cycle bounds {}, root store {}",
                m.congestion_violations, m.bound_violations, m.root_store_violations
            )));
        }
    }
    std::fs::create_dir_all(&cfg.out).map_err(io(&cfg.out))?;
    let result_path = cfg.out.join(format!("{name}.result"));
    let summary_path = cfg.out.join(format!("{name}.csv"));
    let phases_path = cfg.out.join(format!("{name}.phases.csv"));
    std::fs::write(&result_path, header + &result).map_err(io(&result_path))?;
    std::fs::write(&summary_path, Summary::new(&name, cfg.mode, &g, &outcome).to_csv()).map_err(io(&summary_path))?;
    std::fs::write(&phases_path, outcome.metrics.to_csv()).map_err(io(&phases_path))?;
    let trace = if cfg.trace {
        let p = cfg.out.join(format!("{name}.trace.json"));
        let json = serde_json::to_string(&outcome.trace).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(&p, json).map_err(io(&p))?;
        Some(p)
    } else {
        None
    };
    Ok(Artifacts { result: result_path, summary: summary_path, phases: phases_path, trace })
}

/// One parsed summary row (fields used by the table).
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub n: usize,
    pub d_t: u32,
    pub k_b: u32,
    pub rounds: u64,
    pub frames: u64,
    pub peak_bits: u64,
}

impl ReportRow {
    /// `rounds / ((d(T) + sqrt n) log2^2 n)`.
    pub fn round_constant(&self) -> f64 {
        let l = (self.n.max(2) as f64).log2().ceil();
        self.rounds as f64 / ((self.d_t as f64 + (self.n as f64).sqrt()) * l * l)
    }
}

/// Parse a summary CSV. Files with another header (per-phase metrics) give `None`.
pub fn parse_summary(text: &str) -> Result<Option<Vec<ReportRow>>, Error> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SUMMARY_HEADER) {
        return Ok(None);
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse { line: i + 2, msg: format!("malformed summary row {line:?}") };
        if f.len() != SUMMARY_HEADER.split(',').count() {
            return Err(bad());
        }
        let num = |k: usize| f[k].parse::<u64>().map_err(|_| bad());
        rows.push(ReportRow {
            name: f[0].to_string(),
            n: num(2)? as usize,
            d_t: num(4)? as u32,
            k_b: num(5)? as u32,
            rounds: num(6)?,
            frames: num(7)?,
            peak_bits: num(8)?,
        });
    }
    Ok(Some(rows))
}

/// Scaling table, sorted by n (then name), with the fitted round constant.
pub fn report_table(mut rows: Vec<ReportRow>) -> String {
    rows.sort_by(|a, b| a.n.cmp(&b.n).then_with(|| a.name.cmp(&b.name)));
    let mut s = format!("{:<28} {:>6} {:>5} {:>5} {:>10} {:>12} {:>9} {:>8}\n", "run", "n", "d(T)", "K_b", "rounds", "frames", "peak_bits", "c_rounds");
    for r in &rows {
        let _ = writeln!(
            s,
            "{:<28} {:>6} {:>5} {:>5} {:>10} {:>12} {:>9} {:>8.3}",
            r.name,
            r.n,
            r.d_t,
            r.k_b,
            r.rounds,
            r.frames,
            r.peak_bits,
            r.round_constant()
        );
    }
    let c = rows.iter().map(ReportRow::round_constant).fold(0.0, f64::max);
    let _ = writeln!(s, "fitted c (rounds <= c (d(T) + sqrt n) log2^2 n): {c:.3}");
    s
}

fn report(files: &[PathBuf]) -> Result<String, Error> {
    if files.is_empty() {
        return Err(Error::Usage("report needs at least one summary CSV".into()));
    }
    let mut rows = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(f).map_err(io(f))?;
        match parse_summary(&text)? {
            Some(r) => rows.extend(r),
            None => eprintln!("skipping {}: not a run summary", f.display()),
        }
    }
    Ok(report_table(rows))
}

/// Entry point behind the binary. Returns the exit code.
pub fn main_with<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let res = match cli.cmd {
        Command::Run(cfg) => run(&cfg).map(|a| {
            println!("{}", a.result.display());
            println!("{}", a.summary.display());
            println!("{}", a.phases.display());
            if let Some(t) = a.trace {
                println!("{}", t.display());
            }
        }),
        Command::GenGraph { gen, density, out } => parse_gen(&gen).and_then(|(fam, n, seed)| {
            let g = generate_with_density(fam, n, seed_override(seed)?, density)?;
            std::fs::write(&out, g.to_edge_list()).map_err(io(&out))
        }),
        Command::Report { files } => report(&files).map(|t| print!("{t}")),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
