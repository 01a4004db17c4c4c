//! Acceptance criteria 1-12. Prints one line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;

use clap::Parser;
use congest_mst::cli::{run, Cli, Command, Mode, Summary};
use congest_mst::engine::{ceil_log2, EngineConfig, MetricsCounters, Network};
use congest_mst::graph::{generate_with_density, induced_mask, oracle_msf, random_partition, Family, WeightedGraph};
use congest_mst::pwa::{solve_msf, solve_pwa, AggregationSpec, MsfOutcome};
use congest_mst::routing::{route_next_hop, setup_routing, Hop};
use congest_mst::spanning::build_bfs_tree;

/// Memory constant and the polylog exponent cap (criterion 3).
const C_M: u64 = 64;
const PEAK_EXPONENT_CAP: f64 = 0.2;
/// Pinned constants for frames and frame-rounds (criteria 6, 7).
const C_FRAMES: f64 = 12.0;
const C_ROUNDS: f64 = 16.0;
const CYCLES_PER_PHASE_CAP: usize = 60;
/// Label and table width constants (criterion 10).
const C_LABEL: u64 = 2;
const C_TABLE: u64 = 8;

struct Run {
    n: usize,
    m: usize,
    out: MsfOutcome,
}

impl Run {
    fn log(&self) -> f64 {
        ceil_log2(self.n as u64).max(1) as f64
    }
    fn frame_ratio(&self) -> f64 {
        let l = self.log();
        self.out.metrics.frames_sent as f64 / (self.m as f64 * l + self.n as f64 * l * l)
    }
    fn round_ratio(&self) -> f64 {
        let l = self.log();
        self.out.metrics.rounds_elapsed as f64 / ((self.out.setup.env.dt as f64 + (self.n as f64).sqrt()) * l * l)
    }
}

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, title: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("criterion {id:>2} {:<4} {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn violations(m: &MetricsCounters) -> (u64, u64, u64) {
    (m.congestion_violations, m.bound_violations, m.root_store_violations)
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let num: f64 = points.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = points.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    num / den
}

/// Largest ratio per vertex count, `n:ratio` pairs.
fn by_n(runs: &[Run], f: fn(&Run) -> f64) -> String {
    let mut m: BTreeMap<usize, f64> = BTreeMap::new();
    for r in runs {
        let e = m.entry(r.n).or_default();
        *e = e.max(f(r));
    }
    m.iter().map(|(n, c)| format!("{n}:{c:.2}")).collect::<Vec<_>>().join(" ")
}

fn fold_of(spec: &AggregationSpec, parts: &[u32], xs: &[u64]) -> Vec<u64> {
    let mut acc: BTreeMap<u32, u64> = BTreeMap::new();
    for (&p, &x) in parts.iter().zip(xs) {
        let e = acc.entry(p).or_insert(spec.identity);
        *e = (spec.combine)(*e, x);
    }
    parts.iter().map(|p| acc[p]).collect()
}

fn criterion_one(rep: &mut Report) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut bad = Vec::new();
    for (i, n) in [16usize, 64, 256, 1024].into_iter().enumerate() {
        for seed in 1..=50u64 {
            let dens = [0.0, 0.5, 1.0, 2.0, 4.0][(seed as usize + i) % 5];
            let g = generate_with_density(Family::RandomConnected, n, seed, dens).unwrap();
            match solve_msf(&g, None, EngineConfig::default()) {
                Ok(out) if out.edges == oracle_msf(&g, None) => runs.push(Run { n, m: g.m(), out }),
                Ok(_) => bad.push(format!("n={n} seed={seed}: edge set differs")),
                Err(e) => bad.push(format!("n={n} seed={seed}: {e}")),
            }
        }
    }
    let detail = if bad.is_empty() { format!("{} / 200 instances equal Kruskal", runs.len()) } else { bad.join("; ") };
    rep.line(1, "MST equals Kruskal", bad.is_empty(), detail);
    runs
}

fn criterion_two(rep: &mut Report) -> Vec<MetricsCounters> {
    let mut metrics = Vec::new();
    let mut bad = Vec::new();
    for seed in 1..=50u64 {
        let n = [16usize, 64, 128, 256][seed as usize % 4];
        let g = generate_with_density(Family::RandomConnected, n, seed, 1.0).unwrap();
        let p = random_partition(&g, 2 + seed as usize % 7, seed);
        let mask = induced_mask(&g, &p);
        match solve_msf(&g, Some(&mask), EngineConfig::default()) {
            Ok(out) if out.edges == oracle_msf(&g, Some(&mask)) => metrics.push(out.metrics),
            Ok(_) => bad.push(format!("msf n={n} seed={seed}")),
            Err(e) => bad.push(format!("msf n={n} seed={seed}: {e}")),
        }
        let xs: Vec<u64> = (0..n as u64).map(|v| (v * 7919 + seed) % 1024).collect();
        for f in ["min", "max", "sum", "xor"] {
            let spec = AggregationSpec::by_name(f, 10).unwrap();
            match solve_pwa(&g, &p, &spec, &xs, EngineConfig::default()) {
                Ok(out) if out.outputs == fold_of(&spec, p.parts(), &xs) => metrics.push(out.msf.metrics),
                Ok(_) => bad.push(format!("pwa {f} n={n} seed={seed}")),
                Err(e) => bad.push(format!("pwa {f} n={n} seed={seed}: {e}")),
            }
        }
    }
    let detail = if bad.is_empty() { "50 forests and 200 folds exact".to_string() } else { bad.join("; ") };
    rep.line(2, "MSF and PWA correctness", bad.is_empty(), detail);
    metrics
}

fn criterion_three(rep: &mut Report) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut points = Vec::new();
    let mut over = Vec::new();
    let mut peaks = Vec::new();
    for n in [64usize, 256, 1024, 4096] {
        let mut sum = 0.0;
        for seed in 1..=3u64 {
            let g = generate_with_density(Family::RandomConnected, n, seed, 1.0).unwrap();
            let out = solve_msf(&g, None, EngineConfig::default()).unwrap();
            let l = ceil_log2(n as u64) as u64;
            let peak = out.metrics.global_peak;
            if peak > C_M * l * l {
                over.push(format!("n={n} seed={seed}: {peak} > {}", C_M * l * l));
            }
            if seed == 1 {
                peaks.push(format!("{n}:{peak}"));
            }
            sum += (peak as f64).ln();
            runs.push(Run { n, m: g.m(), out });
        }
        points.push(((n as f64).ln(), sum / 3.0));
    }
    let k = slope(&points);
    let ok = over.is_empty() && k <= PEAK_EXPONENT_CAP;
    rep.line(
        3,
        "memory bound",
        ok,
        format!("peak bits {} (c_m={C_M}); fitted exponent {k:.3} <= {PEAK_EXPONENT_CAP} {}", peaks.join(" "), over.join("; ")),
    );
    runs
}

fn routing_widths(g: &WeightedGraph) -> Result<(u64, u64), String> {
    let mut net = Network::new(g, None, EngineConfig::default());
    build_bfs_tree(&mut net, 0).map_err(|e| e.to_string())?;
    setup_routing(&mut net).map_err(|e| e.to_string())?;
    let w = net.widths;
    let (mut label, mut table) = (0, 0);
    for dest in 0..g.n() {
        let r = net.states[dest].routing.as_ref().unwrap();
        label = label.max(r.label.width(&w));
        table = table.max(r.table.width(&w));
        let mut at = 0u32;
        let mut hops = 0u32;
        loop {
            match route_next_hop(&net.states[at as usize].routing.as_ref().unwrap().table, &r.label).map_err(|e| e.to_string())? {
                Hop::Deliver => break,
                Hop::Forward(p) => at = g.port(at, p).nbr,
            }
            hops += 1;
            if hops as usize > g.n() {
                return Err(format!("label of {} loops", dest + 1));
            }
        }
        let depth = net.states[dest].bfs.unwrap().depth;
        if at as usize != dest || hops != depth {
            return Err(format!("label of {} reached {} in {hops} hops (depth {depth})", dest + 1, at + 1));
        }
    }
    Ok((label, table))
}

fn criterion_ten(rep: &mut Report) {
    let mut bad = Vec::new();
    let (mut cl, mut ct) = (0.0f64, 0.0f64);
    for n in [16usize, 64, 256, 1024, 4096] {
        for (fam, seed) in [(Family::RandomConnected, 1), (Family::Grid, 2), (Family::Star, 3), (Family::Path, 4)] {
            let g = generate_with_density(fam, n, seed, 1.0).unwrap();
            let l = ceil_log2(n as u64) as u64;
            match routing_widths(&g) {
                Ok((label, table)) => {
                    cl = cl.max(label as f64 / (l * l) as f64);
                    ct = ct.max(table as f64 / l as f64);
                    if label > C_LABEL * l * l || table > C_TABLE * l {
                        bad.push(format!("{fam} n={n}: label {label}, table {table}"));
                    }
                }
                Err(e) => bad.push(format!("{fam} n={n}: {e}")),
            }
        }
    }
    rep.line(
        10,
        "routing",
        bad.is_empty(),
        format!("all labels delivered in depth hops; label/log^2 n <= {cl:.2} (c_l={C_LABEL}), table/log n <= {ct:.2} (c_t={C_TABLE}) {}", bad.join("; ")),
    );
}

fn criterion_twelve(rep: &mut Report) {
    let once = |dir: &std::path::Path| -> Vec<Vec<u8>> {
        let args = ["congest-mst", "run", "--mode", "pwa", "--gen", "random:256:9", "--random-parts", "4", "--agg", "xor", "--trace", "--name", "d", "--out"];
        let cli = Cli::try_parse_from(args.iter().map(|s| s.to_string()).chain([dir.display().to_string()])).unwrap();
        let Command::Run(cfg) = cli.cmd else { unreachable!() };
        run(&cfg).unwrap();
        ["d.result", "d.csv", "d.phases.csv", "d.trace.json"].iter().map(|f| fs::read(dir.join(f)).unwrap()).collect()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files_equal = once(a.path()) == once(b.path());
    let g = generate_with_density(Family::RandomConnected, 512, 4, 2.0).unwrap();
    let x = solve_msf(&g, None, EngineConfig::default()).unwrap();
    let y = solve_msf(&g, None, EngineConfig::default()).unwrap();
    let metrics_equal = x.metrics == y.metrics && x.edges == y.edges;
    let csv_equal = Summary::new("x", Mode::Mst, &g, &x).to_csv() == Summary::new("x", Mode::Mst, &g, &y).to_csv();
    rep.line(12, "determinism", files_equal && metrics_equal && csv_equal, format!("result files equal {files_equal}, metrics equal {metrics_equal}"));
}

fn main() {
    let mut rep = Report { failed: 0 };
    let mst = criterion_one(&mut rep);
    let forests = criterion_two(&mut rep);
    let scale = criterion_three(&mut rep);

    let all: Vec<&MetricsCounters> = mst.iter().map(|r| &r.out.metrics).chain(&forests).collect();
    let congestion: u64 = all.iter().map(|m| violations(m).0).sum();
    rep.line(4, "congestion freedom", congestion == 0, format!("{congestion} multi-slot receptions over {} runs", all.len()));

    let cycles: Vec<_> = all.iter().chain(scale.iter().map(|r| &r.out.metrics).collect::<Vec<_>>().iter()).flat_map(|m| &m.cycles).collect();
    let late = cycles.iter().filter(|c| !c.within_bound()).count() as u64;
    let recorded: u64 = all.iter().map(|m| violations(m).1).sum();
    rep.line(5, "cycle time bounds", late + recorded == 0, format!("{} cycles, {late} over their bound", cycles.len()));

    let cf = mst.iter().map(Run::frame_ratio).fold(0.0, f64::max);
    rep.line(6, "message bound", cf <= C_FRAMES, format!("frames <= {cf:.3} (m log n + n log^2 n), pinned c={C_FRAMES}; per n {}", by_n(&mst, Run::frame_ratio)));

    let cr = mst.iter().map(Run::round_ratio).fold(0.0, f64::max);
    rep.line(7, "round bound", cr <= C_ROUNDS, format!("frame-rounds <= {cr:.3} (d(T) + sqrt n) log^2 n, pinned c={C_ROUNDS}; per n {}", by_n(&mst, Run::round_ratio)));

    let checks: usize = mst.iter().chain(&scale).map(|r| r.out.slot_checks).sum();
    let expected: usize = mst.iter().chain(&scale).map(|r| r.out.phases.len() + 1).sum();
    rep.line(8, "slot-set validity", checks == expected, format!("{checks} slot sets validated, {expected} expected"));

    let mut per_phase = 0;
    for m in all.iter().copied().chain(scale.iter().map(|r| &r.out.metrics)) {
        let mut count: BTreeMap<&str, usize> = BTreeMap::new();
        for c in &m.cycles {
            *count.entry(c.phase.as_str()).or_default() += 1;
        }
        per_phase = per_phase.max(count.into_values().max().unwrap_or(0));
    }
    rep.line(9, "phase efficiency", per_phase <= CYCLES_PER_PHASE_CAP, format!("at most {per_phase} cycles per phase (cap {CYCLES_PER_PHASE_CAP})"));

    criterion_ten(&mut rep);

    let root: u64 = all.iter().map(|m| violations(m).2).sum::<u64>() + scale.iter().map(|r| violations(&r.out.metrics).2).sum::<u64>();
    rep.line(11, "root memory", root == 0, format!("{root} times r_T held a second cycle message"));

    criterion_twelve(&mut rep);

    if rep.failed > 0 {
        println!("{} criteria failed", rep.failed);
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
