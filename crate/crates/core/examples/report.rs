//! Runs a few sizes through the command-line driver and prints the scaling
//! table that `congest-mst report` would produce.

use clap::Parser;
use congest_mst::cli::{parse_summary, report_table, run, Cli, Command};

fn main() {
    let dir = std::env::temp_dir().join("congest-mst-report-example");
    let mut rows = Vec::new();
    for n in [64, 256, 1024] {
        let args = ["congest-mst", "run", "--gen", &format!("random:{n}:1"), "--out", dir.to_str().unwrap()];
        let Command::Run(cfg) = Cli::parse_from(args).cmd else { unreachable!() };
        let files = run(&cfg).unwrap();
        rows.extend(parse_summary(&std::fs::read_to_string(files.summary).unwrap()).unwrap().unwrap());
    }
    print!("{}", report_table(rows));
}
