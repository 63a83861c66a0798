use std::path::PathBuf;

use hybridts::cli::{main_with, run, write_report, CliError, Command, ExperimentSpec, Format};
use hybridts::formula::{random_kcnf, serialize_dimacs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ALL: [Command; 11] = [
    Command::Solve,
    Command::TreeStats,
    Command::Decompose,
    Command::FitExponent,
    Command::QwalkDetect,
    Command::Grover,
    Command::QpeCompare,
    Command::SiaRun,
    Command::PebbleSchedule,
    Command::LatticeReduce,
    Command::SethHybrid,
];

fn small(command: Command, seed: u64) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(command, seed);
    spec.args.trials = Some(4);
    match command {
        Command::SethHybrid => {
            spec.args.n = Some(10);
            spec.args.n_max = Some(14);
        }
        Command::LatticeReduce | Command::QwalkDetect => spec.args.n = Some(5),
        _ => {}
    }
    spec
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hybridts-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn every_subcommand_runs_clean() {
    for c in ALL {
        let report = run(&small(c, 5)).unwrap_or_else(|e| panic!("{}: {e}", c.name()));
        assert!(report.ok(), "{}: {:?}", c.name(), report.failures);
        assert!(!report.records.is_empty(), "{}", c.name());
        let ids: Vec<&str> = report.records.iter().filter_map(|r| r["instanceId"].as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted, "{}", c.name());
    }
}

#[test]
fn same_spec_gives_identical_payload() {
    for c in ALL {
        let a = run(&small(c, 9)).unwrap().without_timings();
        let b = run(&small(c, 9)).unwrap().without_timings();
        let mut pa = Vec::new();
        let mut pb = Vec::new();
        write_report(&a, Format::Json, &mut pa).unwrap();
        write_report(&b, Format::Json, &mut pb).unwrap();
        assert_eq!(pa, pb, "{}", c.name());
    }
}

#[test]
fn seed_is_mandatory() {
    let mut spec = ExperimentSpec::new(Command::Solve, 0);
    spec.args.seed = None;
    assert!(matches!(run(&spec), Err(CliError::BadSpec(_))));
    assert_eq!(main_with(["hybridts", "solve"]), 2);
    assert_eq!(main_with(["hybridts", "no-such-command", "--seed", "1"]), 2);
}

#[test]
fn binary_entry_writes_json_lines_and_csv() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cnf = scratch("a.cnf");
    std::fs::write(&cnf, serialize_dimacs(&random_kcnf(8, 30, 3, &mut rng))).unwrap();
    let out = scratch("solve.jsonl");
    let code = main_with([
        "hybridts", "solve", "--seed", "1", "--input", cnf.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    for key in ["instanceId", "engine", "seed", "T", "height", "br", "K", "T′", "verdict", "wallTime"] {
        assert!(lines[0].get(key).is_some(), "missing {key}");
    }
    assert_eq!(lines[0]["instanceId"], "a.cnf");
    assert_eq!(lines[1]["kind"], "report");
    assert_eq!(lines[1]["schemaVersion"], 1);

    let csv_out = scratch("fit.csv");
    let code = main_with([
        "hybridts", "fit-exponent", "--seed", "1", "--lambda", "1.0", "--kappa", "0.5", "--format", "csv", "--out",
        csv_out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv_text = std::fs::read_to_string(&csv_out).unwrap();
    assert!(csv_text.lines().next().unwrap().contains("log2Queries"));
    assert_eq!(csv_text.lines().count(), 1 + 13);
}

#[test]
fn seth_hybrid_finds_planted_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 6..=12 {
        let f = hybridts::formula::planted_kcnf(n, 3 * n, 3, 0b1011_0110_1101 & ((1 << n) - 1), &mut rng);
        let mut found = 0;
        for trial in 0..8 {
            let mut r = hybridts::cli::instance_rng(trial, n);
            let run = hybridts::cli::seth_hybrid_search(&f, 0.5, &mut r).unwrap();
            if let Some(m) = run.model {
                assert!(f.eval_full(&m));
                found += 1;
            }
        }
        assert!(found >= 6, "n = {n}: {found}/8");
    }
}
