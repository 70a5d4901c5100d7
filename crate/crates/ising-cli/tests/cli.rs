use ising_cli::config::{validate, CouplingKind};
use ising_cli::RunConfig;
use proptest::prelude::*;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ising(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ising")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run_with(text: &str, cmd: &str, extra: &[&str]) -> (tempfile::TempDir, Output) {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), text);
    let out = tmp.path().join("out");
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = ising(&args);
    (tmp, o)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn records(path: PathBuf) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

const MINIMAL: &str = "[model]\ncoupling = \"nearest_neighbor\"\n[run]\nomega = [0, 1]\n";

#[test]
fn solve_writes_grid_energy_and_audit() {
    let (tmp, o) = run_with(MINIMAL, "solve", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = tmp.path().join("out");
    for f in ["minimizer.txt", "minimizer.pgm", "energy.json", "audit.log"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let txt = fs::read_to_string(out.join("minimizer.txt")).unwrap();
    let (w, h) = (txt.lines().next().unwrap().len(), txt.lines().count());
    assert!(txt.chars().all(|c| c == '+' || c == '-' || c == '\n'));
    let pgm = fs::read(out.join("minimizer.pgm")).unwrap();
    let header = format!("P5\n{w} {h}\n255\n");
    assert!(pgm.starts_with(header.as_bytes()));
    assert_eq!(pgm.len(), header.len() + w * h);
    assert!(pgm[header.len()..].iter().all(|b| *b == 0 || *b == 255));
    let energy: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("energy.json")).unwrap()).unwrap();
    // One flat jump in a unit column: two nearest-neighbour pairs at 2J each.
    assert_eq!(energy["energy"]["total"], 4.0);
    assert_eq!(energy["free_sites"], 4);
    let audit = fs::read_to_string(out.join("audit.log")).unwrap();
    assert!(audit.contains("instance_sha256 = "));
    assert!(audit.contains("sha256(energy.json) = "));
}

#[test]
fn solve_is_byte_identical_across_runs_and_thread_counts() {
    let text = "[model]\ncoupling = \"power_like\"\n[run]\nomega = [1, 2]\ntau = 2\nslab = [\"0\", \"5/2\"]\nm_list = [2]\n";
    let (a, oa) = run_with(text, "solve", &[]);
    let (b, ob) = run_with(text, "solve", &["--threads", "1"]);
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert_eq!(ob.status.code(), Some(0), "{}", stderr(&ob));
    for f in ["minimizer.txt", "minimizer.pgm", "energy.json", "audit.log"] {
        assert_eq!(fs::read(a.path().join("out").join(f)).unwrap(), fs::read(b.path().join("out").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn strong_field_is_a_config_error() {
    let text = "[model]\ncoupling = \"nearest_neighbor\"\n[field]\ntable = [0.5, -0.5, 0.5, -0.5]\n[run]\nomega = [0, 1]\ntau = 2\n";
    let (_t, o) = run_with(text, "solve", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mu exceeds lambda*tau^-d"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_with_two() {
    let (_t, o) = run_with(MINIMAL, "pipeline", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ell_list"), "{}", stderr(&o));
    let (_t, o) = run_with("[model]\ncoupling = \"power_like\"\nbogus = 1\n", "solve", &[]);
    assert_eq!(o.status.code(), Some(2));
    let (_t, o) = run_with("[model]\ncoupling = \"truncated\"\n", "solve", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.range"), "{}", stderr(&o));
    assert_eq!(ising(&["solve"]).status.code(), Some(2));
}

#[test]
fn failing_pipeline_check_exits_with_four() {
    // Cubes this small cannot resolve the area exponent.
    let text = "[model]\ncoupling = \"nearest_neighbor\"\n[run]\nomega = [0, 1]\nell_list = [1, 2, 3]\n";
    let (tmp, o) = run_with(text, "pipeline", &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("density exponent"));
    let csv = fs::read_to_string(tmp.path().join("out/pipeline.csv")).unwrap();
    assert!(csv.starts_with("tau,check,value,threshold,status\r\n"));
    assert!(!csv.replace("\r\n", "").contains('\n'), "every record ends in CRLF");
    assert!(csv.contains("\"schedule [1, 2, 4, 8]\""), "fields with commas are quoted");
}

#[test]
fn pipeline_passes_for_power_like_sweep() {
    let text = "[model]\ncoupling = \"power_like\"\n[run]\nomega = [1, 2]\ntau_list = [1, 2]\nm_list = [1, 2]\nell_list = [4, 8, 16, 32]\n";
    let (tmp, o) = run_with(text, "pipeline", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(tmp.path().join("out/pipeline.csv"));
    assert_eq!(rows.len(), 14);
    assert!(rows.iter().all(|r| &r[4] == "pass"));
    let m: Vec<&str> = rows.iter().filter(|r| r[1].starts_with("unconstrained")).map(|r| r.get(2).unwrap()).collect();
    assert_eq!(m, ["1.0", "1.0"]);
}

#[test]
fn gamma_emits_one_row_per_eps() {
    let text = "[model]\ncoupling = \"power_like\"\n[run]\neps_schedule = [1.0, 0.5, 0.25, 0.125, 0.0625]\nsets = [\"half_space\"]\n";
    let (tmp, o) = run_with(text, "gamma", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(tmp.path().join("out/gamma.csv"));
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| &r[0] == "half_space"));
}

#[test]
fn appendix_b_table_has_increasing_width() {
    let text = "[model]\ncoupling = \"block_defect\"\nblock_lambda = 100.0\n[run]\nomega = [1, 2]\ntau_list = [5, 9, 13]\n";
    let (tmp, o) = run_with(text, "appendixB", &["--threads", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let widths: Vec<f64> = records(tmp.path().join("out/appendix_b.csv")).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(widths.len(), 3);
    assert!(widths.windows(2).all(|w| w[1] > w[0]), "{widths:?}");
}

#[test]
fn verify_passes_and_records_the_seed() {
    let text = "seed = 7\n[model]\ncoupling = \"power_like\"\n[run]\nomega = [1, 2]\ninstances = 40\n";
    let (tmp, o) = run_with(text, "verify", &["--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(tmp.path().join("out/verify.csv"));
    assert!(rows.len() >= 10);
    assert!(rows.iter().all(|r| &r[4] == "true"));
    assert!(fs::read_to_string(tmp.path().join("out/audit.log")).unwrap().contains("seed = 3"));
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let cfg = RunConfig::load(&p).unwrap();
        validate(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        n += 1;
    }
    assert!(n >= 5);
}

#[test]
fn seed_beyond_toml_range_is_rejected() {
    let (_t, o) = run_with(MINIMAL, "solve", &["--seed", "18446744073709551615"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

fn coupling_kind() -> impl Strategy<Value = CouplingKind> {
    prop_oneof![
        Just(CouplingKind::PowerLike),
        Just(CouplingKind::Truncated),
        Just(CouplingKind::NearestNeighbor),
        Just(CouplingKind::PeriodicTable),
        Just(CouplingKind::BlockDefect),
    ]
}

proptest! {
    #[test]
    fn config_round_trips(
        seed in 0..=i64::MAX as u64,
        kind in coupling_kind(),
        lambda in 0.1f64..10.0,
        upper in proptest::option::of(0.1f64..10.0),
        s in 0.01f64..0.99,
        range in proptest::option::of(1i64..20),
        omega in proptest::collection::vec(-5i64..5, 2..=4),
        tau in 1i64..6,
        a in -10i64..10,
        den in 1i64..5,
        ells in proptest::collection::vec(0i64..64, 0..5),
        eps in proptest::collection::vec(0.01f64..1.0, 1..6),
        radius in proptest::option::of(1i64..100),
        dir in "[a-z/_]{1,12}",
    ) {
        let mut cfg = RunConfig::parse("[model]\ncoupling = \"power_like\"\n").unwrap();
        cfg.seed = seed;
        cfg.model.coupling = kind;
        cfg.model.lambda = lambda;
        cfg.model.lambda_upper = upper;
        cfg.model.s = s;
        cfg.model.range = range;
        cfg.model.dimension = omega.len();
        cfg.run.omega = omega;
        cfg.run.tau = tau;
        cfg.run.slab = vec![format!("{a}/{den}"), format!("{}", a + 3)];
        cfg.run.ell_list = ells;
        cfg.run.eps_schedule = eps;
        cfg.run.radius = radius;
        cfg.output.dir = dir;
        let text = cfg.to_toml();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), text);
    }
}
