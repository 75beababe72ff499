use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const RING: &str = r#"
[layout]
dimension = "line"
bs_count = 24
grid_density = 20

[system]
antennas = 30
coherence = 40
"#;

const HEX: &str = r#"
[layout]
dimension = "hex"
grid_density = 4

[system]
coherence = 84
antenna_sweep = [10, 50, 1000]

[family]
frequency_reuse = [1, 3]
clusters = ["single", "nearest-triangle"]
pilot_reuse = [1, 3]
"#;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn netmimo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netmimo")).args(args).output().expect("spawn netmimo")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes `body` as config.toml in a fresh directory and runs `cmd` on it.
fn run_inline(cmd: &str, body: &str, extra: &[&str]) -> (TempDir, Output) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.toml");
    std::fs::write(&cfg, body).unwrap();
    let out_dir = dir.path().join("out");
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = netmimo(&args);
    (dir, out)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<BTreeMap<String, String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| header.iter().cloned().zip(r.unwrap().iter().map(String::from)).collect())
        .collect();
    (header, rows)
}

fn field(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key} = {:?}", row[key]))
}

#[test]
fn help_exits_zero() {
    let out = netmimo(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("bin-rates"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = netmimo(&["bin-rates", "--config", "/nonexistent/netmimo.toml"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn unknown_key_is_rejected() {
    let body = format!("{RING}\nantena = 3\n");
    let (_d, out) = run_inline("bin-rates", &body, &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("antena"), "{}", stderr(&out));
}

#[test]
fn syntax_error_reports_line() {
    let (_d, out) = run_inline("bin-rates", "[layout\ndimension = \"line\"\n", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));
}

#[test]
fn zero_threads_is_a_config_error() {
    let body = format!("{RING}\n[family]\nschemes = [{{ f = 1, cluster = \"single\", j = 1, q = 1 }}]\n");
    let (_d, out) = run_inline("bin-rates", &body, &["--threads", "0", "--trials", "0"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn empty_family_gives_header_only_bin_rates() {
    let body = format!("{RING}\n[family]\nschemes = []\n");
    let (dir, out) = run_inline("bin-rates", &body, &["--trials", "0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = read_csv(&dir.path().join("out/bin_rates.csv"));
    assert!(!header.is_empty());
    assert!(rows.is_empty());
}

#[test]
fn singleton_family_gives_constant_map() {
    let body = format!("{RING}\n[family]\nschemes = [{{ f = 2, cluster = \"pair\", j = 1, q = 2 }}]\n");
    let (dir, out) = run_inline("optimize-map", &body, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (_, rows) = read_csv(&dir.path().join("out/optimize_map.csv"));
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r["scheme"] == "(2,2,1)Q=2"));
}

#[test]
fn map_respects_zero_forcing_dimension() {
    let body = HEX.replace("antenna_sweep = [10, 50, 1000]", "antenna_sweep = [4, 10, 20]");
    let (dir, out) = run_inline("optimize-map", &body, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (_, rows) = read_csv(&dir.path().join("out/optimize_map.csv"));
    assert_eq!(rows.len(), 3 * 16);
    for r in &rows {
        let zf_dims = field(r, "zf_order") * field(r, "load");
        let antennas = field(r, "cluster_size") * field(r, "antennas");
        assert!(zf_dims <= antennas + 1e-9, "{r:?}");
        assert!(field(r, "gain") >= 1.0 - 1e-12, "{r:?}");
    }
}

#[test]
fn sweep_optimum_dominates_and_schemes_cross_over() {
    let (dir, out) = run_inline("throughput-sweep", HEX, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (_, rows) = read_csv(&dir.path().join("out/throughput_sweep.csv"));
    let mut by_m: BTreeMap<u64, Vec<(String, f64)>> = BTreeMap::new();
    for r in &rows {
        by_m.entry(field(r, "antennas") as u64).or_default().push((r["series"].clone(), field(r, "throughput_bps")));
    }
    let leader = |series: &[(String, f64)]| {
        series
            .iter()
            .filter(|(s, _)| s.starts_with('('))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(s, _)| s.clone())
            .unwrap()
    };
    for (m, series) in &by_m {
        let opt = series.iter().find(|(s, _)| s == "optimized").unwrap().1;
        for (s, v) in series.iter().filter(|(s, _)| s.starts_with('(')) {
            assert!(opt >= v * (1.0 - 1e-12), "M = {m}: optimized {opt} below {s} {v}");
        }
    }
    assert_eq!(leader(&by_m[&10]), "(3,3,1)Q=1");
    assert_eq!(leader(&by_m[&1000]), "(1,1,1)Q=1");
}

#[test]
fn same_seed_gives_identical_bytes() {
    let body = format!(
        "{RING}\n[family]\nschemes = [{{ f = 2, cluster = \"pair\", j = 2, q = 2 }}]\n[run]\nseed = 3\ntrials = 20\n"
    );
    let (a, out_a) = run_inline("bin-rates", &body, &[]);
    let (b, out_b) = run_inline("bin-rates", &body, &["--threads", "2"]);
    assert_eq!(code(&out_a), 0, "{}", stderr(&out_a));
    assert_eq!(code(&out_b), 0, "{}", stderr(&out_b));
    let bytes_a = std::fs::read(a.path().join("out/bin_rates.csv")).unwrap();
    let bytes_b = std::fs::read(b.path().join("out/bin_rates.csv")).unwrap();
    assert_eq!(bytes_a, bytes_b);
    let (c, _) = run_inline("bin-rates", &body, &["--seed", "4"]);
    assert_ne!(bytes_a, std::fs::read(c.path().join("out/bin_rates.csv")).unwrap());
}

fn run_checked_in(cmd: &str, config: &str, trials: &str, table: &str) -> Vec<BTreeMap<String, String>> {
    let dir = TempDir::new().unwrap();
    let cfg = configs_dir().join(config);
    let out = netmimo(&[
        cmd,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--trials",
        trials,
    ]);
    assert_eq!(code(&out), 0, "{config}: {}", stderr(&out));
    let (_, rows) = read_csv(&dir.path().join(format!("{table}.csv")));
    assert!(!rows.is_empty(), "{config}: empty {table}");
    rows
}

#[test]
fn checked_in_ring_bin_rates() {
    let rows = run_checked_in("bin-rates", "ring_bin_rates.toml", "4", "bin_rates");
    assert_eq!(rows.len(), 4 * 10);
}

#[test]
fn checked_in_ring_validate() {
    let dir = TempDir::new().unwrap();
    let body = std::fs::read_to_string(configs_dir().join("ring_validate.toml"))
        .unwrap()
        .replace("system_sizes = [1, 2, 4]", "system_sizes = [1, 2]")
        .replace("partial_trace_realizations = 100", "partial_trace_realizations = 4");
    let cfg = dir.path().join("validate.toml");
    std::fs::write(&cfg, body).unwrap();
    let out = netmimo(&["validate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--trials", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("validate:"));
    let entries: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .collect();
    assert_eq!(entries.len(), 2);
}

#[test]
fn checked_in_hex_map() {
    let rows = run_checked_in("optimize-map", "hex_map.toml", "0", "optimize_map");
    assert_eq!(rows.len(), 3 * 16);
}

#[test]
fn checked_in_hex_throughput() {
    let rows = run_checked_in("throughput-sweep", "hex_throughput.toml", "0", "throughput_sweep");
    assert!(rows.iter().any(|r| r["series"] == "baseline_asymptote"));
}

#[test]
fn checked_in_hex_schedule() {
    let rows = run_checked_in("schedule", "hex_schedule.toml", "0", "schedule");
    assert_eq!(rows.len(), 16);
    let total: f64 = rows.iter().map(|r| field(r, "share")).sum();
    assert!((total - 1.0).abs() < 1e-9, "shares sum to {total}");
}
