use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use orbitmatch::record::{read_rows, Manifest, Report};
use orbitmatch::{example_config, ExperimentConfig, Kind};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_orbitmatch"))
}

fn run_cli(args: &[&str], workers: Option<usize>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("ORBITMATCH_WORKERS", w.to_string()),
        None => cmd.env_remove("ORBITMATCH_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Small, fast configs covering every kind.
fn small_config(kind: Kind) -> String {
    let (grid, reps, extra) = match kind {
        Kind::MatchCurve => ("100, 1000, 1e4", 3, ""),
        Kind::ProximityCurve => ("100, 1000, 1e4", 3, ""),
        Kind::D2 => ("2000, 4000", 2, ""),
        Kind::H2 => ("2000, 4000", 2, ""),
        Kind::Diagnostics => ("6, 8", 1, ""),
        Kind::Returns => ("1, 2, 3", 2, "samples = 20000\n"),
    };
    let mut text = String::new();
    let mut section = "";
    for line in example_config(kind).lines() {
        if line.starts_with('[') {
            if section == "[params]" {
                text.push_str(extra);
            }
            section = if line == "[params]" { "[params]" } else { "" };
        }
        let line = if line.starts_with("n_grid") {
            format!("n_grid = {grid}")
        } else if line.starts_with("replicates") {
            format!("replicates = {reps}")
        } else if line.starts_with("samples") {
            continue;
        } else {
            line.to_string()
        };
        text.push_str(&line);
        text.push('\n');
    }
    if section == "[params]" {
        text.push_str(extra);
    }
    text
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn read_report(dir: &Path) -> Report {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn small_configs_keep_their_kind() {
    for kind in Kind::ALL {
        let cfg = ExperimentConfig::parse(&small_config(kind)).unwrap();
        assert_eq!(cfg.kind, kind);
        assert!(cfg.cell_count() <= 9);
    }
}

#[test]
fn reruns_are_byte_identical_for_every_kind() {
    let tmp = TempDir::new().unwrap();
    for kind in Kind::ALL {
        let cfg = write_config(tmp.path(), &format!("{}.cfg", kind.name()), &small_config(kind));
        let a = tmp.path().join(format!("{}_a", kind.name()));
        let b = tmp.path().join(format!("{}_b", kind.name()));
        let oa = run_cli(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()], Some(1));
        let ob = run_cli(&["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()], Some(4));
        assert!(code(&oa) <= 1, "{}: {}", kind.name(), String::from_utf8_lossy(&oa.stderr));
        assert_eq!(code(&oa), code(&ob));
        for file in ["results.csv", "manifest.json"] {
            let (x, y) = (fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
            assert_eq!(x, y, "{} {file} differs between runs", kind.name());
        }
        let rows = read_rows(&a.join("results.csv")).unwrap();
        let config = ExperimentConfig::parse(&small_config(kind)).unwrap();
        assert_eq!(rows.len(), config.cell_count());
    }
}

#[test]
fn rows_carry_seeds_listed_in_the_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "m.cfg", &small_config(Kind::MatchCurve));
    let out = tmp.path().join("out");
    run_cli(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let rows = read_rows(&out.join("results.csv")).unwrap();
    assert_eq!(manifest.cells.len(), rows.len());
    for (c, r) in manifest.cells.iter().zip(&rows) {
        assert_eq!((c.n, c.replicate, c.seed), (r.n, r.replicate, r.seed));
    }
    let seeds: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), rows.len());
    let header = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(header.starts_with("experiment,kind,n,replicate,seed,value,aux,flag\n"));
}

#[test]
fn match_curve_target_comes_from_exact_entropy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "m.cfg", &small_config(Kind::MatchCurve));
    let out = tmp.path().join("out");
    run_cli(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    let report = read_report(&out);
    assert!((report.evaluation.target - 2.0 / 2f64.ln()).abs() < 1e-12);
    assert!((report.evaluation.target - 2.8854).abs() < 1e-4);
    assert!(report.evaluation.target_source.contains("renyi_entropy_exact"));
}

#[test]
fn interrupted_run_resumes_to_identical_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "p.cfg", &small_config(Kind::ProximityCurve));
    let (cfg_s, fresh, partial) = (cfg.to_str().unwrap(), tmp.path().join("fresh"), tmp.path().join("partial"));
    assert_eq!(code(&run_cli(&["run", cfg_s, "--out", fresh.to_str().unwrap()], None)), 0);

    let o = run_cli(&["run", cfg_s, "--out", partial.to_str().unwrap(), "--max-cells", "2"], None);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(read_report(&partial).cells_present, 2);

    let o = run_cli(&["run", cfg_s, "--out", partial.to_str().unwrap()], None);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("computed 7 cells, reused 2"));
    assert_eq!(fs::read(fresh.join("results.csv")).unwrap(), fs::read(partial.join("results.csv")).unwrap());
}

#[test]
fn deleted_cell_is_reproduced_exactly() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "h.cfg", &small_config(Kind::H2));
    let out = tmp.path().join("out");
    let args = ["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    run_cli(&args, None);
    let before = fs::read(out.join("results.csv")).unwrap();
    let cells: Vec<PathBuf> = fs::read_dir(out.join("cells"))
        .unwrap()
        .flat_map(|d| fs::read_dir(d.unwrap().path()).unwrap())
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(cells.len(), 4);
    fs::remove_file(&cells[2]).unwrap();
    // A corrupt cell file is recomputed rather than trusted.
    fs::write(&cells[1], "garbage\n").unwrap();
    let o = run_cli(&args, None);
    assert!(String::from_utf8_lossy(&o.stdout).contains("computed 2 cells, reused 2"));
    assert_eq!(fs::read(out.join("results.csv")).unwrap(), before);
}

#[test]
fn invalid_configs_exit_with_code_two_and_a_location() {
    let tmp = TempDir::new().unwrap();
    let base = small_config(Kind::MatchCurve);
    let cases = [
        (base.replace("replicates = 3", "replicates = 0"), "replicates"),
        (base.replace("n_grid = 100, 1000, 1e4", "n_grid = 1000, 100"), "n_grid"),
        (base.replace("tolerance = 0.35", "tolerence = 0.35"), "tolerence"),
        (base.replace("weights = 0.5, 0.5", "weights = 0.5, 0.7"), "type"),
    ];
    for (i, (text, field)) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("bad{i}.cfg"), text);
        let out = tmp.path().join(format!("bad{i}"));
        let o = run_cli(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(code(&o), 2, "{err}");
        assert!(err.contains("line ") && err.contains(&format!("`{field}`")), "{err}");
        assert!(!out.exists());
    }
    let o = run_cli(&["run", tmp.path().join("missing.cfg").to_str().unwrap(), "--out", "x"], None);
    assert_eq!(code(&o), 2);
    let cfg = write_config(tmp.path(), "ok.cfg", &base);
    let o = run_cli(&["run", cfg.to_str().unwrap(), "--out", tmp.path().join("w").to_str().unwrap()], Some(0));
    assert_eq!(code(&o), 2);
}

#[test]
fn failing_tolerance_exits_with_code_one() {
    let tmp = TempDir::new().unwrap();
    let text = small_config(Kind::MatchCurve).replace("tolerance = 0.35", "tolerance = 0");
    let cfg = write_config(tmp.path(), "m.cfg", &text);
    let out = tmp.path().join("out");
    let o = run_cli(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 1);
    assert!(!read_report(&out).evaluation.pass);
}

#[test]
fn verify_reevaluates_records() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "d.cfg", &small_config(Kind::D2));
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    assert_eq!(code(&run_cli(&["run", cfg.to_str().unwrap(), "--out", out_s], None)), 0);
    assert_eq!(code(&run_cli(&["verify", out_s], None)), 0);
    assert_eq!(code(&run_cli(&["verify", out_s, "--tolerance", "0"], None)), 1);

    // Dropping more than half of the rows makes the record incomplete.
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let kept: Vec<&str> = csv.lines().take(2).collect();
    fs::write(out.join("results.csv"), kept.join("\n") + "\n").unwrap();
    assert_eq!(code(&run_cli(&["verify", out_s], None)), 3);

    // A row whose seed disagrees with the manifest is rejected.
    let mut lines: Vec<String> = csv.lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[1].split(',').collect();
    fields[4] = "1";
    lines[1] = fields.join(",");
    fs::write(out.join("results.csv"), lines.join("\n") + "\n").unwrap();
    assert_eq!(code(&run_cli(&["verify", out_s], None)), 2);

    assert_eq!(code(&run_cli(&["verify", tmp.path().join("nothing").to_str().unwrap()], None)), 2);
}

#[test]
fn list_and_print_commands() {
    let o = run_cli(&["list-kinds"], None);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for k in Kind::ALL {
        assert!(text.lines().any(|l| l.starts_with(k.name())));
        let p = run_cli(&["print-example-config", k.name()], None);
        assert_eq!(code(&p), 0);
        let cfg = ExperimentConfig::parse(&String::from_utf8_lossy(&p.stdout)).unwrap();
        assert_eq!(cfg.kind, k);
    }
    assert_eq!(code(&run_cli(&["print-example-config", "nope"], None)), 2);
}

#[test]
fn proximity_orbits_are_exported() {
    let tmp = TempDir::new().unwrap();
    let text = small_config(Kind::ProximityCurve)
        .replace("type = k_doubling\nk = 2", "type = gauss")
        .replace("exact = true", "export_orbits = true");
    let cfg = write_config(tmp.path(), "g.cfg", &text);
    let out = tmp.path().join("out");
    let o = run_cli(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(code(&o) <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    let orbit = fs::read_to_string(out.join("orbits").join("n000000001000_r00002.csv")).unwrap();
    let mut lines = orbit.lines();
    assert_eq!(lines.next(), Some("index,point,noise_floor"));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 1000);
    for l in body {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((0.0..1.0).contains(&f[1]) && f[2] > 0.0);
    }
    assert_eq!(fs::read_dir(out.join("orbits")).unwrap().count(), 9);
}
