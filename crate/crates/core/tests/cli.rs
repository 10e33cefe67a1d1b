use std::fs;
use std::path::Path;
use std::process::Command;

use griddy_core::cli::{run_cli, ExperimentConfig};

fn griddy(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_griddy"))
        .args(args)
        .env_remove("GRIDDY_SEED")
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) -> String {
    fs::write(path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sample_writes_900_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write(
        &dir.path().join("c.toml"),
        &format!(
            "[target]\nname = \"beta_mixture\"\n[sampler]\nkind = \"griddy\"\nn = 11\n[chain]\nn_steps = 1000\nseed = 1\n[output]\ndir = {:?}\n",
            out
        ),
    );
    let o = griddy(&["sample", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(
        stdout.contains("samples.csv") && stdout.lines().count() == 1,
        "{stdout}"
    );

    let csv = fs::read_to_string(out.join("samples.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x1,x2");
    assert_eq!(lines.len(), 901);
    assert!(!csv.contains('\r'));
    let first: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
    assert!(first.iter().all(|v| (-1.0..=1.0).contains(v)));

    let s = json(&out.join("summary.json"));
    for key in ["acceptance_rate", "target_eval_count", "seed", "timing"] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert_eq!(s["seed"], 1);
    assert_eq!(s["acceptance_rate"], 1.0);
    assert_eq!(s["target_eval_count"], 1000 * 2 * 11);
    assert_eq!(s["run"]["config"]["sampler"]["n"], 11);

    let meta = json(&out.join("samples.csv.meta.json"));
    assert_eq!(meta["seed"], 1);
    let resolved: ExperimentConfig = serde_json::from_value(meta["config"].clone()).unwrap();
    assert_eq!(resolved.chain.n_steps, 1000);
}

#[test]
fn seed_precedence_flag_env_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("c.toml"), "[chain]\nseed = 3\nn_steps = 50\n");
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(name);
        let mut c = Command::new(env!("CARGO_BIN_EXE_griddy"));
        c.args(["sample", "--config", &cfg, "--out", out.to_str().unwrap()]);
        c.env_remove("GRIDDY_SEED");
        if let Some(e) = env {
            c.env("GRIDDY_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        assert!(c.output().unwrap().status.success());
        json(&out.join("summary.json"))["seed"].as_u64().unwrap()
    };
    assert_eq!(run("a", None, None), 3);
    assert_eq!(run("b", Some("7"), None), 7);
    assert_eq!(run("c", Some("7"), Some("9")), 9);
}

#[test]
fn kernel_verify_report_has_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k");
    let cfg = write(
        &dir.path().join("k.toml"),
        "[study]\nns = [6, 11]\nstates = 16\np = [2, 4, \"inf\"]\n[truncation]\nt = 2.0\nc3 = 1.0\nc4 = 1.0\n",
    );
    let o = griddy(&["kernel-verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("report.json"));
    assert_eq!(r["n_states"], 256);
    let entries = r["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    let fields = [
        "p",
        "kernel_dist",
        "measure_dist",
        "implied_constant",
        "gap_alpha",
        "overlap_lambda",
        "doeblin_eps",
        "doeblin_eps_p",
        "doeblin_floor",
        "fixed_space_dim_p",
        "fixed_space_dim_q",
        "remark_bound_holds",
        "operator_norm_ratio",
        "pi_lp_norm",
        "eta_lp_norm",
    ];
    for e in entries {
        let reports = e["reports"].as_array().unwrap();
        assert_eq!(reports.len(), 3);
        for rep in reports {
            for f in fields {
                assert!(rep.get(f).is_some(), "missing {f}");
            }
        }
        assert_eq!(reports[2]["p"], "inf");
        assert_eq!(e["tv_curve"].as_array().unwrap().len(), 50);
        // tail constants exist for finite p only
        assert_eq!(e["truncation"].as_array().unwrap().len(), 2);
    }
    assert_eq!(r["all_checks_hold"], true);
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 3);
    assert!(out.join("sweep.csv.meta.json").exists());
}

#[test]
fn grid_study_table_and_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("g.toml"),
        "[chain]\nn_steps = 4000\nseed = 2\n[study]\nns = [6, 11, 21]\n",
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = griddy(&["grid-study", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let table = fs::read(a.join("table.csv")).unwrap();
    assert_eq!(table, fs::read(b.join("table.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("plot.svg")).unwrap(),
        fs::read(b.join("plot.svg")).unwrap()
    );
    let text = String::from_utf8(table).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(header.contains(&"marginal_linf") && header.contains(&"joint_linf") && header.contains(&"slope"));
    let slope_col = header.iter().position(|h| *h == "slope").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[slope_col].parse::<f64>().is_ok()));
    let svg = fs::read_to_string(a.join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("marginal") && svg.contains("joint"));
}

#[test]
fn acf_compares_samplers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("acf");
    let code = run_cli([
        "griddy",
        "acf",
        "--samplers",
        "griddy,metropolized",
        "--n",
        "6",
        "--n-steps",
        "3000",
        "--max-lag",
        "20",
        "--chains",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let acf = fs::read_to_string(out.join("acf.csv")).unwrap();
    assert_eq!(acf.lines().next().unwrap(), "lag,griddy,metropolized");
    assert_eq!(acf.lines().count(), 22);
    let j = json(&out.join("acf.json"));
    assert_eq!(j["samplers"][1]["iat"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes_by_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();

    let typo = write(&dir.path().join("typo.toml"), "[sampler]\nknots = 11\n");
    let o = griddy(&["sample", "--config", &typo, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("knots"), "{err}");

    let broken = write(&dir.path().join("broken.toml"), "[chain\n");
    assert_eq!(griddy(&["sample", "--config", &broken]).status.code(), Some(2));

    let invalid = write(&dir.path().join("inv.toml"), "[chain]\nn_steps = 10\nburn_in = 10\n");
    let o = griddy(&["sample", "--config", &invalid, "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("chain.burn_in"));

    let o = griddy(&["sample", "--target", "nope", "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("target.name"));

    // gibbs on a target without exact conditionals fails at run time
    let data = write(&dir.path().join("d.csv"), "time,value\n0,1.0\n1,2.1\n2,2.9\n");
    let resid = write(
        &dir.path().join("r.toml"),
        &format!(
            "[target]\nname = \"residual_linear\"\ndata = {data:?}\nlower = [-5.0, -5.0]\nupper = [5.0, 5.0]\n[sampler]\nkind = \"gibbs\"\n"
        ),
    );
    let o = griddy(&["sample", "--config", &resid, "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("samplers:"));

    let o = griddy(&[
        "sample",
        "--config",
        &resid,
        "--sampler",
        "griddy",
        "--n-steps",
        "200",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let o = griddy(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("GRIDDY_SEED"));
}

#[test]
fn reproduce_runs_with_short_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    assert_eq!(
        run_cli([
            "griddy",
            "reproduce-6-1",
            "--n-steps",
            "2000",
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let s = json(&out.join("study.json"));
    assert_eq!(s["study"]["rows"].as_array().unwrap().len(), 5);
    assert_eq!(s["run"]["config"]["chain"]["n_steps"], 2000);
    assert!(s["study"]["floor"]["marginal_linf"].is_number());
}
