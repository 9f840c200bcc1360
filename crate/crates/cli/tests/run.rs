use std::fs;
use std::path::Path;
use std::process::Command;

use stmcmc::engine::LevelSchedule;
use stmcmc::samplers::KernelKind;
use stmcmc_cli::*;

fn tail_config(dir: &Path, n: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Pipeline::PriorFail);
    cfg.n = n;
    cfg.seed = 7;
    cfg.model = Some(ModelConfig::GaussianTail { dim: 3, threshold: 2.5 });
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn result_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timing.json" {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn rerun_reproduces_every_result_file() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tail_config(&tmp.path().join("a"), 256);
    let mut b = a.clone();
    b.output_dir = tmp.path().join("b");
    b.workers = 1;
    let mut c = a.clone();
    c.output_dir = tmp.path().join("c");
    let (ma, mb) = (run(&a).unwrap(), run(&b).unwrap());
    run(&c).unwrap();
    assert_eq!(ma.content_version, mb.content_version);
    assert_eq!(result_files(&a.output_dir), result_files(&c.output_dir));
    // only the recorded worker count may differ
    let fa = result_files(&a.output_dir);
    let fb = result_files(&b.output_dir);
    for ((pa, ba), (pb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(pa, pb);
        if pa != "manifest.json" {
            assert_eq!(ba, bb, "{pa}");
        }
    }
    assert!(a.output_dir.join("timing.json").is_file());
}

#[test]
fn manifest_counts_match_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tail_config(tmp.path(), 200);
    cfg.repeat = 2;
    let m = run(&cfg).unwrap();
    let mut total = 0;
    for s in &m.schedules {
        let f = fs::File::open(tmp.path().join(s)).unwrap();
        let sched = LevelSchedule::read_jsonl(std::io::BufReader::new(f)).unwrap();
        total += sched.evaluations();
    }
    assert_eq!(total, m.total_evaluations);
    assert_eq!(m.result.repeats.iter().map(|r| r.evaluations).sum::<u64>(), total);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(json["total_evaluations"], total);
    assert_eq!(json["config_hash"], cfg.hash());
    assert!(json.get("wall_time_s").is_none());

    let levels = fs::read_to_string(tmp.path().join("rep-000/levels.csv")).unwrap();
    let last = levels.lines().last().unwrap().split(',').nth(4).unwrap().to_string();
    assert_eq!(last.parse::<u64>().unwrap(), m.result.repeats[0].evaluations);
    let failure = fs::read_to_string(tmp.path().join("rep-000/failure.csv")).unwrap();
    assert!(failure.starts_with("x0,x1,x2,failure_value"));
    assert_eq!(failure.lines().count(), 201);
}

#[test]
fn constant_likelihood_update_is_one_level_of_prior_draws() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Pipeline::Update);
    cfg.n = 2000;
    cfg.seed = 3;
    cfg.model = Some(ModelConfig::Constant { dim: 2, threshold: 3.0, log_value: -1.5 });
    cfg.output_dir = tmp.path().to_path_buf();
    let m = run(&cfg).unwrap();
    let rep = &m.result.repeats[0];
    assert_eq!(rep.updating_levels, 1);
    assert!((rep.log_evidence.unwrap() + 1.5).abs() < 1e-12);

    let mut rdr = csv::Reader::from_path(tmp.path().join("rep-000/posterior.csv")).unwrap();
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().take(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2000);
    for j in 0..2 {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / 2000.0;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / 1999.0;
        // standard normal prior; 5 standard errors
        assert!(mean.abs() < 5.0 / 2000f64.sqrt(), "{mean}");
        assert!((var - 1.0).abs() < 5.0 * (2.0 / 2000f64).sqrt(), "{var}");
    }
}

#[test]
fn compare_rejects_mismatched_pipelines_and_repeats_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tail_config(tmp.path(), 128);
    let mut other = a.clone();
    other.pipeline = Pipeline::Update;
    match compare(&[a.clone(), other], tmp.path()) {
        Err(e @ CliError::Config(_)) => assert!(e.to_string().contains("mismatched pipelines")),
        r => panic!("{r:?}"),
    }
    let mut seeded = a.clone();
    seeded.seed = 8;
    assert!(matches!(check_comparable(&[a.clone(), seeded]), Err(CliError::Config(_))));

    let mut mma = a.clone();
    mma.kernel = KernelKind::Mma;
    check_comparable(&[a.clone(), mma]).unwrap();

    let rows = compare(&[a.clone(), a.clone()], tmp.path()).unwrap();
    assert_eq!(rows[0].deterministic(), rows[1].deterministic());
    assert_eq!(rows[1].evaluation_ratio, 1.0);
    let table = fs::read_to_string(tmp.path().join("comparison.csv")).unwrap();
    assert!(table.starts_with("kernel,seed,evaluations,wall_time_s"));
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn ess_table_pipeline_writes_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Pipeline::EssTable);
    cfg.n = 200;
    cfg.ess = Some(stmcmc_cli::config::EssTableConfig { rho: vec![0.5], levels: 10, reps: 50 });
    cfg.output_dir = tmp.path().to_path_buf();
    let m = run(&cfg).unwrap();
    assert_eq!(m.result.ess_table.len(), 1);
    assert_eq!(m.total_evaluations, 0);
    let t = fs::read_to_string(tmp.path().join("ess.csv")).unwrap();
    assert_eq!(t.lines().count(), 2);
}

#[test]
fn hanoi_synthetic_data_is_written() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
pipeline = "update"
n = 16
kappa_star = 1.0
max_steps = 5
seed = 1

[model]
kind = "hanoi"
synthetic = { case = "large-leak", conditions = 1, truth_seed = 2, data_seed = 3 }
"#;
    let mut cfg = ExperimentConfig::from_toml(text, None).unwrap();
    cfg.output_dir = tmp.path().to_path_buf();
    cfg.validate().unwrap();
    let m = run(&cfg).unwrap();
    assert!(m.files.contains(&"data/truth.csv".to_string()));
    let obs = fs::read_to_string(tmp.path().join("data/observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 32);
    let post = fs::read_to_string(tmp.path().join("rep-000/posterior.csv")).unwrap();
    assert!(post.starts_with("demand_2,"));
    assert!(post.lines().next().unwrap().contains("leak_size_59"));
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stmcmc"))
}

#[test]
fn exit_codes_and_output_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("bad.toml");
    fs::write(&cfg_path, "pipeline = \"prior-fail\"\nn = 11\n[model]\nkind = \"gaussian-tail\"\ndim = 2\nthreshold = 2.0\n")
        .unwrap();
    let out = bin().arg("validate").arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n even"));

    // a flag can repair the config
    let out = bin().args(["validate", "--n", "12"]).arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let missing = tmp.path().join("missing.toml");
    fs::write(&missing, "pipeline = \"update\"\n[model]\nkind = \"hanoi\"\nobservations = \"nope.csv\"\nconditions = \"nope2.csv\"\n")
        .unwrap();
    let out = bin().arg("run").arg(&missing).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.csv") && err.contains("nope2.csv"), "{err}");

    // far tail with too few levels allowed
    let abort = tmp.path().join("abort.toml");
    fs::write(
        &abort,
        "pipeline = \"prior-fail\"\nn = 100\nsubset_max_levels = 2\n[model]\nkind = \"gaussian-tail\"\ndim = 2\nthreshold = 6.0\n",
    )
    .unwrap();
    let env_out = tmp.path().join("from-env");
    let out = bin().arg("run").arg(&abort).env(OUTPUT_DIR_ENV, &env_out).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let ok = tmp.path().join("ok.toml");
    fs::write(&ok, "pipeline = \"prior-fail\"\nn = 100\noutput_dir = \"ignored\"\n[model]\nkind = \"gaussian-tail\"\ndim = 2\nthreshold = 1.0\n")
        .unwrap();
    let out = bin().arg("run").arg(&ok).env(OUTPUT_DIR_ENV, &env_out).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(env_out.join("manifest.json").is_file());
    let flag_out = tmp.path().join("from-flag");
    let out = bin()
        .arg("run")
        .arg(&ok)
        .arg("--output-dir")
        .arg(&flag_out)
        .env(OUTPUT_DIR_ENV, &env_out)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(flag_out.join("manifest.json").is_file());
}

#[test]
fn oracle_prints_reference() {
    let out = bin().args(["oracle", "gaussian-tail", "--threshold", "4.5"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("3.397673e-6"), "{text}");
}
