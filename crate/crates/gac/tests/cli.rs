//! End-to-end tests of the command-line binary: training runs, resumption,
//! evaluation reports, plotting, and the gradient self-check.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn gac() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gac"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary should spawn");
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary should spawn");
    assert!(!out.status.success(), "command unexpectedly succeeded");
    out
}

/// A bandit config small enough to train in well under a second.
fn tiny_config(out_dir: &Path, seeds: &str) -> String {
    format!(
        "env = bimodal_bandit\n\
         algorithm = gac_adaptive\n\
         seeds = {seeds}\n\
         output_dir = {}\n\
         iterations = 6\n\
         updates_per_iteration = 2\n\
         steps_per_iteration = 4\n\
         batch_size = 8\n\
         action_samples = 4\n\
         hidden = 8,8\n\
         buffer_capacity = 256\n\
         eval_episodes = 2\n\
         checkpoint_every = 3\n",
        out_dir.display()
    )
}

fn write_config(path: &Path, body: &str) -> PathBuf {
    fs::write(path, body).unwrap();
    path.to_path_buf()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn train_writes_expected_artifacts() {
    let tmp = TempDir::new().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(&tmp.path().join("run.cfg"), &tiny_config(&run_dir, "0"));
    run_ok(gac().arg("train").arg(&cfg));

    let seed_dir = run_dir.join("seed_0");
    let metrics = read(&seed_dir.join("metrics.csv"));
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines.len(), 7, "header plus one row per iteration:\n{metrics}");
    assert_eq!(
        lines[0],
        "step,env_steps,eval_return_mean,eval_return_std,critic_loss,actor_loss,mmd_value,alpha,beta"
    );
    assert!(lines[1].starts_with("1,"));
    assert!(lines[6].starts_with("6,"));

    // The resolved config snapshot parses back, and checkpoints exist at
    // the cadence (iteration 3) and the end (6 is final, not periodic).
    assert!(read(&seed_dir.join("config.txt")).contains("algorithm = gac_adaptive"));
    assert!(seed_dir.join("checkpoint_3.ckpt").is_file());
    assert!(!seed_dir.join("checkpoint_6.ckpt").exists());
    assert!(seed_dir.join("checkpoint_final.ckpt").is_file());
}

#[test]
fn identical_configs_reproduce_metrics_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    let mut metrics = Vec::new();
    for name in ["a", "b"] {
        let run_dir = tmp.path().join(name);
        let cfg = write_config(&tmp.path().join(format!("{name}.cfg")), &tiny_config(&run_dir, "7"));
        run_ok(gac().arg("train").arg(&cfg));
        metrics.push(fs::read(run_dir.join("seed_7/metrics.csv")).unwrap());
    }
    assert_eq!(metrics[0], metrics[1], "same config and seed must reproduce exactly");
}

#[test]
fn each_seed_gets_its_own_directory() {
    let tmp = TempDir::new().unwrap();
    let run_dir = tmp.path().join("multi");
    let cfg = write_config(&tmp.path().join("run.cfg"), &tiny_config(&run_dir, "1,2,3"));
    run_ok(gac().arg("train").arg(&cfg));
    for seed in [1, 2, 3] {
        assert!(run_dir.join(format!("seed_{seed}/metrics.csv")).is_file());
    }
}

#[test]
fn invalid_config_fails_without_partial_artifacts() {
    let tmp = TempDir::new().unwrap();
    let run_dir = tmp.path().join("never");
    let body = format!("{}mystery_knob = 3\n", tiny_config(&run_dir, "0"));
    let cfg = write_config(&tmp.path().join("run.cfg"), &body);
    let out = run_err(gac().arg("train").arg(&cfg));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "{stderr}");
    assert!(stderr.contains("mystery_knob"), "{stderr}");
    assert!(!run_dir.exists(), "failed run must not create output directories");
}

#[test]
fn resume_from_mid_run_checkpoint_matches_uninterrupted_run() {
    let tmp = TempDir::new().unwrap();
    let full_dir = tmp.path().join("full");
    let cfg = write_config(&tmp.path().join("run.cfg"), &tiny_config(&full_dir, "5"));
    run_ok(gac().arg("train").arg(&cfg));
    let seed_dir = full_dir.join("seed_5");

    // Simulate an interrupted copy: the mid-run checkpoint plus a metrics
    // file that already ran ahead. Resume must drop the extra rows and
    // regenerate them identically.
    let split_dir = tmp.path().join("split");
    fs::create_dir_all(&split_dir).unwrap();
    fs::copy(seed_dir.join("checkpoint_3.ckpt"), split_dir.join("checkpoint_3.ckpt")).unwrap();
    fs::copy(seed_dir.join("metrics.csv"), split_dir.join("metrics.csv")).unwrap();
    run_ok(gac().arg("train").arg("--resume").arg(split_dir.join("checkpoint_3.ckpt")));

    assert_eq!(
        fs::read(seed_dir.join("metrics.csv")).unwrap(),
        fs::read(split_dir.join("metrics.csv")).unwrap(),
        "resumed metrics must match the uninterrupted run byte for byte"
    );
    assert_eq!(
        fs::read(seed_dir.join("checkpoint_final.ckpt")).unwrap(),
        fs::read(split_dir.join("checkpoint_final.ckpt")).unwrap(),
        "resumed final checkpoint must match the uninterrupted run"
    );
    // Resume also materializes the config snapshot in the new directory.
    assert_eq!(read(&seed_dir.join("config.txt")), read(&split_dir.join("config.txt")));
}

#[test]
fn resuming_a_finished_run_is_a_clean_noop() {
    let tmp = TempDir::new().unwrap();
    let run_dir = tmp.path().join("done");
    let cfg = write_config(&tmp.path().join("run.cfg"), &tiny_config(&run_dir, "0"));
    run_ok(gac().arg("train").arg(&cfg));
    let final_ckpt = run_dir.join("seed_0/checkpoint_final.ckpt");
    let before = fs::read(run_dir.join("seed_0/metrics.csv")).unwrap();
    let out = run_ok(gac().arg("train").arg("--resume").arg(&final_ckpt));
    assert!(String::from_utf8_lossy(&out.stdout).contains("nothing to do"));
    assert_eq!(before, fs::read(run_dir.join("seed_0/metrics.csv")).unwrap());
}

#[test]
fn eval_writes_a_report_with_one_row_per_sigma() {
    let tmp = TempDir::new().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(&tmp.path().join("run.cfg"), &tiny_config(&run_dir, "0"));
    run_ok(gac().arg("train").arg(&cfg));
    let ckpt = run_dir.join("seed_0/checkpoint_final.ckpt");

    // Default: one row at the configured test sigma, ten episodes.
    run_ok(gac().arg("eval").arg(&ckpt));
    let report = read(&run_dir.join("seed_0/checkpoint_final.eval.txt"));
    assert!(report.contains("episodes: 10"), "{report}");
    assert!(report.contains("latent_sigma,return_mean,return_std"), "{report}");
    assert_eq!(report.lines().filter(|l| l.starts_with("0.5,")).count(), 1, "{report}");

    // Two explicit sigmas: two rows; sigma zero is deterministic on the
    // bandit, so its spread is exactly zero.
    run_ok(gac()
        .arg("eval")
        .arg(&ckpt)
        .args(["--episodes", "4", "--latent-sigma", "0", "--latent-sigma", "1.0"]));
    let report = read(&run_dir.join("seed_0/checkpoint_final.eval.txt"));
    let rows: Vec<&str> =
        report.lines().skip_while(|l| !l.starts_with("latent_sigma")).skip(1).collect();
    assert_eq!(rows.len(), 2, "{report}");
    let zero_row: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(zero_row[0], "0");
    assert_eq!(zero_row[2], "0", "zero-sigma eval must have zero spread: {report}");

    let out = run_err(gac().arg("eval").arg(&ckpt).arg("--latent-sigma=-0.5"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("latent sigma"));
}

#[test]
fn plot_renders_charts_and_action_scatter() {
    let tmp = TempDir::new().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(&tmp.path().join("run.cfg"), &tiny_config(&run_dir, "0,1"));
    run_ok(gac().arg("train").arg(&cfg));

    // Dump actions for one seed so the scatter has input.
    let ckpt = run_dir.join("seed_0/checkpoint_final.ckpt");
    run_ok(gac().arg("eval").arg(&ckpt).args(["--dump-actions", "1000"]));
    let dump = read(&run_dir.join("seed_0/actions.csv"));
    assert_eq!(dump.lines().count(), 1001, "header plus one row per action");

    let plots = tmp.path().join("plots");
    run_ok(gac().arg("plot").arg(&run_dir).arg("--out").arg(&plots));
    for name in ["returns.svg", "mmd.svg", "alpha.svg", "beta.svg", "actions_run.svg"] {
        let svg = read(&plots.join(name));
        assert!(svg.starts_with("<svg"), "{name} is not an svg");
    }
    let scatter = read(&plots.join("actions_run.svg"));
    assert_eq!(scatter.matches("<circle").count(), 1000);
}

#[test]
fn plot_refuses_a_directory_without_metrics() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let plots = tmp.path().join("plots");
    let out = run_err(gac().arg("plot").arg(&empty).arg("--out").arg(&plots));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no metrics.csv"));
    assert!(!plots.exists(), "failed plot must not create the output directory");
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let out = run_ok(gac().arg("gradcheck").args(["--seeds", "2"]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("PASS").count(), 4, "{stdout}");

    let out = run_err(gac().arg("gradcheck").args(["--seeds", "2", "--corrupt"]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn rejecting_a_tampered_checkpoint_names_the_version() {
    let tmp = TempDir::new().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(&tmp.path().join("run.cfg"), &tiny_config(&run_dir, "0"));
    run_ok(gac().arg("train").arg(&cfg));
    let ckpt = run_dir.join("seed_0/checkpoint_final.ckpt");
    let mut bytes = fs::read(&ckpt).unwrap();
    // Flip the version digit in the header line.
    let pos = bytes.windows(2).position(|w| w == b"v1").unwrap();
    bytes[pos + 1] = b'9';
    fs::write(&ckpt, &bytes).unwrap();
    let out = run_err(gac().arg("eval").arg(&ckpt));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gac-checkpoint"));
}
