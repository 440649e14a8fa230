use flashsim::channel::{ChannelParams, WriteVoltages};
use flashsim::writeopt::WriteObjective;
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_flashsim");

/// A small code keeps each invocation fast; the distance is pinned so no
/// estimate runs.
const SMALL_CODE: &str = "[code]\nn = 256\nk = 224\nrequire_girth6 = false\nd_min = 4\n";

fn flashsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env_remove("FLASHSIM_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, format!("{SMALL_CODE}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

/// `name,value` pairs from the inspect summary.
fn quantity(out: &str, name: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{name},")))
        .unwrap_or_else(|| panic!("no {name} in output"))
        .to_string()
}

fn long_flags(help: &str) -> BTreeSet<String> {
    help.split(|c: char| c.is_whitespace() || c == ',' || c == '[' || c == ']')
        .filter(|w| w.starts_with("--") && w.len() > 2)
        .map(|w| w.trim_end_matches(|c: char| !c.is_alphanumeric()).to_string())
        .collect()
}

#[test]
fn help_lists_exactly_the_known_flags() {
    let global = ["--config", "--threads", "--seed", "--help"];
    let inventory: [(&str, &[&str]); 7] = [
        ("inspect", &["--pe", "--t-ret", "--write-scheme", "--trace"]),
        ("optimize-write", &["--pe", "--t-ret", "--scheme", "--out"]),
        (
            "optimize-read",
            &["--pe", "--t-ret", "--scheme", "--theta", "--weights", "--write-scheme", "--out"],
        ),
        ("calibrate", &["--frames", "--out"]),
        (
            "sweep",
            &[
                "--frames",
                "--min-events",
                "--write-scheme",
                "--read-scheme",
                "--weights",
                "--use-lut",
                "--lut",
                "--voltages-out",
                "--out",
            ],
        ),
        ("build-lut", &["--weights", "--out"]),
        ("dmin", &["--effort", "--alist", "--alist-out"]),
    ];
    let dir = tempfile::tempdir().unwrap();
    for (sub, flags) in inventory {
        let out = flashsim(dir.path(), &[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help failed");
        let expected: BTreeSet<String> = flags.iter().chain(&global).map(|s| s.to_string()).collect();
        assert_eq!(long_flags(&stdout(&out)), expected, "flag inventory of {sub}");
    }
}

#[test]
fn inspect_reports_the_fresh_erase_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = flashsim(dir.path(), &["--config", &cfg, "inspect", "--trace", "trace.csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(quantity(&text, "sigma_s11"), "0.35");
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let h: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(h.len(), 512);
    let peaks = (1..h.len() - 1).filter(|&i| h[i] > h[i - 1] && h[i] >= h[i + 1]).count();
    assert_eq!(peaks, 3);
}

#[test]
fn misspelled_key_is_named_in_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[channel]\nsigma_eee = 0.3\n");
    let out = flashsim(dir.path(), &["--config", &cfg, "inspect"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sigma_eee"), "{err}");
    assert!(err.contains("line 7"), "{err}");
}

#[test]
fn zero_frames_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sweep]\nframes = 0\n");
    let out = flashsim(dir.path(), &["--config", &cfg, "sweep", "--read-scheme", "mmi"]);
    assert_eq!(out.status.code(), Some(2));
    let out = flashsim(dir.path(), &["--config", &cfg, "sweep", "--read-scheme", "mmi", "--frames", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn proposed_read_needs_weights() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[channel]\npe = 6000\nt_ret = 15000\n");
    let out = flashsim(dir.path(), &["--config", &cfg, "optimize-read", "--scheme", "proposed"]);
    assert_eq!(out.status.code(), Some(4));
    let out = flashsim(
        dir.path(),
        &["--config", &cfg, "optimize-read", "--scheme", "proposed", "--weights", "1,1"],
    );
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta_star,r1,r2,r3,r4,r5,r6,c1,c2,cost"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!(row[0] > 0.05 && row[0] < 0.95);
    assert!(row[1..7].windows(2).all(|w| w[0] < w[1]));
    let fixed = flashsim(
        dir.path(),
        &["--config", &cfg, "optimize-read", "--scheme", "entropy-fixed", "--theta", "0.35"],
    );
    assert!(stdout(&fixed).lines().nth(1).unwrap().starts_with("0.35,"));
}

#[test]
fn optimize_write_matches_a_grid_search() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[channel]\npe = 6000\nt_ret = 15000\n");
    let out = flashsim(dir.path(), &["--config", &cfg, "optimize-write", "--scheme", "proposed"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();

    let params = ChannelParams::default().at(6000.0, 15000.0);
    let obj = WriteObjective::Cost { d_min: 4 };
    let m = 200;
    let step = (params.v_max - params.v_min) / (m - 1) as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..m {
        for j in i + 1..m {
            let (v1, v2) = (params.v_min + step * i as f64, params.v_min + step * j as f64);
            let f = obj.eval(&params, WriteVoltages::new(v1, v2));
            if f < best.0 {
                best = (f, v1, v2);
            }
        }
    }
    assert!((row[0] - best.1).abs() <= 0.01, "v1 {} vs grid {}", row[0], best.1);
    assert!((row[1] - best.2).abs() <= 0.01, "v2 {} vs grid {}", row[1], best.2);
    assert!(row[2] <= best.0 * 1.01, "cost {} vs grid {}", row[2], best.0);
}

#[test]
fn lut_sweep_reproduces_direct_voltages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sweep]\npe = 3000, 6000\nt = 5000, 15000\nframes = 8\n");
    let built = flashsim(dir.path(), &["--config", &cfg, "build-lut", "--weights", "1,1"]);
    assert!(built.status.success(), "{}", String::from_utf8_lossy(&built.stderr));
    let via_lut = flashsim(
        dir.path(),
        &["--config", &cfg, "sweep", "--use-lut", "--voltages-out", "lut_v.csv", "--out", "lut.csv"],
    );
    assert!(via_lut.status.success(), "{}", String::from_utf8_lossy(&via_lut.stderr));
    let direct = flashsim(
        dir.path(),
        &["--config", &cfg, "sweep", "--weights", "1,1", "--voltages-out", "direct_v.csv", "--out", "direct.csv"],
    );
    assert!(direct.status.success());
    let read = |f: &str| fs::read_to_string(dir.path().join(f)).unwrap();
    assert_eq!(read("lut_v.csv"), read("direct_v.csv"));
    assert_eq!(read("lut_v.csv").lines().count(), 5);
    assert_eq!(read("lut.csv"), read("direct.csv"));
}

#[test]
fn missing_lut_is_a_missing_dependency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = flashsim(dir.path(), &["--config", &cfg, "sweep", "--use-lut"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn seed_precedence_is_flag_then_env_then_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seeded.cfg");
    fs::write(
        &path,
        format!("master_seed = 5\n{SMALL_CODE}[sweep]\npe = 9000\nt = 10000\nframes = 6\nmin_events = 0\n"),
    )
    .unwrap();
    let cfg = path.to_str().unwrap().to_string();
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(BIN);
        c.current_dir(dir.path()).env_remove("FLASHSIM_SEED");
        if let Some(s) = env {
            c.env("FLASHSIM_SEED", s);
        }
        c.args(["--config", &cfg]);
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        c.args(["sweep", "--read-scheme", "mmi", "--write-scheme", "fixed"]);
        let o = c.output().unwrap();
        assert!(o.status.success());
        stdout(&o)
    };
    let file = run(None, None);
    assert_eq!(file, run(None, None));
    assert_eq!(run(None, Some("5")), file);
    let env = run(Some("11"), None);
    assert_ne!(env, file);
    assert_eq!(run(Some("11"), Some("5")), file);
    assert_eq!(run(None, Some("11")), env);
}

#[test]
fn dmin_of_a_loaded_hamming_code() {
    let dir = tempfile::tempdir().unwrap();
    let hamming = "7 3\n3 4\n1 1 2 1 2 2 3\n4 4 4\n1 0 0\n2 0 0\n1 2 0\n3 0 0\n1 3 0\n2 3 0\n1 2 3\n1 3 5 7\n2 3 6 7\n4 5 6 7\n";
    fs::write(dir.path().join("h.alist"), hamming).unwrap();
    let out = flashsim(dir.path(), &["dmin", "--alist", "h.alist"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().nth(1), Some("7,3,4,3,true,5000"));
    let out = flashsim(dir.path(), &["dmin", "--alist", "absent.alist"]);
    assert_eq!(out.status.code(), Some(4));
}
