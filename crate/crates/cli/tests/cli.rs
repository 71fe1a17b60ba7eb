use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FAST: &[&str] = &[
    "linkchar.blocks_per_point=200",
    "linkchar.awgn_grid=-10:40:2",
    "linkchar.rayleigh_grid=-4:84:4",
    "drop.users_per_cell=8",
    "engine.ttis=10",
    "sweep.hcg_points=0,0.5,1",
    "sweep.distance_bins=3",
    "sweep.drop_radius_points=0.5,1",
];

struct Env {
    dir: tempfile::TempDir,
}

impl Env {
    fn new() -> Self {
        Env {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn cache(&self) -> PathBuf {
        self.dir.path().join("cache").join("linkchar.cache")
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    /// Runs `lhs <sub> [extra]` with the fast settings and this env's paths.
    fn lhs(&self, sub: &[&str], extra: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_lhs"));
        cmd.args(sub);
        for s in FAST {
            cmd.args(["--set", s]);
        }
        cmd.arg("--set").arg(format!("run.cache={}", self.cache().display()));
        cmd.arg("--out").arg(self.out());
        cmd.args(extra);
        cmd.output().unwrap()
    }

    fn ok(&self, sub: &[&str], extra: &[&str]) -> String {
        let o = self.lhs(sub, extra);
        assert!(
            o.status.success(),
            "lhs {sub:?} failed: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        String::from_utf8(o.stdout).unwrap()
    }
}

fn header(table: &str) -> Vec<String> {
    let line = table.lines().find(|l| !l.starts_with('#')).unwrap();
    line.split(',').map(str::to_string).collect()
}

fn metadata(table: &str, key: &str) -> Option<String> {
    table
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn linkchar_reuses_the_cache_until_forced() {
    let env = Env::new();
    let first = env.ok(&["linkchar"], &[]);
    assert!(first.starts_with("wrote "), "{first}");
    assert!(first.contains("0.5,lp,"));
    let cached = read(&env.cache());
    let second = env.ok(&["linkchar"], &[]);
    assert!(second.starts_with("cache hit "), "{second}");
    // Same thresholds either way.
    assert_eq!(
        first.lines().skip(1).collect::<Vec<_>>(),
        second.lines().skip(1).collect::<Vec<_>>()
    );
    let forced = env.ok(&["linkchar"], &["--force"]);
    assert!(forced.starts_with("wrote "));
    assert_eq!(read(&env.cache()), cached);
}

#[test]
fn corrupt_cache_is_rejected() {
    let env = Env::new();
    env.ok(&["linkchar"], &[]);
    let text = read(&env.cache());
    let row = text
        .lines()
        .find(|l| !l.starts_with('#') && l.contains(",awgn,"))
        .unwrap();
    let mut fields: Vec<String> = row.split(',').map(str::to_string).collect();
    // The bler column.
    fields[4] = if fields[4] == "0.5" { "0.25" } else { "0.5" }.into();
    fs::write(env.cache(), text.replacen(row, &fields.join(","), 1)).unwrap();
    let o = env.lhs(&["run"], &[]);
    assert!(!o.status.success());
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("checksum"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn run_without_cache_fails() {
    let env = Env::new();
    let o = env.lhs(&["run"], &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains("linkchar"), "{err}");
}

#[test]
fn flags_override_set_override_file() {
    let env = Env::new();
    env.ok(&["linkchar"], &[]);
    let cfg = env.dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# layered config\nrun.seed = 11\nrun.iterations = 3\ndrop.users_per_cell = 6\n",
    )
    .unwrap();
    let cfg_arg = cfg.to_str().unwrap();
    // File value, then --set over the file, then the explicit flag over both.
    env.ok(&["run"], &["--config", cfg_arg]);
    let t = read(&env.out().join("run_lhs.txt"));
    assert_eq!(metadata(&t, "seed").as_deref(), Some("11"));
    assert_eq!(metadata(&t, "iterations").as_deref(), Some("3"));

    env.ok(
        &["run"],
        &[
            "--config",
            cfg_arg,
            "--set",
            "run.seed=12",
            "--set",
            "drop.users_per_cell=7",
        ],
    );
    let t = read(&env.out().join("run_lhs.txt"));
    assert_eq!(metadata(&t, "seed").as_deref(), Some("12"));
    assert_eq!(metadata(&t, "cfg drop.users_per_cell").as_deref(), Some("7"));

    env.ok(
        &["run"],
        &[
            "--config",
            cfg_arg,
            "--set",
            "run.seed=12",
            "--seed",
            "13",
            "--scheme",
            "scptm",
        ],
    );
    let t = read(&env.out().join("run_scptm.txt"));
    assert_eq!(metadata(&t, "seed").as_deref(), Some("13"));
    assert_eq!(metadata(&t, "scheme").as_deref(), Some("scptm"));
    assert_eq!(metadata(&t, "iterations").as_deref(), Some("3"));
}

#[test]
fn run_reproduces_from_its_metadata() {
    let env = Env::new();
    env.ok(&["linkchar"], &[]);
    env.ok(&["run"], &["--seed", "5", "--iterations", "2"]);
    let first = read(&env.out().join("run_lhs.txt"));
    let cfg: String = first
        .lines()
        .filter_map(|l| l.strip_prefix("# cfg "))
        .map(|l| format!("{l}\n"))
        .collect();
    let cfg_path = env.dir.path().join("replay.cfg");
    fs::write(&cfg_path, cfg).unwrap();
    let replay_out = env.dir.path().join("replay");
    let o = Command::new(env!("CARGO_BIN_EXE_lhs"))
        .args(["run", "--config", cfg_path.to_str().unwrap(), "--out"])
        .arg(&replay_out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = read(&replay_out.join("run_lhs.txt"));
    let body = |t: &str| {
        t.lines()
            .filter(|l| !l.contains("run.out_dir"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(body(&first), body(&again));
}

#[test]
fn sweep_tables_have_their_columns() {
    let env = Env::new();
    env.ok(&["linkchar"], &[]);
    let cases: [(&str, &str, &[&str]); 3] = [
        ("hcg", "sweep_hcg.txt", &["hcg_fraction"]),
        (
            "distance",
            "sweep_distance.txt",
            &["mode", "cell", "bin_low_m", "bin_high_m", "p_bl_el"],
        ),
        (
            "drop-radius",
            "sweep_drop_radius.txt",
            &["lhs_hls_services", "scptm_hls_services"],
        ),
    ];
    for (kind, file, columns) in cases {
        let printed = env.ok(&["sweep", kind], &["--iterations", "2"]);
        assert!(printed.trim().ends_with(file), "{printed}");
        let t = read(&env.out().join(file));
        let h = header(&t);
        for c in columns {
            assert!(h.iter().any(|x| x == c), "{kind}: no column {c} in {h:?}");
        }
        let rows = t.lines().filter(|l| !l.starts_with('#')).skip(1);
        for r in rows {
            assert_eq!(r.split(',').count(), h.len(), "{kind}: ragged row {r}");
        }
        assert_eq!(
            metadata(&t, "sweep").as_deref(),
            Some(file.trim_start_matches("sweep_").trim_end_matches(".txt"))
        );
    }
}

#[test]
fn bad_values_name_their_key() {
    let env = Env::new();
    for (set, key) in [
        ("subcarrier_spacing=0", "subcarrier_spacing"),
        ("engine.fidelity=exact", "engine.fidelity"),
    ] {
        let o = env.lhs(&["linkchar"], &["--set", set]);
        assert!(!o.status.success());
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(key), "{set}: {err}");
    }
    let o = env.lhs(&["run"], &["--set", "no.such.key=1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no.such.key"));
}
