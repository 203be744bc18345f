//! Scripted command-line scenarios shared by the `cli` and `acceptance`
//! targets. Each scenario returns `Err` with a diagnostic when the binary's
//! exit code or outputs disagree with the contract.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skt_cli::RunConfig;
use tempfile::TempDir;
use toml::{Table, Value};

pub type Check = Result<(), String>;
pub type Scenario = (&'static str, fn() -> Check);

const BASE: &str = r#"
seed = 7

[model]
n = 2
d = 1
a0 = [1.0, 1.0]
a = [[1.0, 0.5], [0.5, 1.0]]

[grid]
extents = [1.0]
cells = [32]

[time]
horizon = 0.05
dt = 0.005

[initial]
mean = [1.0, 2.0]
amplitude = [0.5, -0.8]

[sampling]
count = 2000
"#;

/// Base config with dotted-key overrides; a `None` value removes the key.
pub fn config(overrides: &[(&str, Option<&str>)]) -> String {
    let mut root: Table = BASE.parse().expect("base config parses");
    for (key, value) in overrides {
        // a quoted last segment may itself contain dots
        let (mut parts, last): (Vec<&str>, &str) = match key.split_once(".\"") {
            Some((head, quoted)) => (head.split('.').collect(), quoted.trim_end_matches('"')),
            None => {
                let mut p: Vec<&str> = key.split('.').collect();
                let last = p.pop().expect("nonempty key");
                (p, last)
            }
        };
        parts.retain(|p| !p.is_empty());
        let mut table = &mut root;
        for p in parts {
            table = table
                .entry(p)
                .or_insert_with(|| Value::Table(Table::new()))
                .as_table_mut()
                .expect("section is a table");
        }
        match value {
            Some(v) => {
                let parsed: Table = format!("x = {v}").parse().expect("override parses");
                table.insert(last.into(), parsed["x"].clone());
            }
            None => {
                table.remove(last);
            }
        }
    }
    root.to_string()
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub out: PathBuf,
    _dir: TempDir,
}

impl Run {
    pub fn read(&self, name: &str) -> Result<String, String> {
        fs::read_to_string(self.out.join(name)).map_err(|e| format!("{name}: {e}"))
    }

    pub fn expect_code(&self, code: i32) -> Check {
        if self.code == code {
            Ok(())
        } else {
            Err(format!(
                "exit {} (expected {code})\nstdout: {}\nstderr: {}",
                self.code, self.stdout, self.stderr
            ))
        }
    }
}

/// Runs `skt <command> --config <text> --out-dir <tmp>/out [extra..]`.
pub fn skt(command: &str, config_text: &str, extra: &[&str]) -> Run {
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, config_text).expect("write config");
    let out = dir.path().join("out");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_skt"));
    cmd.arg(command).arg("--config").arg(&cfg);
    if !extra.contains(&"--out-dir") {
        cmd.arg("--out-dir").arg(&out);
    }
    let o = cmd.args(extra).output().expect("spawn skt");
    Run {
        code: o.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
        out,
        _dir: dir,
    }
}

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Rows of a CSV file as string fields, header excluded.
pub fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Column `name` of a CSV file parsed as floats.
pub fn column(text: &str, name: &str) -> Result<Vec<f64>, String> {
    let header: Vec<&str> = text.lines().next().unwrap_or("").split(',').collect();
    let k = header
        .iter()
        .position(|h| *h == name)
        .ok_or(format!("no column {name}"))?;
    rows(text)
        .iter()
        .map(|r| r[k].parse::<f64>().map_err(|e| format!("{name}: {e}")))
        .collect()
}

fn report_line<'a>(report: &'a str, label: &str) -> Result<&'a str, String> {
    report
        .lines()
        .find(|l| l.split_whitespace().next() == Some(label))
        .ok_or(format!("report has no {label} line"))
}

pub fn check_symmetric_passes() -> Check {
    let r = skt("check", &config(&[]), &[]);
    r.expect_code(0)?;
    let rep = r.read("check_report.txt")?;
    r.read("check_report.csv")?;
    ensure(rep.contains("required hypotheses: satisfied"), || {
        rep.clone()
    })
}

pub fn check_degenerate_self_diffusion_fails() -> Check {
    let r = skt(
        "check",
        &config(&[("model.a", Some("[[0.0, 0.5], [0.5, 1.0]]"))]),
        &[],
    );
    r.expect_code(2)?;
    let rep = r.read("check_report.txt")?;
    let h4 = report_line(&rep, "H4")?;
    ensure(h4.contains("fail"), || {
        format!("H4 line does not flag a failure: {h4}")
    })
}

pub fn check_missing_key_names_it() -> Check {
    let r = skt("check", &config(&[("grid.cells", None)]), &[]);
    r.expect_code(1)?;
    ensure(r.stderr.contains("grid.cells"), || {
        format!("stderr does not name the key: {}", r.stderr)
    })
}

pub fn simulate_zero_horizon_single_snapshot() -> Check {
    let r = skt("simulate", &config(&[("time.horizon", Some("0.0"))]), &[]);
    r.expect_code(0)?;
    let t = column(&r.read("trajectory.csv")?, "t")?;
    ensure(t.len() == 32 && t.iter().all(|&x| x == 0.0), || {
        format!("{} rows", t.len())
    })?;
    let e = rows(&r.read("entropy.csv")?);
    ensure(e.len() == 1, || format!("{} entropy rows", e.len()))
}

pub fn simulate_entropy_non_increasing() -> Check {
    let cfg = config(&[("grid.cells", Some("[64]")), ("time.horizon", Some("0.1"))]);
    let r = skt("simulate", &cfg, &[]);
    r.expect_code(0)?;
    r.read("trajectory.csv")?;
    r.read("simulate_summary.txt")?;
    let h = column(&r.read("entropy.csv")?, "entropy")?;
    ensure(h.len() == 21, || format!("{} entropy rows", h.len()))?;
    let tol = 1e-10;
    for w in h.windows(2) {
        ensure(w[1] <= w[0] + 10.0 * tol * (1.0 + w[0].abs()), || {
            format!("{} > {}", w[1], w[0])
        })?;
    }
    ensure(h[h.len() - 1] < h[0], || "entropy did not decrease".into())
}

pub fn simulate_unwritable_output_fails() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let blocker = dir.path().join("plain_file");
    fs::write(&blocker, "x").map_err(|e| e.to_string())?;
    let target = blocker.join("out");
    let r = skt(
        "simulate",
        &config(&[]),
        &["--out-dir", target.to_str().unwrap()],
    );
    r.expect_code(1)
}

pub fn simulate_solver_failure_keeps_partial_output() -> Check {
    let cfg = config(&[
        ("time.newton_iters", Some("1")),
        ("time.newton_halvings", Some("0")),
    ]);
    let r = skt("simulate", &cfg, &[]);
    r.expect_code(3)?;
    let t = column(&r.read("trajectory.csv")?, "t")?;
    ensure(!t.is_empty(), || "no partial trajectory".into())
}

pub fn probe_identical_data_passes() -> Check {
    let r = skt("probe", &config(&[]), &[]);
    r.expect_code(0)?;
    let s = rows(&r.read("probe_scalars.csv")?);
    let tol: f64 = s[0][2].parse().map_err(|e| format!("{e}"))?;
    let h = column(&r.read("probe_series.csv")?, "H_KL")?;
    ensure(h[0] == 0.0, || format!("initial H_KL {}", h[0]))?;
    ensure(h.iter().all(|&x| x <= tol), || {
        format!("series exceeds tolerance {tol}: {h:?}")
    })
}

pub fn probe_zero_tolerance_unmet() -> Check {
    let r = skt("probe", &config(&[("probe.tolerance", Some("0.0"))]), &[]);
    r.expect_code(4)?;
    r.read("probe_summary.txt")?;
    let s = rows(&r.read("probe_scalars.csv")?);
    ensure(s[0][6] == "false", || {
        format!("criterion column {}", s[0][6])
    })
}

pub fn probe_flags_mass_growth_hypothesis() -> Check {
    let cfg = config(&[
        ("model.lambda", Some("[0.5, 0.2]")),
        ("model.reaction.kind", Some("\"linear_relaxation\"")),
    ]);
    let r = skt("probe", &cfg, &[]);
    ensure(r.code == 0 || r.code == 4, || {
        format!("probe did not run: exit {}\n{}", r.code, r.stderr)
    })?;
    r.read("probe_series.csv")?;
    let rep = r.read("probe_hypotheses.txt")?;
    let line = report_line(&rep, "H2.iii")?;
    ensure(line.contains("fail"), || {
        format!("H2.iii not flagged: {line}")
    })
}

pub fn audit_equilibrium_terms_vanish() -> Check {
    let cfg = config(&[
        ("model.lambda", Some("[0.5, -0.3]")),
        ("model.reaction.kind", Some("\"linear_relaxation\"")),
        (
            "initial.mean",
            Some(&format!("[{:e}, {:e}]", (-0.5f64).exp(), 0.3f64.exp())),
        ),
        ("initial.amplitude", Some("[0.0, 0.0]")),
        ("cutoff.l", Some("1.0")),
        ("cutoff.m", Some("2.0")),
    ]);
    let r = skt("audit", &cfg, &[]);
    r.expect_code(0)?;
    let terms = r.read("audit_terms.csv")?;
    for row in rows(&terms) {
        let v: f64 = row[1].parse().map_err(|e| format!("{e}"))?;
        ensure(v.abs() <= 1e-12, || format!("{} = {v}", row[0]))?;
    }
    Ok(())
}

pub fn audit_ladder_order_at_least_one() -> Check {
    let cfg = config(&[("audit.refinements", Some("[1, 2, 4]"))]);
    let r = skt("audit", &cfg, &[]);
    r.expect_code(0)?;
    let orders: Vec<f64> = rows(&r.read("audit_ladder.csv")?)
        .iter()
        .filter(|row| !row[4].is_empty())
        .map(|row| row[4].parse().unwrap_or(f64::NAN))
        .collect();
    ensure(
        orders.len() == 2 && orders.iter().all(|&o| o >= 1.0),
        || format!("orders {orders:?}"),
    )
}

pub fn audit_window_past_horizon_fails() -> Check {
    let r = skt(
        "audit",
        &config(&[("audit.window", Some("[0.0, 1.0]"))]),
        &[],
    );
    r.expect_code(1)?;
    ensure(r.stderr.contains("audit.window"), || r.stderr.clone())
}

pub fn sweep_single_point_matches_probe() -> Check {
    let s = skt(
        "sweep",
        &config(&[("sweep.\"cutoff.k\"", Some("[3]"))]),
        &[],
    );
    s.expect_code(0)?;
    let p = skt("probe", &config(&[]), &[]);
    p.expect_code(0)?;
    let sweep = rows(&s.read("sweep.csv")?);
    let probe = rows(&p.read("probe_scalars.csv")?);
    ensure(sweep.len() == 1 && sweep[0][1] == "ok", || {
        format!("{sweep:?}")
    })?;
    ensure(sweep[0][2..9] == probe[0][..], || {
        format!("{:?} vs {:?}", sweep[0], probe[0])
    })
}

pub fn sweep_grid_is_lexicographic() -> Check {
    let cfg = config(&[
        ("sweep.\"cutoff.k\"", Some("[10, 3]")),
        ("sweep.\"cutoff.l\"", Some("[5.0, 1.0]")),
    ]);
    let r = skt("sweep", &cfg, &[]);
    r.expect_code(0)?;
    let text = r.read("sweep.csv")?;
    ensure(text.starts_with("cutoff.k,cutoff.l,status,"), || {
        text.clone()
    })?;
    let keys: Vec<(String, String)> = rows(&text)
        .iter()
        .map(|row| (row[0].clone(), row[1].clone()))
        .collect();
    let expected = [("3", "1.0"), ("3", "5.0"), ("10", "1.0"), ("10", "5.0")];
    ensure(
        keys.len() == 4
            && keys
                .iter()
                .zip(expected)
                .all(|(a, b)| a.0 == b.0 && a.1 == b.1),
        || format!("{keys:?}"),
    )
}

pub fn sweep_flags_failing_point() -> Check {
    let cfg = config(&[
        ("time.newton_halvings", Some("0")),
        ("sweep.\"time.newton_iters\"", Some("[1, 25]")),
    ]);
    let r = skt("sweep", &cfg, &[]);
    r.expect_code(0)?;
    let rs = rows(&r.read("sweep.csv")?);
    ensure(rs.len() == 2, || format!("{rs:?}"))?;
    ensure(rs[0][0] == "1" && rs[0][1] == "solver_failure", || {
        format!("{:?}", rs[0])
    })?;
    ensure(rs[1][0] == "25" && rs[1][1] == "ok", || {
        format!("{:?}", rs[1])
    })
}

pub fn sweep_all_failing_exits_solver() -> Check {
    let cfg = config(&[
        ("time.newton_halvings", Some("0")),
        ("sweep.\"time.newton_iters\"", Some("[1]")),
    ]);
    skt("sweep", &cfg, &[]).expect_code(3)
}

/// Identical config and seed give byte-identical CSVs.
pub fn reruns_are_byte_identical() -> Check {
    for cmd in ["check", "simulate", "probe", "audit"] {
        let cfg = config(&[("audit.refinements", Some("[1, 2]"))]);
        let a = skt(cmd, &cfg, &["--seed", "11"]);
        let b = skt(cmd, &cfg, &["--seed", "11"]);
        a.expect_code(0)?;
        b.expect_code(0)?;
        let mut names: Vec<PathBuf> = fs::read_dir(&a.out)
            .map_err(|e| e.to_string())?
            .map(|e| e.map(|e| e.path()).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        names.sort();
        for p in names {
            let name = p.file_name().unwrap().to_str().unwrap().to_string();
            ensure(a.read(&name)? == b.read(&name)?, || {
                format!("{cmd}: {name} differs")
            })?;
        }
    }
    Ok(())
}

/// Every scripted scenario with its name, grouped by subcommand.
pub fn scenarios() -> Vec<Scenario> {
    vec![
        (
            "check: symmetric config",
            check_symmetric_passes as fn() -> Check,
        ),
        ("check: a_11 = 0", check_degenerate_self_diffusion_fails),
        ("check: missing grid.cells", check_missing_key_names_it),
        (
            "simulate: zero horizon",
            simulate_zero_horizon_single_snapshot,
        ),
        (
            "simulate: entropy non-increasing",
            simulate_entropy_non_increasing,
        ),
        (
            "simulate: unwritable output",
            simulate_unwritable_output_fails,
        ),
        (
            "simulate: solver failure",
            simulate_solver_failure_keeps_partial_output,
        ),
        ("probe: identical data", probe_identical_data_passes),
        ("probe: zero tolerance", probe_zero_tolerance_unmet),
        (
            "probe: mass-growth hypothesis",
            probe_flags_mass_growth_hypothesis,
        ),
        ("audit: equilibrium", audit_equilibrium_terms_vanish),
        ("audit: refinement ladder", audit_ladder_order_at_least_one),
        (
            "audit: window past horizon",
            audit_window_past_horizon_fails,
        ),
        ("sweep: single point", sweep_single_point_matches_probe),
        ("sweep: 2x2 grid", sweep_grid_is_lexicographic),
        ("sweep: failing point", sweep_flags_failing_point),
        ("sweep: all points failing", sweep_all_failing_exits_solver),
        ("reruns byte-identical", reruns_are_byte_identical),
    ]
}

fn floats<R: Rng>(rng: &mut R, len: usize, lo: f64, hi: f64) -> String {
    let xs: Vec<String> = (0..len)
        .map(|_| format!("{:?}", rng.gen_range(lo..hi)))
        .collect();
    format!("[{}]", xs.join(", "))
}

/// A random valid config covering every section and reaction kind.
pub fn random_config<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..=4);
    let d = rng.gen_range(1..=2);
    let a: Vec<String> = (0..n).map(|_| floats(rng, n, 0.0, 3.0)).collect();
    let reaction = match rng.gen_range(0..3) {
        0 => "kind = \"zero\"".to_string(),
        1 => "kind = \"linear_relaxation\"".to_string(),
        _ => {
            let g: Vec<String> = (0..n).map(|_| floats(rng, n, 0.0, 2.0)).collect();
            format!(
                "kind = \"logistic\"\nbeta = {}\ngamma = [{}]",
                floats(rng, n, 0.1, 2.0),
                g.join(", ")
            )
        }
    };
    let cells: Vec<String> = (0..d).map(|_| rng.gen_range(2..200).to_string()).collect();
    let horizon: f64 = rng.gen_range(0.0..2.0);
    let w0: f64 = rng.gen_range(0.0..horizon.max(1e-3));
    let profile = if rng.gen_bool(0.5) {
        "bump"
    } else {
        "smoothstep"
    };
    let l: f64 = rng.gen_range(0.5..100.0);
    let mode = if rng.gen_bool(0.5) {
        "manufactured"
    } else {
        "fine_proxy"
    };
    let tolerance = if rng.gen_bool(0.5) {
        format!("tolerance = {:?}\n", rng.gen_range(0.0..1.0))
    } else {
        String::new()
    };
    let window = if rng.gen_bool(0.5) {
        format!("window = [{:?}, {:?}]\n", w0.min(horizon), horizon)
    } else {
        String::new()
    };
    let mean: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
    let amp: Vec<String> = mean
        .iter()
        .map(|m| format!("{:?}", m * rng.gen_range(-0.9..0.9)))
        .collect();
    let mean: Vec<String> = mean.iter().map(|m| format!("{m:?}")).collect();
    let b: Vec<String> = (0..n).map(|_| floats(rng, d, -1.0, 1.0)).collect();
    let dir = if rng.gen_bool(0.5) {
        "dir = \"runs/out\"\n"
    } else {
        ""
    };
    let sweep = if rng.gen_bool(0.5) {
        format!("[sweep]\n\"cutoff.k\" = [3, {}]\n\"cutoff.profile\" = [\"bump\"]\n\"time.dt\" = [0.01, 0.02]\n", rng.gen_range(4..50))
    } else {
        String::new()
    };
    format!(
        "seed = {seed}\n\n[model]\nn = {n}\nd = {d}\na0 = {a0}\na = [{a}]\npi = {pi}\nlambda = {lambda}\nb = [{b}]\n\n\
         [model.reaction]\n{reaction}\n\n[grid]\nextents = {ext}\ncells = [{cells}]\n\n\
         [time]\nhorizon = {horizon:?}\ndt = {dt:?}\nnewton_tol = {tol:?}\nnewton_iters = {iters}\nnewton_halvings = {halv}\n\n\
         [cutoff]\nk = {k}\nl = {l:?}\nm = {m:?}\neps = {eps:?}\nprofile = \"{profile}\"\n\n\
         [initial]\nmean = [{mean}]\namplitude = [{amp}]\n\n\
         [probe]\nmode = \"{mode}\"\nrefinement = {refinement}\nperturbation = {pert:?}\n{tolerance}\n\
         [audit]\n{window}refinements = [1, 2, 4]\n\n\
         [sampling]\ncount = {count}\nlo = {lo:?}\nhi = {hi:?}\nbox_radius = {radius:?}\nm0_max = {m0}\n\n\
         [output]\n{dir}cadence = {cadence}\n\n{sweep}",
        seed = rng.gen_range(0..i64::MAX as u64),
        a0 = floats(rng, n, 0.0, 3.0),
        a = a.join(", "),
        pi = floats(rng, n, 0.1, 4.0),
        lambda = floats(rng, n, -2.0, 2.0),
        b = b.join(", "),
        ext = floats(rng, d, 0.1, 10.0),
        cells = cells.join(", "),
        dt = rng.gen_range(1e-4..0.1),
        tol = 10f64.powf(rng.gen_range(-14.0..-6.0)),
        iters = rng.gen_range(1..60),
        halv = rng.gen_range(0..12),
        k = rng.gen_range(3..200),
        m = l * rng.gen_range(1.01..10.0),
        eps = rng.gen_range(0.001..0.499),
        mean = mean.join(", "),
        amp = amp.join(", "),
        refinement = rng.gen_range(1..5),
        pert = rng.gen_range(0.0..0.5),
        count = rng.gen_range(1..10_000),
        lo = rng.gen_range(1e-6..1e-2),
        hi = rng.gen_range(10.0..1e6),
        radius = rng.gen_range(1.0..100.0),
        m0 = rng.gen_range(1..1000),
        cadence = rng.gen_range(1..20),
    )
}

/// `parse(render(c)) == c` for `count` random configs and every shipped
/// example config. Returns the number of configs checked.
pub fn round_trip(count: usize, seed: u64, shipped: &Path) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut texts: Vec<(String, String)> = (0..count)
        .map(|k| (format!("random #{k}"), random_config(&mut rng)))
        .collect();
    let mut entries: Vec<PathBuf> = fs::read_dir(shipped)
        .map_err(|e| format!("{}: {e}", shipped.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    entries.sort();
    for p in entries {
        texts.push((
            p.display().to_string(),
            fs::read_to_string(&p).map_err(|e| e.to_string())?,
        ));
    }
    for (name, text) in &texts {
        let c =
            RunConfig::parse(text).map_err(|e| format!("{name} does not parse: {e}\n{text}"))?;
        let rendered = c.render();
        let back = RunConfig::parse(&rendered)
            .map_err(|e| format!("{name} render does not parse: {e}"))?;
        ensure(back == c, || {
            format!("{name} changed in the round trip:\n{text}\n---\n{rendered}")
        })?;
        ensure(back.render() == rendered, || {
            format!("{name} renders unstably")
        })?;
    }
    Ok(texts.len())
}

pub fn shipped_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}
