use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mnac_cli::format::format_real;
use mnac_cli::table::Table;
use proptest::prelude::*;

fn mnac(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mnac"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("MNAC_THREADS", t),
        None => cmd.env_remove("MNAC_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Output {
    let out = mnac(args, None);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const SMALL_SWEEP: &str = r#"
[network]
ell = 40
k = 3

[channel]
snr_db = [10]

[sweep]
n = [20, 60]

[decoders]
list = ["ncomp", "bp_st", "bp_sht", "bp_aht"]

[criteria]
list = ["exact", "partial:90"]

[run]
trials = 60
seed = 4
"#;

fn rows(path: &Path) -> Vec<Vec<String>> {
    Table::read(path).unwrap().rows
}

#[test]
fn capacity_rows_decrease_with_snr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cap",
        "[network]\nell = 1000\nk = 25\n[channel]\nsnr_db = [0, 2, 4, 6, 8, 10]\n",
    );
    let out = dir.path().join("out");
    run_ok(&[
        "capacity",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let table = Table::read(&out.join("cap_capacity.csv")).unwrap();
    assert_eq!(
        table.header.join(","),
        mnac_cli::report::CAPACITY_HEADER.join(",")
    );
    assert_eq!(table.rows.len(), 6);
    let col = table.column("n_required").unwrap();
    let n: Vec<f64> = (0..6).map(|r| table.real(r, col).unwrap()).collect();
    assert!(n.windows(2).all(|w| w[1] < w[0]), "{n:?}");
    // alpha = 0: the bound column repeats n(l)
    let lb = table.column("lower_bound").unwrap();
    for r in 0..6 {
        assert_eq!(table.rows[r][lb], table.rows[r][col]);
    }
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (name, text) in [
        ("broken", "[network\nell = 3"),
        (
            "nodecoders",
            &SMALL_SWEEP.replace(
                r#"list = ["ncomp", "bp_st", "bp_sht", "bp_aht"]"#,
                "list = []",
            ),
        ),
        ("badfield", &SMALL_SWEEP.replace("k = 3", "k = 3\nkk = 4")),
    ] {
        let cfg = write_config(dir.path(), name, text);
        for cmd in ["capacity", "sweep"] {
            let res = mnac(
                &[
                    cmd,
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                ],
                None,
            );
            assert_eq!(res.status.code(), Some(2), "{name} {cmd}");
            assert!(!String::from_utf8_lossy(&res.stderr).is_empty());
        }
    }
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn missing_config_file_is_io_error() {
    let res = mnac(&["sweep", "--config", "/nonexistent/x.toml"], None);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn sweep_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small", SMALL_SWEEP);
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["sweep", "--config", cfg, "--out", a.to_str().unwrap()]);
    let out = mnac(
        &["sweep", "--config", cfg, "--out", b.to_str().unwrap()],
        Some("2"),
    );
    assert!(out.status.success());
    let first = fs::read(a.join("small.csv")).unwrap();
    assert_eq!(first, fs::read(b.join("small.csv")).unwrap());

    let text = String::from_utf8(first.clone()).unwrap();
    assert!(text.starts_with(
        "ell,k,n,snr_db,q_sp,gamma,decoder,criterion,zeta,trials,successes,success_prob,stderr\n"
    ));
    assert_eq!(text.lines().count(), 1 + 2 * 4 * 2);
    assert!(!text.contains('\r'));

    // drop the second half and resume: the file comes back byte for byte
    let keep: Vec<&str> = text.lines().take(1 + 8).collect();
    fs::write(b.join("small.csv"), keep.join("\n") + "\n").unwrap();
    let res = run_ok(&["sweep", "--config", cfg, "--out", b.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&res.stderr).contains("1 cells simulated"));
    assert_eq!(first, fs::read(b.join("small.csv")).unwrap());

    // a different seed changes the numbers
    let c = dir.path().join("c");
    run_ok(&[
        "sweep",
        "--config",
        cfg,
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert_ne!(first, fs::read(c.join("small.csv")).unwrap());
}

#[test]
fn partial_rows_dominate_exact_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "nest", SMALL_SWEEP);
    let out = dir.path().join("out");
    run_ok(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = rows(&out.join("nest.csv"));
    for pair in rows.chunks(2) {
        assert_eq!(pair[0][7], "exact");
        assert_eq!(pair[1][7], "partial:90");
        let exact: usize = pair[0][10].parse().unwrap();
        let partial: usize = pair[1][10].parse().unwrap();
        assert!(partial >= exact);
    }
}

#[test]
fn infeasible_cells_get_marker_rows_and_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_SWEEP
        .replace("ell = 40\nk = 3", "ell = 200\nk = 5")
        .replace(
            r#"list = ["ncomp", "bp_st", "bp_sht", "bp_aht"]"#,
            r#"list = ["ml", "ncomp"]"#,
        )
        .replace("trials = 60", "trials = 5");
    let cfg = write_config(dir.path(), "inf", &text);
    let out = dir.path().join("out");
    let res = mnac(
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("2535650040"));
    let rows = rows(&out.join("inf.csv"));
    let ml: Vec<_> = rows.iter().filter(|r| r[6] == "ml").collect();
    assert_eq!(ml.len(), 4);
    assert!(ml.iter().all(|r| r[9] == "0" && r[11] == "nan"));
    assert!(rows.iter().filter(|r| r[6] == "ncomp").all(|r| r[9] == "5"));
}

#[test]
fn exhaustive_decoders_run_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_SWEEP
        .replace("ell = 40\nk = 3", "ell = 10\nk = 2")
        .replace("n = [20, 60]", "n = [60]")
        .replace(
            r#"list = ["ncomp", "bp_st", "bp_sht", "bp_aht"]"#,
            r#"list = ["ml", "alg1"]"#,
        );
    let cfg = write_config(dir.path(), "exh", &text);
    let out = dir.path().join("out");
    run_ok(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = rows(&out.join("exh.csv"));
    assert_eq!(
        rows.iter().map(|r| r[6].as_str()).collect::<Vec<_>>(),
        ["ml", "ml", "alg1:1", "alg1:1"]
    );
}

#[test]
fn plot_renders_valid_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    fs::write(
        &csv,
        "ell,k,n,snr_db,q_sp,gamma,decoder,criterion,zeta,trials,successes,success_prob,stderr\n\
         100,5,50,10,0.1,3,bp_st,exact,100,10,7,0.7,0.144913767462\n",
    )
    .unwrap();
    let out = dir.path().join("svg");
    run_ok(&[
        "plot",
        csv.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let svg_path = out.join("one_l100_k5_exact.svg");
    let svg = fs::read_to_string(&svg_path).unwrap();
    let doc = roxmltree::Document::parse(&svg).expect("well-formed XML");
    let polylines: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .collect();
    assert_eq!(polylines.len(), 1);
    assert_eq!(
        polylines[0].attribute("points").unwrap().split(' ').count(),
        1
    );
    assert!(svg.contains("Number of channel-uses, n"));
    assert!(svg.contains("Probability of successful identification"));

    run_ok(&[
        "plot",
        csv.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(svg, fs::read_to_string(&svg_path).unwrap());
}

#[test]
fn plot_names_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(
        &csv,
        "ell,k,n,snr_db,q_sp,gamma,decoder,criterion,zeta,trials,successes,success_prob\n",
    )
    .unwrap();
    let res = mnac(
        &[
            "plot",
            csv.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("`stderr`"));
}

#[test]
fn cost_plot_overlays_theory_and_empirical_curves() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_SWEEP
        .replace("snr_db = [10]", "snr_db = [5, 10]")
        .replace("n = [20, 60]", "n = [20, 60, 120]")
        .replace(
            r#"list = ["ncomp", "bp_st", "bp_sht", "bp_aht"]"#,
            r#"list = ["bp_st"]"#,
        )
        .replace(r#"list = ["exact", "partial:90"]"#, r#"list = ["exact"]"#);
    let cfg = write_config(dir.path(), "fig", &text);
    let cfg = cfg.to_str().unwrap();
    run_ok(&["capacity", "--config", cfg]);
    run_ok(&["sweep", "--config", cfg]);
    run_ok(&["plot", "--config", cfg, "--target-success", "0.5"]);
    let out = dir.path().join("out");
    let svg = fs::read_to_string(out.join("fig_capacity_cost.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(
        doc.descendants()
            .filter(|n| n.has_tag_name("polyline"))
            .count(),
        2
    );
    assert!(out.join("fig_l40_k3_exact.svg").exists());
}

#[test]
fn bad_thread_setting_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t", SMALL_SWEEP);
    let res = mnac(&["sweep", "--config", cfg.to_str().unwrap()], Some("lots"));
    assert_eq!(res.status.code(), Some(2));
}

proptest! {
    #[test]
    fn formatted_reals_round_trip(x in prop::num::f64::NORMAL) {
        let back: f64 = format_real(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs());
    }
}
