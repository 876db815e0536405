use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use freqsplit::scenario::ScenarioKind;
use freqsplit::table::Table;

fn freqsplit(args: &[&str], threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqsplit"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn every_scenario_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ScenarioKind::ALL {
        let out_dir = dir.path().join(kind.name());
        let out = freqsplit(
            &[
                kind.name(),
                "--seed",
                "11",
                "--out",
                out_dir.to_str().unwrap(),
                "--points",
                "5",
            ],
            2,
        );
        assert_eq!(code(&out), 0, "{kind}: {}", stderr(&out));
        for file in [
            "results.csv",
            "summary.csv",
            "plot.svg",
            "config.toml",
            "manifest.json",
        ] {
            assert!(out_dir.join(file).is_file(), "{kind}: missing {file}");
        }
        let results = Table::read(&out_dir.join("results.csv")).unwrap();
        assert_eq!(results.len(), 5, "{kind}");
        let manifest: serde_json::Value =
            serde_json::from_str(&read(&out_dir.join("manifest.json"))).unwrap();
        assert_eq!(manifest["scenario"], kind.name());
        assert_eq!(manifest["seed"], 11);
        assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
        assert!(manifest["config"]["saturation"].is_number());
    }
}

#[test]
fn no_plot_flag_skips_the_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = freqsplit(
        &["fringe", "--out", dir.path().to_str().unwrap(), "--no-plot"],
        1,
    );
    assert_eq!(code(&out), 0);
    assert!(!dir.path().join("plot.svg").exists());
}

#[test]
fn output_is_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let kinds = ["fringe", "visibility-vs-power", "visibility-vs-alpha"];
    for kind in kinds {
        let mut tables = Vec::new();
        for (i, threads) in [1, 4, 4].into_iter().enumerate() {
            let out_dir = dir.path().join(format!("{kind}-{i}"));
            let out = freqsplit(
                &[
                    kind,
                    "--seed",
                    "42",
                    "--out",
                    out_dir.to_str().unwrap(),
                    "--points",
                    "6",
                ],
                threads,
            );
            assert_eq!(code(&out), 0, "{}", stderr(&out));
            tables.push((
                read(&out_dir.join("results.csv")),
                read(&out_dir.join("summary.csv")),
            ));
        }
        assert_eq!(tables[0], tables[1], "{kind}: 1 vs 4 threads");
        assert_eq!(tables[1], tables[2], "{kind}: repeated run");
    }
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("user.toml");
    fs::write(&cfg, "pump_power_mw = 300.0\nalpha2 = 0.05\n").unwrap();
    let first = dir.path().join("first");
    let out = freqsplit(
        &[
            "fringe",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "3",
            "--out",
            first.to_str().unwrap(),
            "--duration-s",
            "2",
        ],
        3,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let second = dir.path().join("second");
    let resolved = first.join("config.toml");
    let out = freqsplit(
        &[
            "fringe",
            "--config",
            resolved.to_str().unwrap(),
            "--seed",
            "3",
            "--out",
            second.to_str().unwrap(),
        ],
        1,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        read(&first.join("results.csv")),
        read(&second.join("results.csv"))
    );
    assert_eq!(
        read(&first.join("config.toml")),
        read(&second.join("config.toml"))
    );
}

#[test]
fn emitted_counts_reingest_into_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve");
    let out = freqsplit(
        &[
            "conversion-curve",
            "--seed",
            "9",
            "--out",
            curve.to_str().unwrap(),
        ],
        2,
    );
    assert_eq!(code(&out), 0);
    let results = curve.join("results.csv");
    let table = Table::read(&results).unwrap();
    assert_eq!(Table::parse(&table.to_csv()).unwrap(), table);

    let ingested = dir.path().join("ingested");
    let out = freqsplit(
        &[
            "fit",
            "--input",
            results.to_str().unwrap(),
            "--out",
            ingested.to_str().unwrap(),
        ],
        2,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // Same seed and grid without input draws the same counts.
    let synthetic = dir.path().join("synthetic");
    let out = freqsplit(
        &["fit", "--seed", "9", "--out", synthetic.to_str().unwrap()],
        2,
    );
    assert_eq!(code(&out), 0);
    assert_eq!(
        read(&ingested.join("summary.csv")),
        read(&synthetic.join("summary.csv"))
    );
    assert_eq!(
        read(&ingested.join("results.csv")),
        read(&synthetic.join("results.csv"))
    );
}

#[test]
fn unknown_scenario_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");
    let out = freqsplit(&["fringes", "--out", out_dir.to_str().unwrap()], 1);
    assert_eq!(code(&out), 2);
    assert!(!out_dir.exists());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("unknown.toml", "pump_power = 3.0\n"),
        ("malformed.toml", "alpha2 = \n"),
        ("typed.toml", "fringe_points = \"many\"\n"),
        ("range.toml", "saturation = 1.5\n"),
    ] {
        let cfg = dir.path().join(name);
        fs::write(&cfg, text).unwrap();
        let out = freqsplit(
            &[
                "fringe",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                dir.path().join("o").to_str().unwrap(),
            ],
            1,
        );
        assert_eq!(code(&out), 2, "{name}: {}", stderr(&out));
    }
    let out = freqsplit(
        &[
            "fringe",
            "--out",
            dir.path().to_str().unwrap(),
            "--duration-s",
            "0",
        ],
        1,
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn schema_errors_report_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("counts.csv");
    fs::write(
        &input,
        "pump_power_mw,visible_counts,telecom_counts\nmW,counts,counts\n0,3000,0\n100,-5,800\n",
    )
    .unwrap();
    let out = freqsplit(
        &[
            "fit",
            "--input",
            input.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        1,
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));

    fs::write(&input, "").unwrap();
    let out = freqsplit(
        &[
            "fit",
            "--input",
            input.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        1,
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn domain_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("counts.csv");
    // No zero-pump row to normalise against.
    fs::write(
        &input,
        "pump_power_mw,visible_counts,telecom_counts\nmW,counts,counts\n100,2000,900\n200,1500,1300\n300,900,1800\n",
    )
    .unwrap();
    let out = freqsplit(
        &[
            "fit",
            "--input",
            input.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        1,
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn io_errors_exit_with_5() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = freqsplit(
        &[
            "fit",
            "--input",
            missing.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        1,
    );
    assert_eq!(code(&out), 5);

    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let out = freqsplit(&["fringe", "--out", file.join("sub").to_str().unwrap()], 1);
    assert_eq!(code(&out), 5);

    let out = freqsplit(
        &[
            "fringe",
            "--config",
            missing.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        1,
    );
    assert_eq!(code(&out), 5);
}

#[test]
fn fit_non_convergence_exits_with_4_after_writing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("counts.csv");
    // Flat except for a small drop at the last point: the optimum runs off
    // along the saturation bound and the step never settles.
    let mut text = String::from("pump_power_mw,visible_counts,telecom_counts\nmW,counts,counts\n");
    for k in 0..10 {
        let visible = if k < 9 { 3000 } else { 2700 };
        text.push_str(&format!(
            "{},{visible},{}\n",
            70 * k,
            if k < 9 { 0 } else { 450 }
        ));
    }
    fs::write(&input, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = freqsplit(
        &[
            "fit",
            "--input",
            input.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ],
        1,
    );
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let summary = read(&out_dir.join("summary.csv"));
    assert!(summary.contains("fit_converged,1,0,"), "{summary}");
    assert!(out_dir.join("manifest.json").is_file());
}
