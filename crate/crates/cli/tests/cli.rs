use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn decoy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decoy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Data rows of a CSV file, comment and header dropped.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn list_names_every_figure() {
    let o = decoy(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for f in 3..=10 {
        assert!(text.contains(&format!("fig{f}\t")), "fig{f} missing");
    }
}

#[test]
fn symmetric_solves() {
    let o = decoy(&["solve", "--n", "2", "--symmetric"]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 2);
    for row in &r {
        assert!((row[3].parse::<f64>().unwrap() - 2.0).abs() < 1e-9);
    }
    let o = decoy(&["solve", "--n", "3", "--symmetric"]);
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 3);
    for row in &r {
        assert!((row[3].parse::<f64>().unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn verify_reports_gap_within_bound() {
    let o = decoy(&["solve", "--n", "1", "--seed", "7", "--verify"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("within_bound=true"));
}

#[test]
fn channel_file_round_trip() {
    let dir = scratch("channels");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("ch.csv");
    fs::write(&path, "user,channel,h_c,h_j\n0,0,1,1\n0,1,1,1\n0,2,1,1\n0,3,1,1\n").unwrap();
    let o = decoy(&["solve", "--channels", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&stdout(&o));
    assert!((r[0][3].parse::<f64>().unwrap() - 5.0).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    assert_eq!(decoy(&["simulate", "fig99"]).status.code(), Some(2));
    assert_eq!(decoy(&["solve", "--n", "2", "--symmetric", "--set", "bogus=1"]).status.code(), Some(2));
    assert_eq!(decoy(&["solve", "--n", "2"]).status.code(), Some(2));
    assert_eq!(decoy(&["bounds", "--n", "3..1"]).status.code(), Some(2));
    let o = decoy(&["solve", "--n", "2", "--symmetric", "--set", "rho=0.1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bounds_tables() {
    let dir = scratch("bounds");
    let args = ["bounds", "--l", "3..14", "--sweep-n", "1..2", "--sweep-l", "4", "--draws", "30", "--out", dir.to_str().unwrap()];
    assert!(decoy(&args).status.success());
    let fig3 = fs::read_to_string(dir.join("fig3.csv")).unwrap();
    let fig4 = fs::read_to_string(dir.join("fig4.csv")).unwrap();
    let fig5 = fs::read_to_string(dir.join("fig5.csv")).unwrap();
    for f in [&fig3, &fig4, &fig5] {
        assert!(f.starts_with("# config_hash="));
    }
    assert!(fig3.lines().nth(1).unwrap().starts_with("N,L,approach,min_rho_fraction"));

    let row = rows(&fig4)
        .into_iter()
        .find(|r| r[0] == "1" && r[1] == "3" && r[2] == "APP2")
        .unwrap();
    assert!((row[3].parse::<f64>().unwrap() - 0.529).abs() < 0.005);
    // N > L has no approach at all
    assert!(rows(&fig4).iter().any(|r| r[0] == "5" && r[1] == "3" && r[3] == "NA"));

    let peak = rows(&fig3)
        .into_iter()
        .filter(|r| r[3] != "NA" && r[1].parse::<usize>().unwrap() >= 4 && r[2] != "APP1_from1")
        .max_by(|a, b| a[3].parse::<f64>().unwrap().total_cmp(&b[3].parse::<f64>().unwrap()))
        .unwrap();
    assert_eq!((peak[0].as_str(), peak[1].as_str()), ("1", "4"));

    for n in ["1", "2"] {
        let ratios: Vec<f64> = rows(&fig5)
            .iter()
            .filter(|r| r[0] == n)
            .map(|r| r[4].parse().unwrap())
            .collect();
        assert_eq!(ratios.len(), 10);
        assert!(ratios.windows(2).all(|w| w[1] >= w[0]), "{ratios:?}");
    }

    assert!(decoy(&args).status.success());
    assert_eq!(fs::read_to_string(dir.join("fig5.csv")).unwrap(), fig5);
}

#[test]
fn simulate_is_reproducible_and_sorted() {
    let dir = scratch("sim");
    let args = [
        "simulate",
        "fig6",
        "--seeds",
        "3",
        "--jobs",
        "3",
        "--set",
        "pi_iteration=3000",
        "--set",
        "phi_eps=500",
        "--out",
        dir.to_str().unwrap(),
    ];
    let o = decoy(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs = fs::read_to_string(dir.join("fig6_runs.csv")).unwrap();
    let agg = fs::read_to_string(dir.join("fig6_aggregate.csv")).unwrap();
    assert!(dir.join("fig6_trace_N1_L4.csv").exists());
    let r = rows(&runs);
    assert_eq!(r.len(), 15);
    let keys: Vec<(usize, u64)> = r.iter().map(|x| (x[1].parse().unwrap(), x[2].parse().unwrap())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    for x in &r {
        let g: f64 = x[5].parse().unwrap();
        assert!((0.0..=1.0).contains(&g));
    }
    assert!(agg.lines().nth(1).unwrap().starts_with("key,count,mean,median,se"));

    let dir2 = scratch("sim_serial");
    let mut args2 = args;
    args2[5] = "1";
    args2[11] = dir2.to_str().unwrap();
    assert!(decoy(&args2).status.success());
    assert_eq!(fs::read_to_string(dir2.join("fig6_runs.csv")).unwrap(), runs);
    assert_eq!(fs::read_to_string(dir2.join("fig6_aggregate.csv")).unwrap(), agg);

    // a different configuration changes the stamp
    let dir3 = scratch("sim_other");
    let mut args3 = args;
    args3[7] = "pi_iteration=2000";
    args3[11] = dir3.to_str().unwrap();
    assert!(decoy(&args3).status.success());
    let a = runs.lines().next().unwrap().to_string();
    let b = fs::read_to_string(dir3.join("fig6_runs.csv")).unwrap().lines().next().unwrap().to_string();
    assert_ne!(a, b);
}

#[test]
fn config_file_is_read() {
    let dir = scratch("cfgfile");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.cfg");
    fs::write(&path, "# two users\nn_users = 2\nn_channels = 4\n").unwrap();
    let o = decoy(&["solve", "--symmetric", "--config", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(rows(&stdout(&o)).len(), 2);
    // flags win over the file
    let o = decoy(&["solve", "--symmetric", "--n", "3", "--config", path.to_str().unwrap()]);
    assert_eq!(rows(&stdout(&o)).len(), 3);
}
