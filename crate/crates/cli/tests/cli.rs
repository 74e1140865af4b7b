use std::path::Path;
use std::process::Command;

use qtmtt::dataset::{read_dataset, Manifest};

fn qtmtt(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qtmtt")).args(args).output().unwrap();
    (
        out.status.success(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write_corpus(dir: &Path, seed: u64, count: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, f) in qtmtt::synth::corpus(seed, count, 128, 64).unwrap().iter().enumerate() {
        f.write_pgm(dir.join(format!("f{i}.pgm"))).unwrap();
    }
}

#[test]
fn train_and_evaluate_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    write_corpus(&tmp.path().join("train"), 1, 2);
    write_corpus(&tmp.path().join("eval"), 50, 1);

    let (ok, _, err) = qtmtt(&["dataset", "--images", &p("train"), "--out", &p("d.qtmt"), "--qps", "22,37"]);
    assert!(ok, "{err}");
    assert_eq!(read_dataset(p("d.qtmt")).unwrap().len(), 2 * 2 * 2);
    assert_eq!(Manifest::read(p("d.qtmt.manifest")).unwrap().entries.len(), 2);

    std::fs::write(p("cnn.cfg"), "epochs = 1\nbatch_size = 4\nconv_width = 2\ndeep_width = 2\n").unwrap();
    let (ok, _, err) = qtmtt(&["train-cnn", &p("d.qtmt"), "--out", &p("w.qtnn"), "--config", &p("cnn.cfg")]);
    assert!(ok, "{err}");
    let (ok, _, err) = qtmtt(&["train-dt", &p("d.qtmt"), "--weights", &p("w.qtnn"), "--out", &p("b.qtdt"), "--rounds", "3"]);
    assert!(ok, "{err}");

    let (ok, csv, err) = qtmtt(&[
        "encode", &p("eval/f0.pgm"), "--qps", "32", "--mode", "pruned", "--weights", &p("w.qtnn"), "--bank", &p("b.qtdt"),
        "--topn", "6:2,5:2,4:2,3:2,2:2",
    ]);
    assert!(ok, "{err}");
    assert_eq!(csv.lines().count(), 2);

    let (ok, out, err) = qtmtt(&[
        "sweep", "--images", &p("eval"), "--weights", &p("w.qtnn"), "--bank", &p("b.qtdt"), "--train-dataset",
        &p("d.qtmt"), "--gnuplot", &p("s.dat"),
    ]);
    assert!(ok, "{err}");
    assert!(out.starts_with("config_id,delta_nodes,delta_et,bd_rate\nC1,"));
    assert_eq!(std::fs::read_to_string(p("s.dat")).unwrap().lines().count(), 5);

    // evaluating on the training images is refused
    let (ok, _, err) = qtmtt(&[
        "eval", "--images", &p("train"), "--weights", &p("w.qtnn"), "--bank", &p("b.qtdt"), "--train-dataset", &p("d.qtmt"),
    ]);
    assert!(!ok);
    assert!(err.contains("overlaps"), "{err}");
}

#[test]
fn rejects_bad_arguments() {
    let (ok, _, err) = qtmtt(&["encode", "missing.pgm", "--topn", "6:9"]);
    assert!(!ok);
    assert!(err.contains("6:9") || err.contains("N"), "{err}");
    let (ok, _, _) = qtmtt(&["train-dt", "d.qtmt", "--out", "b.qtdt"]);
    assert!(!ok);
}

#[test]
fn dump_tree_prints_one_node_per_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("flat.pgm");
    qtmtt::codec::Frame::filled(64, 64, 90).unwrap().write_pgm(&path).unwrap();
    let (ok, out, err) = qtmtt(&["encode", path.to_str().unwrap(), "--qps", "27", "--dump-tree"]);
    assert!(ok, "{err}");
    assert!(out.contains("\n0,0,64x64 NS\n"), "{out}");
}

#[test]
fn mtt_depth_cap_limits_the_dumped_trees() {
    let tmp = tempfile::tempdir().unwrap();
    write_corpus(tmp.path(), 2, 1);
    let img = tmp.path().join("f0.pgm");
    let dump = |extra: &[&str]| {
        let mut args = vec!["encode", img.to_str().unwrap(), "--qps", "22", "--dump-tree"];
        args.extend_from_slice(extra);
        let (ok, out, err) = qtmtt(&args);
        assert!(ok, "{err}");
        out.lines().filter(|l| l.contains("BT") || l.contains("TT")).count()
    };
    assert_eq!(dump(&["--max-mtt-depth", "0"]), 0);
    assert!(dump(&[]) > 0);
}
