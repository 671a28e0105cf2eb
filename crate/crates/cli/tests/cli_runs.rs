use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rnng(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnng"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn toy(name: &str) -> String {
    format!("{}/../core/data/toy/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_small(dir: &Path) -> PathBuf {
    let out = dir.join("train");
    let o = rnng(&[
        "train-rnng",
        "--train",
        &toy("train.trees"),
        "--dev",
        &toy("dev.trees"),
        "--out",
        s(&out),
        "--epochs",
        "3",
        "--log-level",
        "warn",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("model.json")
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(rnng(&["frobnicate"]).status.code(), Some(2));
    let o = rnng(&["parse", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model"));
    let o = rnng(&["train-rnng", "--train", "x", "--out", s(&out), "--set", "nonsense=1", "--set", "lr=fast"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("nonsense") && e.contains("lr"), "{e}");
    let o = rnng(&["regress", "--epochs", "x", "--target", "t", "--out", s(&out), "--n-perm", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(rnng(&["grad-check", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = rnng(&["parse", "--model", "/no/such/model.json", "--gold", &toy("test.trees"), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/model.json"));
    let o = rnng(&["report", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("summary.tsv"));
}

#[test]
fn config_files_include_and_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("base.cfg"), "# shared\nepochs = 7\nlr = 0.002\nhidden = 12\n").unwrap();
    fs::write(dir.path().join("run.cfg"), "include = base.cfg\nepochs = 2\nembed = 8\n").unwrap();
    let out = dir.path().join("o");
    let o = rnng(&[
        "train-rnng",
        "--config",
        s(&dir.path().join("run.cfg")),
        "--train",
        &toy("dev.trees"),
        "--out",
        s(&out),
        "--set",
        "epochs=1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.starts_with(&format!("# rnng {} train-rnng", env!("CARGO_PKG_VERSION"))));
    for line in ["epochs = 1", "lr = 0.002", "hidden = 12", "embed = 8", "mlp = 32"] {
        assert!(resolved.lines().any(|l| l == line), "{line} missing from\n{resolved}");
    }
    assert_eq!(fs::read_to_string(out.join("loss.tsv")).unwrap().lines().count(), 3);

    // The resolved file reproduces the run.
    let again = dir.path().join("again");
    let o = rnng(&["train-rnng", "--config", s(&out.join("config.resolved")), "--out", s(&again)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(out.join("loss.tsv")).unwrap(),
        fs::read_to_string(again.join("loss.tsv")).unwrap()
    );

    fs::write(dir.path().join("a.cfg"), "include = b.cfg\n").unwrap();
    fs::write(dir.path().join("b.cfg"), "include = a.cfg\n").unwrap();
    let o = rnng(&["train-rnng", "--config", s(&dir.path().join("a.cfg")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cycl"), "{}", stderr(&o));
}

#[test]
fn train_parse_score_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_small(dir.path());
    let loss = fs::read_to_string(model.with_file_name("loss.tsv")).unwrap();
    assert_eq!(loss.lines().count(), 5);

    let parse = |out: &Path, threads: &str| {
        let o = rnng(&[
            "parse",
            "--model",
            s(&model),
            "--gold",
            &toy("test.trees"),
            "--out",
            s(out),
            "--k",
            "20",
            "--emit-metrics",
            "--emit-trees",
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    };
    let (p1, p4) = (dir.path().join("p1"), dir.path().join("p4"));
    parse(&p1, "1");
    parse(&p4, "4");
    let metrics = fs::read_to_string(p1.join("metrics.tsv")).unwrap();
    assert_eq!(metrics, fs::read_to_string(p4.join("metrics.tsv")).unwrap());
    let words: usize = fs::read_to_string(toy("test.txt"))
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().count())
        .sum();
    assert_eq!(metrics.lines().count(), words + 1);
    assert_eq!(fs::read_to_string(p1.join("trees.txt")).unwrap().lines().count(), 50);

    let summary = fs::read_to_string(p1.join("summary.tsv")).unwrap();
    let f1_line = summary.lines().find(|l| l.starts_with("f1\t")).unwrap();
    let o = rnng(&["score-f1", "--gold", &toy("test.trees"), "--pred", s(&p1.join("trees.txt"))]);
    assert!(o.status.success());
    let printed = String::from_utf8(o.stdout).unwrap();
    assert!(printed.lines().any(|l| l == f1_line), "{printed}");

    let o = rnng(&["parse", "--model", s(&model), "--gold", &toy("test.trees"), "--out", s(&p1), "--variant", "no-comp"]);
    assert_eq!(o.status.code(), Some(1));

    let o = rnng(&["report", s(&p1)]);
    assert!(o.status.success());
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("metrics: ") && report.contains("surprisal"), "{report}");
}

#[test]
fn score_f1_counts_missing_parses() {
    let dir = tempfile::tempdir().unwrap();
    let gold = "(S (NP the cat) (VP meows))\n(S (NP a dog) (VP barks))\n";
    fs::write(dir.path().join("gold"), gold).unwrap();
    fs::write(dir.path().join("pred"), "(S (NP the cat) (VP meows))\n\n").unwrap();
    let out = dir.path().join("o");
    let o = rnng(&[
        "score-f1",
        "--gold",
        s(&dir.path().join("gold")),
        "--pred",
        s(&dir.path().join("pred")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.tsv")).unwrap();
    // 3 of 6 gold brackets found, all 3 predicted brackets correct.
    assert!(summary.contains("f1\t66.67"), "{summary}");
    assert!(summary.contains("failures\t1"), "{summary}");
}

#[test]
fn sweep_lm_and_regression_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_small(dir.path());
    let sw = dir.path().join("sweep");
    let o = rnng(&["sweep", "--model", s(&model), "--gold", &toy("dev.trees"), "--out", s(&sw), "--ks", "5,20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(sw.join("sweep.tsv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(sw.join("metrics_k5.tsv").is_file() && sw.join("metrics_k20.tsv").is_file());
    let report = String::from_utf8(rnng(&["report", s(&sw)]).stdout).unwrap();
    assert!(report.contains("k = 5") && report.contains("k = 20"), "{report}");

    let lm = dir.path().join("lm");
    let o = rnng(&["train-lm", "--train", &toy("train.txt"), "--out", s(&lm), "--epochs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ls = dir.path().join("ls");
    let o = rnng(&["lm-surprisal", "--model", s(&lm.join("lm.json")), "--input", &toy("dev.txt"), "--out", s(&ls)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(ls.join("lm_surprisal.tsv")).unwrap().starts_with("sent\tidx\ttoken\tsurprisal\n"));

    let metrics = sw.join("metrics_k20.tsv");
    let sy = dir.path().join("synth");
    let o = rnng(&[
        "synth",
        "--out",
        s(&sy),
        "--metrics",
        s(&metrics),
        "--seed",
        "3",
        "--set",
        "subjects=5",
        "--set",
        "montage=grid16",
        "--set",
        "sample_rate=40",
        "--set",
        "effect_predictor=surprisal",
        "--set",
        "effect_channels=P3,P1,P2,P4",
        "--set",
        "effect_amplitude=0.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rg = dir.path().join("rg");
    let o = rnng(&[
        "regress",
        "--epochs",
        s(&sy.join("epochs")),
        "--metrics",
        s(&metrics),
        "--target",
        "surprisal,distance",
        "--controls",
        "position",
        "--n-perm",
        "100",
        "--roi",
        "N400,custom",
        "--set",
        "roi_channels=F3,F1",
        "--set",
        "roi_tmin=0.1",
        "--set",
        "roi_tmax=0.2",
        "--out",
        s(&rg),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let clusters = fs::read_to_string(rg.join("clusters.tsv")).unwrap();
    let top = clusters.lines().find(|l| l.starts_with("surprisal\t0\t")).unwrap();
    assert!(top.contains("\t+\t") && top.contains("P1"), "{top}");
    let lrt = fs::read_to_string(rg.join("lrt.tsv")).unwrap();
    assert_eq!(lrt.lines().count(), 1 + 2 * 2);
    let n400 = lrt.lines().find(|l| l.starts_with("surprisal\t-\tN400")).unwrap();
    assert!(n400.ends_with("true"), "{n400}");
    let report = String::from_utf8(rnng(&["report", s(&rg)]).stdout).unwrap();
    assert!(report.contains("lrt.tsv"));
}

#[test]
fn grad_check_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = rnng(&["grad-check", "--seeds", "2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("gradcheck.tsv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 2 * 3);
    assert!(table.lines().skip(1).all(|l| l.ends_with("\ttrue")), "{table}");
    let o = rnng(&["grad-check", "--seeds", "1", "--tolerance", "1e-30"]);
    assert_eq!(o.status.code(), Some(1));
}
