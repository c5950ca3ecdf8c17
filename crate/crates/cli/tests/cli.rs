use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowembed::datagen::LabelSet;
use flowembed::io::{read_checkpoint, read_dataset, read_embeddings, read_sidecar};

const SMALL: &str = "\
n = 16
conv_layers = 2
channels = 4
embed_dim = 5
hidden = 8
batch_size = 4
epochs = 2
save_interval = 1
lr = 0.001
";

fn run(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("small.cfg");
    if !cfg.exists() {
        std::fs::write(&cfg, SMALL).unwrap();
    }
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flowembed"));
    if !args.contains(&"--config") {
        cmd.args(["--config", cfg.to_str().unwrap()]);
    }
    cmd.args(["--threads", "1"]).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, name: &str, extra: &[(&str, &str)]) -> PathBuf {
    let cfg = dir.join(format!("{name}.cfg"));
    let mut text = SMALL.to_string();
    for (k, v) in extra {
        text.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(&cfg, text).unwrap();
    let out = dir.join(name);
    ok(dir, &["--config", s(&cfg), "--output", s(&out), "generate"]);
    out.join("dataset.p2vd")
}

#[test]
fn generate_linear_stability_counts_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("g.cfg");
    std::fs::write(&cfg, format!("{SMALL}generator = linear-stability\nper_class = 3\n")).unwrap();
    let out = dir.path().join("g");
    let text = ok(dir.path(), &["--config", s(&cfg), "--output", s(&out), "--seed", "5", "generate"]);
    assert!(text.contains("wrote 15 samples"));
    assert_eq!(text.matches(": 3\n").count(), 5);
    let ds = read_dataset(&out.join("dataset.p2vd")).unwrap();
    assert_eq!((ds.len(), ds.seed, ds.label_set), (15, 5, LabelSet::LinearStability));
    let echo = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(echo.contains("seed = 5\n") && echo.contains("lr = 0.001\n") && echo.contains("beta = 0.001\n"));

    let again = dir.path().join("g2");
    ok(dir.path(), &["--config", s(&cfg), "--output", s(&again), "--seed", "5", "generate"]);
    assert_eq!(std::fs::read(out.join("dataset.p2vd")).unwrap(), std::fs::read(again.join("dataset.p2vd")).unwrap());
}

#[test]
fn train_resume_embed_reconstruct_lasso() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = generate(d, "data", &[("generator", "train-polynomial"), ("count", "12")]);
    let run1 = d.join("run1");
    ok(d, &["--output", s(&run1), "train", "--dataset", s(&data)]);
    let state = read_checkpoint(&run1.join("checkpoint.p2vc")).unwrap();
    assert_eq!(state.epoch, 2);
    assert!(run1.join("checkpoint-0001.p2vc").exists());
    let history = std::fs::read_to_string(run1.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    assert!(history.starts_with("epoch,train_loss,val_loss\n1,"));

    let cfg3 = d.join("three.cfg");
    std::fs::write(&cfg3, SMALL.replace("epochs = 2", "epochs = 3")).unwrap();
    let run2 = d.join("run2");
    let ck = run1.join("checkpoint.p2vc");
    ok(d, &["--config", s(&cfg3), "--output", s(&run2), "train", "--dataset", s(&data), "--resume", s(&ck)]);
    let resumed = read_checkpoint(&run2.join("checkpoint.p2vc")).unwrap();
    assert_eq!(resumed.history.iter().map(|h| h.epoch).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert_eq!(resumed.history[..2], state.history[..]);

    let emb = d.join("emb");
    ok(d, &["--output", s(&emb), "embed", "--checkpoint", s(&ck), "--dataset", s(&data)]);
    let e = read_embeddings(&emb.join("embeddings.p2ve")).unwrap();
    assert_eq!((e.rows.len(), e.dim), (12, 5));

    let (r1, r2) = (d.join("r1"), d.join("r2"));
    ok(d, &["--output", s(&r1), "reconstruct", "--checkpoint", s(&ck), "--dataset", s(&data)]);
    ok(d, &["--output", s(&r2), "reconstruct", "--checkpoint", s(&ck), "--dataset", s(&data)]);
    for f in ["reconstruction.p2vd", "errors.csv"] {
        assert_eq!(std::fs::read(r1.join(f)).unwrap(), std::fs::read(r2.join(f)).unwrap());
    }
    let rows = read_sidecar(&r1.join("errors.csv")).unwrap();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.param_error.is_some()));

    let la = d.join("lasso");
    ok(d, &["--output", s(&la), "lasso", "--dataset", s(&data), "--beta", "0.002"]);
    assert!(std::fs::read_to_string(la.join("config.txt")).unwrap().contains("lasso_beta = 0.002\n"));
    let recon = read_dataset(&la.join("reconstruction.p2vd")).unwrap();
    assert!(recon.samples.iter().all(|s| s.coefficients.is_some()));
    assert_eq!(read_sidecar(&la.join("errors.csv")).unwrap().len(), 12);

    let unnorm = d.join("unnorm");
    ok(d, &["--output", s(&unnorm), "--no-fp-norm", "train", "--dataset", s(&data)]);
    let u = read_checkpoint(&unnorm.join("checkpoint.p2vc")).unwrap();
    assert!(!u.config.fixed_point_normalization());
}

#[test]
fn eval_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = generate(d, "data", &[("count", "8")]);
    let run = d.join("run");
    ok(d, &["--output", s(&run), "train", "--dataset", s(&data)]);
    let ck = run.join("checkpoint.p2vc");

    let rt = d.join("rt");
    let text = ok(d, &["--output", s(&rt), "eval", "recon-table", "--checkpoint", s(&ck)]);
    assert!(text.contains("flowembed,selkov,2,"));
    assert!(text.contains("lasso,fitzhugh-nagumo,4,"));
    assert!(text.contains("lasso,all,13,"));

    let ns = d.join("ns");
    let cfg = d.join("noise.cfg");
    std::fs::write(&cfg, format!("{SMALL}noise_kinds = gaussian,mask\n")).unwrap();
    ok(d, &["--config", s(&cfg), "--output", s(&ns), "eval", "noise-sweep", "--checkpoint", s(&ck)]);
    for kind in ["gaussian", "mask"] {
        let t = std::fs::read_to_string(ns.join(format!("noise-{kind}.csv"))).unwrap();
        assert_eq!(t.lines().count(), 21);
        assert!(t.starts_with("magnitude,flowembed_error,flowembed_std,lasso_error,lasso_std,skipped\n"));
    }
    let again = d.join("ns2");
    ok(d, &["--config", s(&cfg), "--output", s(&again), "eval", "noise-sweep", "--checkpoint", s(&ck)]);
    assert_eq!(std::fs::read(ns.join("noise-mask.csv")).unwrap(), std::fs::read(again.join("noise-mask.csv")).unwrap());

    let cl = d.join("cl");
    let cfg = d.join("cl.cfg");
    std::fs::write(&cfg, format!("{SMALL}per_class = 8\n")).unwrap();
    let text = ok(d, &["--config", s(&cfg), "--output", s(&cl), "eval", "classify", "--checkpoint", s(&ck)]);
    assert!(text.starts_with("representation,dims,lambda,train_macro_f1,test_macro_f1,test_f1_std\nembedding,5,"));
    assert!(text.contains("\nparameters,20,") && text.contains("\npca,5,"));

    let sp = d.join("sp");
    let text = ok(d, &["--output", s(&sp), "eval", "sparsity-sweep", "--checkpoint", s(&ck), "--dataset", s(&data)]);
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = d.join("bad.cfg");
    std::fs::write(&bad, "learning_rate = 1\n").unwrap();
    let out = run(d, &["--config", s(&bad), "generate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));

    let out = run(d, &["--output", s(&d.join("x")), "eval", "fig9"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown experiment"));

    let data = generate(d, "data", &[("count", "3")]);
    let cfg = d.join("wide.cfg");
    std::fs::write(&cfg, SMALL.replace("n = 16", "n = 32")).unwrap();
    let out = run(d, &["--config", s(&cfg), "--output", s(&d.join("y")), "train", "--dataset", s(&data)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n = 16"));

    let out = run(d, &["--output", s(&d.join("z")), "train", "--dataset", s(&d.join("missing.p2vd"))]);
    assert!(!out.status.success());
}
