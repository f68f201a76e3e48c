use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rfiqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfiqa")).args(args).output().unwrap()
}

fn toy() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn ingest_valid_pair_and_reingest_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (first, second) = (tmp.path().join("first"), tmp.path().join("second"));
    let out = rfiqa(&[
        "ingest",
        "--manifest",
        s(&toy().join("manifest.json")),
        "--vectors",
        s(&toy().join("vectors.bin")),
        "--out",
        s(&first),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("records=56 groups=8 distorted=48"));

    let out = rfiqa(&[
        "ingest",
        "--manifest",
        s(&first.join("manifest.json")),
        "--vectors",
        s(&first.join("vectors.bin")),
        "--out",
        s(&second),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(dir_bytes(&first), dir_bytes(&second));
    assert_eq!(dir_bytes(&first), dir_bytes(&toy()));
}

#[test]
fn ingest_with_mismatched_offsets_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = fs::read_to_string(toy().join("manifest.json")).unwrap();
    let broken = manifest.replacen("\"distortion_offset\": 140", "\"distortion_offset\": 144", 1);
    assert_ne!(broken, manifest);
    let path = tmp.path().join("manifest.json");
    fs::write(&path, broken).unwrap();
    let out = rfiqa(&[
        "ingest",
        "--manifest",
        s(&path),
        "--vectors",
        s(&toy().join("vectors.bin")),
        "--out",
        s(&tmp.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("CorruptManifest"));
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn evaluate_defaults_on_toy_store() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.csv");
    let out = rfiqa(&["evaluate", "--store", s(&toy()), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# rfiqa 0.1.0 seed=0 config_hash="));
    assert!(lines[1].contains("k_prime=10") && lines[1].contains("repeats=15"));
    assert_eq!(lines[2], "row,seed,n_test,srocc,plcc,rmse,plcc_fitted,status");
    let rows: Vec<&str> = lines[3..].iter().copied().filter(|l| l.ends_with(",ok")).collect();
    assert_eq!(rows.len(), 15);
    assert_eq!(lines.len(), 3 + 15 + 1);
    assert!(lines[18].starts_with("median,,15,"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(rfiqa(&["evaluate", "--out", "r.csv"]).status.code(), Some(64));
    assert_eq!(rfiqa(&["evaluate", "--store", s(&toy()), "--out", "r.csv", "--bogus"]).status.code(), Some(64));
    assert_eq!(rfiqa(&["predict", "--store", s(&toy())]).status.code(), Some(64));
    assert_eq!(
        rfiqa(&["predict", "--store", s(&toy()), "--query-id", "x", "--metric", "hamming"]).status.code(),
        Some(64)
    );
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        rfiqa(&["reduce", "--store", s(&toy()), "--factor", "0", "--out", s(tmp.path())]).status.code(),
        Some(64)
    );
    let help = rfiqa(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("store format version 1"));
}

#[test]
fn reduce_then_evaluate_reports_factor() {
    let tmp = tempfile::tempdir().unwrap();
    let before = dir_bytes(&toy());
    let reduced = tmp.path().join("reduced");
    let out = rfiqa(&["reduce", "--store", s(&toy()), "--factor", "16", "--out", s(&reduced)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(dir_bytes(&toy()), before);

    let report = tmp.path().join("r.csv");
    let out = rfiqa(&["evaluate", "--store", s(&reduced), "--repeats", "3", "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("reduction_factor=16"));

    // refusing to write over the input
    let out = rfiqa(&["reduce", "--store", s(&reduced), "--factor", "2", "--out", s(&reduced)]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn predict_by_id_and_by_features() {
    let out = rfiqa(&[
        "predict",
        "--store",
        s(&toy()),
        "--query-id",
        "toy_g002_t0_l3",
        "--k-prime",
        "3",
        "--k-double-prime",
        "2",
        "--aggregate",
        "simple",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# rfiqa"));
    assert_eq!(lines[2], "kind,id,group,d_s,d_d,mos");
    assert!(lines[3].starts_with("score,toy_g002_t0_l3,"));
    let instances: Vec<&str> = lines[4..].to_vec();
    assert_eq!(instances.len(), 6);
    assert!(instances.iter().all(|l| l.starts_with("instance,") && !l.contains(",toy_g002,")));

    let tmp = tempfile::tempdir().unwrap();
    let query = tmp.path().join("q.json");
    let sem: Vec<String> = (0..32).map(|i| format!("{}", (i % 5) as f32 * 0.1)).collect();
    let dist: Vec<String> = (0..24).map(|i| if i == 3 { "1.0".into() } else { "0.0".to_string() }).collect();
    fs::write(&query, format!("{{\"semantic\": [{}], \"distortion\": [{}]}}", sem.join(","), dist.join(","))).unwrap();
    let out = rfiqa(&["predict", "--store", s(&toy()), "--query-features", s(&query), "--k-prime", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("instance,")).count(), 2);

    fs::write(&query, "{\"semantic\": [1.0], \"distortion\": [1.0]}").unwrap();
    let out = rfiqa(&["predict", "--store", s(&toy()), "--query-features", s(&query)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("DimensionMismatch") || stderr(&out).contains("dimension"));
}

#[test]
fn analyze_writes_scatter_and_si_results() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("mix");
    let out = rfiqa(&["synth", "--kind", "interpolated", "--size", "12", "--out", s(&store)]);
    assert_eq!(out.status.code(), Some(0));
    let pairing = tmp.path().join("pairs.csv");
    let rows: Vec<String> = (0..12).map(|g| format!("mix_g{g:03},mix_g{:03}", (g + 1) % 12)).collect();
    fs::write(&pairing, format!("group,partner\n{}\n", rows.join("\n"))).unwrap();
    let scatter = tmp.path().join("scatter.csv");
    let out = rfiqa(&[
        "analyze",
        "--store",
        s(&store),
        "--top-n",
        "3",
        "--out",
        s(&scatter),
        "--si-pairing",
        s(&pairing),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&scatter).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# rfiqa 0.1.0 seed=none config_hash="));
    assert_eq!(lines.next().unwrap(), "group_a,group_b,semantic_similarity,aligned_srocc,n_aligned");
    assert!(stdout(&out).contains("si_predictor n=288"));
}

#[test]
fn authentic_store_defaults_to_flat_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("wild");
    assert_eq!(
        rfiqa(&["synth", "--kind", "authentic", "--size", "120", "--out", s(&store)]).status.code(),
        Some(0)
    );
    let report = tmp.path().join("r.csv");
    let out = rfiqa(&["evaluate", "--store", s(&store), "--k-prime", "15", "--repeats", "3", "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("mode=flat"));

    let out = rfiqa(&["evaluate", "--store", s(&store), "--mode", "hierarchical", "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(2));
}
