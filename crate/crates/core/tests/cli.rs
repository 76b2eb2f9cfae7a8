use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gridverify"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().expect("exited normally"), String::from_utf8(out.stdout).unwrap())
}

fn run_owned(args: &[String]) -> (i32, String) {
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Dataset and small trained model in a fresh directory.
fn pipeline() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.json");
    let model = dir.path().join("model.json");
    let (code, _) = run(&[
        "gen-data", "--case", "builtin", "--samples", "200", "--low", "0", "--high", "2", "--seed", "4", "--out",
        s(&data),
    ]);
    assert_eq!(code, 0);
    let (code, _) = run(&[
        "train", "--data", s(&data), "--widths", "4", "--epochs", "200", "--seed", "4", "--out", s(&model),
    ]);
    assert_eq!(code, 0);
    (dir, model)
}

fn report(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    strip_wall_time(&mut v);
    v
}

fn strip_wall_time(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("wall_time");
            m.values_mut().for_each(strip_wall_time);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

#[test]
fn verify_and_oracle_agree_and_reports_repeat() {
    let (dir, model) = pipeline();
    for problem in ["gen-limits", "n1-flows"] {
        for scale in ["0.05", "1.0"] {
            let base = ["--problem", problem, "--case", "builtin", "--model", s(&model), "--box", "abs:0:0.1"];
            let args = |cmd: &str, tag: &str| {
                let path = dir.path().join(format!("{cmd}-{problem}-{scale}-{tag}.json"));
                let mut a: Vec<String> = vec![cmd.into()];
                a.extend(base.iter().map(|x| x.to_string()));
                a.extend(["--scale".into(), scale.into(), "--report".into(), s(&path).into()]);
                (a, path)
            };
            let (va, vpath) = args("verify", "a");
            let (vb, vpath_b) = args("verify", "b");
            let (oa, _) = args("oracle", "a");
            let (v_code, _) = run_owned(&va);
            let (v_code_b, _) = run_owned(&vb);
            let (o_code, _) = run_owned(&oa);
            assert!(v_code <= 1, "{problem} at {scale}: exit {v_code}");
            assert_eq!(v_code, o_code, "{problem} at {scale}");
            assert_eq!(v_code, v_code_b);

            let (mut a, mut b) = (report(&vpath), report(&vpath_b));
            // the argv differs only in the report path
            for r in [&mut a, &mut b] {
                r.as_object_mut().unwrap().remove("command");
            }
            assert_eq!(a, b);
            assert_eq!(a["schema_version"], 1);
            let expected = if v_code == 0 { "verified" } else { "refuted" };
            assert_eq!(a["result"]["status"], expected);
        }
    }
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();

    assert_eq!(run(&[]).0, 64);
    assert_eq!(run(&["verify", "--problem", "sideways"]).0, 64);
    let verify = |model: &Path, b: &str| {
        run(&["verify", "--problem", "gen-limits", "--case", "builtin", "--model", s(model), "--box", b]).0
    };
    assert_eq!(verify(&missing, "pm25"), 66);
    assert_eq!(verify(&garbage, "pm25"), 65);
    assert_eq!(
        run(&["gen-data", "--case", s(&missing), "--samples", "1", "--low", "0", "--high", "1", "--out", "x"]).0,
        66
    );
    let out_dir = dir.path().join("no/such/dir/data.json");
    assert_eq!(
        run(&["gen-data", "--case", "builtin", "--samples", "1", "--low", "0", "--high", "1", "--out", s(&out_dir)]).0,
        73
    );
}

#[test]
fn bad_load_box_is_a_data_error() {
    let (_dir, model) = pipeline();
    for b in ["pm", "abs:1", "abs:2:1", "wide"] {
        let (code, _) = run(&["oracle", "--problem", "gen-limits", "--case", "builtin", "--model", s(&model), "--box", b]);
        assert_eq!(code, 65, "box {b}");
    }
}
