use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vfhe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vfhe")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    vfhe(args).status.code().expect("exit code")
}

fn json(args: &[&str]) -> Value {
    let out = vfhe(args);
    assert!(out.status.success() || out.status.code() == Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn protocol_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (k, x, y, z) = (dir.path().join("k"), dir.path().join("x"), dir.path().join("y"), dir.path().join("z"));
    assert_eq!(code(&["kgen", "--workload", "small", "--out", p(&k)]), 0);
    assert!(k.join("system.r1cs").exists());
    assert_eq!(code(&["enc", "--keys", p(&k), "--out", p(&x), "--seed", "4"]), 0);
    assert_eq!(code(&["eval", "--keys", p(&k), "--inputs", p(&x), "--out", p(&y)]), 0);
    assert_eq!(code(&["verify", "--keys", p(&k), "--inputs", p(&x), "--result", p(&y)]), 0);
    let out = vfhe(&["oracle", "--keys", p(&k), "--inputs", p(&x), "--result", p(&y)]);
    assert!(out.status.success());
    let dec = vfhe(&["dec", "--keys", p(&k), "--ct", p(&y.join("y.ct"))]);
    assert_eq!(out.stdout, dec.stdout);

    assert_eq!(code(&["eval", "--keys", p(&k), "--inputs", p(&x), "--out", p(&z), "--tamper"]), 0);
    assert_eq!(code(&["verify", "--keys", p(&k), "--inputs", p(&x), "--result", p(&z)]), 2);
    let refused = vfhe(&["oracle", "--keys", p(&k), "--inputs", p(&x), "--result", p(&z)]);
    assert_eq!(refused.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&refused.stdout).trim(), "⊥");

    // An honest result on inputs the client never issued is refused too.
    std::fs::write(k.join("issued.txt"), "").unwrap();
    assert_eq!(code(&["oracle", "--keys", p(&k), "--inputs", p(&x), "--result", p(&y)]), 2);
    assert_eq!(code(&["verify", "--keys", p(&k), "--inputs", p(&x), "--result", p(&y)]), 0);
}

#[test]
fn explicit_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (k, x, y) = (dir.path().join("k"), dir.path().join("x"), dir.path().join("y"));
    assert_eq!(code(&["kgen", "--workload", "small", "--out", p(&k)]), 0);
    let xs = dir.path().join("xs.json");
    let ws = dir.path().join("ws.json");
    std::fs::write(&xs, "[[1,2,3,4,5,6,7,8]]").unwrap();
    std::fs::write(&ws, "[[1,0,0,0,0,0,0,0],[2,2,2,2,2,2,2,2]]").unwrap();
    assert_eq!(code(&["enc", "--keys", p(&k), "--input", p(&xs), "--out", p(&x)]), 0);
    assert_eq!(code(&["eval", "--keys", p(&k), "--inputs", p(&x), "--server", p(&ws), "--out", p(&y)]), 0);
    let out = vfhe(&["oracle", "--keys", p(&k), "--inputs", p(&x), "--result", p(&y)]);
    let got: Vec<u64> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(got, vec![3, 4, 5, 6, 7, 8, 9, 10]);

    // A server input outside the plaintext domain is caught at verification.
    std::fs::write(&ws, "[[1,0,0,0,0,0,0,0],[40,2,2,2,2,2,2,2]]").unwrap();
    let bad = dir.path().join("bad");
    assert_eq!(code(&["eval", "--keys", p(&k), "--inputs", p(&x), "--server", p(&ws), "--out", p(&bad)]), 0);
    assert_eq!(code(&["verify", "--keys", p(&k), "--inputs", p(&x), "--result", p(&bad)]), 2);
}

#[test]
fn tampered_key_directory_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let k = dir.path().join("k");
    assert_eq!(code(&["kgen", "--out", p(&k)]), 0);
    let mut pk = std::fs::read(k.join("pk.bin")).unwrap();
    let last = pk.len() - 1;
    pk[last] ^= 1;
    std::fs::write(k.join("pk.bin"), pk).unwrap();
    assert_eq!(code(&["enc", "--keys", p(&k), "--out", p(&dir.path().join("x"))]), 1);
}

fn strip(mut v: Value) -> Value {
    let o = v.as_object_mut().unwrap();
    o.remove("timings");
    o.remove("environment");
    v
}

#[test]
fn reports_are_deterministic() {
    for name in ["toy", "small", "medium"] {
        let a = json(&["workload", "run", name, "--json", "--seed", "9"]);
        let b = json(&["workload", "run", name, "--json", "--seed", "9"]);
        assert_eq!(a["schema"], "vfhe-report/1");
        assert_eq!(a["verdicts"]["verified"], true, "{name}");
        assert_eq!(a["verdicts"]["decrypted_correct"], true, "{name}");
        assert_eq!(serde_json::to_string(&strip(a)).unwrap(), serde_json::to_string(&strip(b)).unwrap());
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["workload", "run", "medium", "--tamper"]), 2);
    assert_eq!(code(&["workload", "run", "medium", "--tamper", "--expect-reject"]), 0);
    assert_eq!(code(&["workload", "run", "toy", "--expect-reject"]), 2);
    assert_eq!(code(&["workload", "run", "toy", "--mode", "fhe-only"]), 0);
    assert_eq!(code(&["--params", "no-such-preset", "workload", "run", "toy"]), 3);
    assert_eq!(code(&["workload", "run", "toy", "--mode", "bogus"]), 3);
    assert_eq!(code(&["kgen", "--params", "paper", "--out", "/tmp/never-written"]), 3);
    assert_eq!(code(&["encode-bench", "--modulus", "19"]), 3);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn shallow_params_file_is_a_parameter_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("p.json");
    std::fs::write(&f, r#"{"name":"one-limb","degree":8,"moduli":[65537],"plain_modulus":17}"#).unwrap();
    assert_eq!(code(&["--params", p(&f), "workload", "run", "medium"]), 3);
    assert_eq!(code(&["--params", p(&f), "workload", "run", "toy"]), 0);
    assert_eq!(code(&["--params", p(&f), "keygen", "--out", p(&dir.path().join("k"))]), 0);
    assert!(dir.path().join("k/rk.bin").exists());
}

#[test]
fn compare_flags_regressions() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("r.json");
    assert_eq!(code(&["workload", "run", "toy", "--out", p(&r)]), 0);
    assert_eq!(code(&["workload", "compare", p(&r), p(&r)]), 0);
    let mut v: Value = serde_json::from_slice(&std::fs::read(&r).unwrap()).unwrap();
    v["constraints"]["constraints_total"] = 1.into();
    let drift = dir.path().join("d.json");
    std::fs::write(&drift, v.to_string()).unwrap();
    assert_eq!(code(&["workload", "compare", p(&drift), p(&r)]), 1);
    v["schema"] = "other".into();
    std::fs::write(&drift, v.to_string()).unwrap();
    assert_eq!(code(&["workload", "compare", p(&drift), p(&r)]), 1);
}

#[test]
fn paper_compile_is_deterministic() {
    let a = json(&["workload", "compile", "medium", "--params", "paper", "--json"]);
    let b = json(&["workload", "compile", "medium", "--params", "paper", "--json"]);
    assert_eq!(a, b);
    assert_eq!(a["stats"]["constraints_total"], a["constraints_emitted"]);
}

#[test]
fn compile_exports_system() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("toy.r1cs");
    assert_eq!(code(&["workload", "compile", "toy", "--r1cs", p(&f)]), 0);
    assert!(std::fs::read_to_string(&f).unwrap().starts_with("VR1CS1"));
    assert_eq!(code(&["workload", "compile", "toy", "--params", "paper", "--r1cs", p(&f)]), 3);
}

#[test]
fn demos_succeed() {
    for a in ["bv-trivial", "relin-key", "overflow-oracle"] {
        let v = json(&["demo", a, "--json"]);
        assert_eq!(v["baseline_broken"], true, "{a}");
        assert_eq!(v["vfhe_blocked"], true, "{a}");
    }
    assert_eq!(code(&["demo", "nothing"]), 3);
}

#[test]
fn offload_report() {
    let v = json(&["offload", "--k", "8", "--json"]);
    for key in ["verdict", "ledger", "soundness_bits", "timings"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["verdict"], true);
    assert_eq!(v["ledger"]["r_plus_r"], 46);
    assert_eq!(code(&["offload", "--k", "8", "--tamper", "random"]), 2);
}

#[test]
fn experiment_report() {
    let v = json(&["experiment", "--workload", "toy", "--trials", "5", "--json"]);
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 4); // no server inputs, so no oversized-input strategy
    for r in list {
        assert_eq!(r["accepted_wrong"], 0);
        for key in ["strategy", "trials", "accepted_wrong", "rejected", "leaked_bits"] {
            assert!(r.get(key).is_some());
        }
    }
}

#[test]
fn encode_bench_report() {
    let v = json(&["encode-bench", "--json"]);
    assert_eq!(v["correct"], true);
    assert_eq!(v["expansion"]["pair_gap"], 2.0);
}
