use super::*;

fn strip(mut r: RunReport) -> RunReport {
    r.timings = Timings::default();
    r.environment = Environment::current();
    r
}

#[test]
fn presets_build() {
    let desk = ParamSpec::desk().bgv().unwrap();
    assert_eq!((desk.degree(), desk.plain_modulus(), desk.max_level()), (8, 17, 1));
    let paper = ParamSpec::paper().bgv().unwrap();
    assert_eq!(paper.degree(), 8192);
    assert_eq!(paper.ring().modulus().bits(), 137);
    assert!(ParamSpec::preset("nope").is_none());
}

#[test]
fn params_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, serde_json::to_string(&ParamSpec::desk()).unwrap()).unwrap();
    assert_eq!(ParamSpec::resolve(path.to_str().unwrap()).unwrap(), ParamSpec::desk());
    assert!(matches!(ParamSpec::resolve("/nonexistent/p.json"), Err(Error::InvalidParams(_))));
    std::fs::write(&path, "{").unwrap();
    assert!(matches!(ParamSpec::load(&path), Err(Error::InvalidParams(_))));
}

#[test]
fn circuits_have_expected_shape() {
    let toy = Workload::Toy.circuit();
    assert_eq!((toy.ct_inputs, toy.pt_inputs, toy.output), (2, 0, 2));
    let small = Workload::Small.circuit();
    assert_eq!((small.ct_inputs, small.pt_inputs, small.output), (1, 2, 3));
    let medium = Workload::Medium.circuit();
    assert_eq!((medium.ct_inputs, medium.pt_inputs, medium.output), (1, 1, 5));
    let params = ParamSpec::desk().bgv().unwrap();
    for w in Workload::ALL {
        check_depth(&w.circuit(), &params).unwrap();
        assert_eq!(w.name().parse::<Workload>().unwrap(), w);
    }
}

#[test]
fn shallow_preset_rejected() {
    let mut spec = ParamSpec::desk();
    spec.moduli = vec![65537];
    let err = run_workload(Workload::Medium, &spec, Mode::FheOnly, RunOptions::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidParams(_)));
    assert!(run_workload(Workload::Toy, &spec, Mode::FheOnly, RunOptions::default()).is_ok());
}

#[test]
fn toy_vfhe_verifies_and_decrypts() {
    let r = run_workload(Workload::Toy, &ParamSpec::desk(), Mode::Vfhe, RunOptions { seed: 3, tamper: false }).unwrap();
    assert_eq!(r.schema, REPORT_SCHEMA);
    assert_eq!(r.verdicts.verified, Some(true));
    assert_eq!(r.verdicts.decrypted_correct, Some(true));
    assert!(r.constraints.constraints_total > 0);
}

#[test]
fn tampered_medium_rejected() {
    let opts = RunOptions { seed: 5, tamper: true };
    let r = run_workload(Workload::Medium, &ParamSpec::desk(), Mode::Vfhe, opts).unwrap();
    assert_eq!(r.verdicts.verified, Some(false));
    assert!(r.verdicts.tampered);
}

#[test]
fn attack_mode_rejected_for_every_workload() {
    for w in Workload::ALL {
        let r = run_workload(w, &ParamSpec::desk(), Mode::AttackDemo, RunOptions { seed: 8, tamper: false }).unwrap();
        assert_eq!(r.verdicts.verified, Some(false), "{w}");
    }
}

#[test]
fn fhe_only_has_no_constraints() {
    for w in Workload::ALL {
        let r = run_workload(w, &ParamSpec::desk(), Mode::FheOnly, RunOptions { seed: 1, tamper: false }).unwrap();
        assert_eq!(r.constraints.constraints_total, 0);
        assert_eq!(r.verdicts.verified, None);
        assert_eq!(r.verdicts.decrypted_correct, Some(true), "{w}");
    }
}

#[test]
fn runs_are_deterministic() {
    let opts = RunOptions { seed: 11, tamper: false };
    let a = run_workload(Workload::Small, &ParamSpec::desk(), Mode::Vfhe, opts).unwrap();
    let b = run_workload(Workload::Small, &ParamSpec::desk(), Mode::Vfhe, opts).unwrap();
    assert_eq!(serde_json::to_string(&strip(a)).unwrap(), serde_json::to_string(&strip(b)).unwrap());
}

#[test]
fn paper_preset_counts_only() {
    let r = run_workload(Workload::Medium, &ParamSpec::paper(), Mode::Vfhe, RunOptions::default()).unwrap();
    assert!(r.verdicts.count_only);
    assert_eq!(r.verdicts.verified, None);
    let c = compile_workload(Workload::Medium, &ParamSpec::paper()).unwrap();
    assert_eq!(c.stats, r.constraints);
    assert_eq!(c.constraints_emitted, c.stats.constraints_total);
}

#[test]
fn compare_flags_drift() {
    let r = run_workload(Workload::Toy, &ParamSpec::desk(), Mode::Vfhe, RunOptions::default()).unwrap();
    let base = serde_json::to_value(&r).unwrap();
    assert!(report_compare(&base, &base, 0.0).unwrap().is_empty());

    let mut drift = base.clone();
    drift["constraints"]["constraints_total"] = (r.constraints.constraints_total + 1).into();
    let d = report_compare(&drift, &base, 1000.0).unwrap();
    assert_eq!(d.entries.len(), 1);
    assert_eq!(d.entries[0].path, "constraints.constraints_total");

    let mut slow = base.clone();
    slow["timings"]["prover"] = (r.timings.prover * 2.0 + 1.0).into();
    assert_eq!(report_compare(&slow, &base, 10.0).unwrap().entries[0].path, "timings.prover");
    let mut jitter = base.clone();
    jitter["timings"]["prover"] = (r.timings.prover * 1.05).into();
    assert!(report_compare(&jitter, &base, 10.0).unwrap().is_empty());

    let mut other_env = base.clone();
    other_env["environment"]["os"] = "elsewhere".into();
    assert!(report_compare(&other_env, &base, 0.0).unwrap().is_empty());

    let mut bad = base.clone();
    bad["schema"] = "other/1".into();
    assert!(matches!(report_compare(&bad, &base, 0.0), Err(Error::Format(_))));
}

#[test]
fn demos_break_baseline_and_not_vfhe() {
    for a in Attack::ALL {
        let tr = demo(a, &ParamSpec::desk(), 2).unwrap();
        assert!(tr.baseline_broken, "{}", tr);
        assert!(tr.vfhe_blocked, "{}", tr);
        assert_eq!(a.name().parse::<Attack>().unwrap(), a);
    }
}
