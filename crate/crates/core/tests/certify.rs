use alignlab::alignment::{measure_delta_alignment, BufferedEnv, MeasureMode, Verifier};
use alignlab::certify::{
    certification_sequences, certify, parse_log, required_samples, soundness_experiment,
    verify_log_digest, CertificationPlan, CertifyOutcome, Judge, Judgment, JudgmentSource,
    NextSequence, Outcome, Session, SessionError, SessionStatus, Verdict,
};
use alignlab::envs::{build_coin, build_matrix, MatrixSpec};
use chrono::Utc;
use proptest::prelude::*;

/// `ln x` from the series `2·atanh((x−1)/(x+1))`, summed until the terms
/// vanish; used as an independent oracle for the sample-size formula.
fn ln_series(x: f64) -> f64 {
    let y = (x - 1.0) / (x + 1.0);
    let (mut term, mut sum, mut k) = (y, 0.0, 0);
    while term.abs() > 1e-300 && k < 100_000 {
        sum += term / (2 * k + 1) as f64;
        term *= y * y;
        k += 1;
    }
    2.0 * sum
}

fn coin() -> (BufferedEnv, alignlab::pomdp::Policy) {
    let env = build_coin(3).unwrap();
    (env.buffered_env, env.policy)
}

fn certified(outcome: CertifyOutcome) -> alignlab::certify::Certificate {
    match outcome {
        CertifyOutcome::Certified(c) => c,
        other => panic!("expected a certificate, got {other:?}"),
    }
}

#[test]
fn sample_sizes_match_the_series_oracle() {
    // ln 20 = 2 ln 2 + ln 5
    let ln20 = 2.0 * ln_series(2.0) + ln_series(5.0);
    assert!((ln20 - 20f64.ln()).abs() < 1e-14);
    assert_eq!((ln20 / 0.1).ceil() as u64, 30);
    assert_eq!(required_samples(0.1, 0.05).unwrap(), 30);
    assert_eq!(required_samples(0.5, (-1f64).exp()).unwrap(), 2);
    assert_eq!((ln20 / 0.05).ceil() as u64, 60);
    assert_eq!(required_samples(0.05, 0.05).unwrap(), 60);
}

#[test]
fn sample_size_rejects_bad_parameters() {
    for (d, n) in [(0.0, 0.5), (1.0, 0.5), (1.5, 0.5), (0.1, 0.0), (0.1, 1.0), (f64::NAN, 0.1)] {
        assert!(required_samples(d, n).is_err(), "({d}, {n})");
    }
}

#[test]
fn constant_verifiers_pass_and_fail_fast() {
    let (buf, p) = coin();
    let plan = CertificationPlan::new(0.1, 0.05, 7).unwrap();
    let pass = certified(certify(&buf, &p, &plan, Judge::Programmatic(&Verifier::constant(true))).unwrap());
    assert_eq!(pass.outcome, Outcome::Pass);
    assert_eq!(pass.judgments, 30);
    let fail = certified(certify(&buf, &p, &plan, Judge::Programmatic(&Verifier::constant(false))).unwrap());
    assert_eq!(fail.outcome, Outcome::Fail { index: 0 });
    assert_eq!(fail.judgments, 1);
}

#[test]
fn matrix_buffered_certification_passes_while_real_mass_is_high() {
    let env = build_matrix(&MatrixSpec::canonical()).unwrap();
    let drift = env.drift_policy();
    let plan = CertificationPlan::new(0.1, 0.05, 2024).unwrap();
    let cert = certified(
        certify(&env.buffered_env, &drift, &plan, Judge::Programmatic(&env.buffered_verifier)).unwrap(),
    );
    assert!(cert.passed());
    let real = measure_delta_alignment(env.buffered_env.real(), &drift, &env.full_verifier, MeasureMode::Exact)
        .unwrap();
    assert!(real.misalignment_mass >= 0.9);
}

#[test]
fn soundness_matches_closed_form() {
    let r = soundness_experiment(1.0, 0.1, 0.05, 1000, 1).unwrap();
    assert_eq!(r.passes, 0);
    let r = soundness_experiment(0.2, 0.1, 0.05, 100_000, 5).unwrap();
    assert_eq!(r.m, 30);
    assert!((r.closed_form / 0.8f64.powi(30) - 1.0).abs() < 1e-12);
    assert!((r.empirical - r.closed_form).abs() <= 0.25 * r.closed_form, "{r:?}");
    assert!(r.empirical <= 0.05);
    assert!(r.closed_form <= r.true_mass_bound);
    assert!(r.bound <= 0.05);
}

#[test]
fn human_session_pass_and_fail() {
    let (buf, p) = coin();
    let plan = CertificationPlan::new(0.1, 0.05, 3).unwrap();
    let mut s = Session::open("s1", &buf, &p, plan).unwrap();
    for i in 0..plan.m {
        match s.next_sequence() {
            NextSequence::Sequence { index, .. } => assert_eq!(index, i),
            NextSequence::Exhausted => panic!("exhausted early"),
        }
        s.submit_verdict(i, Verdict::Aligned).unwrap();
    }
    assert_eq!(s.status(), SessionStatus::Passed);
    assert_eq!(s.next_sequence(), NextSequence::Exhausted);
    assert!(certified(certify(&buf, &p, &plan, Judge::Session(&s)).unwrap()).passed());

    let mut s = Session::open("s2", &buf, &p, plan).unwrap();
    for i in 0..3 {
        s.submit_verdict(i, Verdict::Aligned).unwrap();
    }
    assert_eq!(
        certify(&buf, &p, &plan, Judge::Session(&s)).unwrap(),
        CertifyOutcome::Pending { judged: 3, required: 30 }
    );
    assert_eq!(s.submit_verdict(3, Verdict::Misaligned).unwrap(), SessionStatus::Failed { index: 3 });
    assert_eq!(s.next_sequence(), NextSequence::Exhausted);
    assert!(matches!(s.submit_verdict(4, Verdict::Aligned), Err(SessionError::Closed(_))));
    assert_eq!(s.certificate().unwrap().outcome, Outcome::Fail { index: 3 });
}

#[test]
fn session_rejects_out_of_order_duplicate_and_foreign() {
    let (buf, p) = coin();
    let plan = CertificationPlan::new(0.5, 0.5, 3).unwrap();
    let mut s = Session::open("s", &buf, &p, plan).unwrap();
    assert!(matches!(
        s.submit_verdict(1, Verdict::Aligned),
        Err(SessionError::OutOfOrder { expected: 0, got: 1 })
    ));
    s.submit_verdict(0, Verdict::Aligned).unwrap();
    assert!(matches!(s.submit_verdict(0, Verdict::Aligned), Err(SessionError::Duplicate { got: 0 })));
    let foreign = Judgment {
        sequence_index: 1,
        verdict: Verdict::Aligned,
        source: JudgmentSource::Human("other".into()),
        timestamp: Utc::now(),
    };
    assert!(matches!(s.submit_judgment(foreign), Err(SessionError::ForeignSource(_))));
    assert_eq!(s.judged(), 1);
}

#[test]
fn same_seed_gives_identical_sequences() {
    let env = build_matrix(&MatrixSpec::canonical()).unwrap();
    let p = env.drift_policy();
    let plan = CertificationPlan::new(0.1, 0.05, 77).unwrap();
    let a = Session::open("a", &env.buffered_env, &p, plan).unwrap();
    let b = Session::open("b", &env.buffered_env, &p, plan).unwrap();
    let ja = serde_json::to_string(a.sequences()).unwrap();
    let jb = serde_json::to_string(b.sequences()).unwrap();
    assert_eq!(ja, jb);
    let other = CertificationPlan::new(0.1, 0.05, 78).unwrap();
    let c = certification_sequences(&env.buffered_env, &p, &other).unwrap();
    assert_ne!(serde_json::to_string(&c).unwrap(), ja);
}

#[test]
fn human_and_programmatic_certificates_agree() {
    let env = build_matrix(&MatrixSpec::canonical()).unwrap();
    let p = env.drift_policy();
    let plan = CertificationPlan::new(0.2, 0.1, 11).unwrap();
    let prog = certified(
        certify(&env.buffered_env, &p, &plan, Judge::Programmatic(&env.buffered_verifier)).unwrap(),
    );
    let mut s = Session::open("h", &env.buffered_env, &p, plan).unwrap();
    while let NextSequence::Sequence { index, trajectory } = s.next_sequence() {
        let v = if env.buffered_verifier.is_aligned(&trajectory.states()) {
            Verdict::Aligned
        } else {
            Verdict::Misaligned
        };
        s.submit_verdict(index, v).unwrap();
    }
    let human = s.certificate().unwrap();
    assert_eq!(human.comparable(), prog.comparable());
    assert_ne!(human.judgment_digest, prog.judgment_digest);
}

#[test]
fn persisted_log_verifies_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let (buf, p) = coin();
    let plan = CertificationPlan::new(0.3, 0.2, 9).unwrap();
    let mut s = Session::open("s", &buf, &p, plan).unwrap();
    s.persist_to(&path).unwrap();
    s.submit_verdict(0, Verdict::Aligned).unwrap();
    s.submit_verdict(1, Verdict::Aligned).unwrap();
    let created = s.created_at();
    drop(s);

    let mut r = Session::restore("s", &buf, &p, plan, created, &path).unwrap();
    assert_eq!(r.judged(), 2);
    assert_eq!(r.status(), SessionStatus::Open);
    while let NextSequence::Sequence { index, .. } = r.next_sequence() {
        r.submit_verdict(index, Verdict::Aligned).unwrap();
    }
    let cert = r.certificate().unwrap();
    assert!(cert.passed());
    assert!(verify_log_digest(&path, &cert.judgment_digest).unwrap());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(parse_log(&text).unwrap().len() as u64, plan.m);

    let again = Session::restore("s", &buf, &p, plan, created, &path).unwrap();
    assert_eq!(again.status(), SessionStatus::Passed);
    assert_eq!(again.certificate().unwrap(), cert);
}

#[test]
fn session_certificate_must_match_inputs() {
    let (buf, p) = coin();
    let plan = CertificationPlan::new(0.3, 0.2, 9).unwrap();
    let s = Session::open("s", &buf, &p, plan).unwrap();
    let other = CertificationPlan::new(0.3, 0.2, 10).unwrap();
    assert!(certify(&buf, &p, &other, Judge::Session(&s)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sample_size_meets_the_bound(delta in 1e-4f64..0.999, nu in 1e-6f64..0.999) {
        let m = required_samples(delta, nu).unwrap();
        prop_assert!((-delta * m as f64).exp() <= nu * (1.0 + 1e-12));
        if m > 1 {
            prop_assert!((-delta * (m - 1) as f64).exp() > nu);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn outcome_depends_only_on_verdicts(bits in prop::collection::vec(any::<bool>(), 1..12), seed in any::<u64>()) {
        let (buf, p) = coin();
        let plan = CertificationPlan::new(0.3, 0.05, seed).unwrap();
        let run = |id: &str| {
            let mut s = Session::open(id, &buf, &p, plan).unwrap();
            for (i, b) in bits.iter().enumerate() {
                let v = if *b { Verdict::Aligned } else { Verdict::Misaligned };
                if s.submit_verdict(i as u64, v).is_err() {
                    break;
                }
            }
            s.certificate().map(|c| c.comparable())
        };
        prop_assert_eq!(run("x"), run("y"));
    }
}
