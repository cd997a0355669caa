//! Acceptance suite: runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nsoc::elements::{build_space, ElementPair};
use nsoc::experiments::{
    continuity_defect, gauge_defect, run_control_study, run_derivative_checks, run_verify_state, Check,
    ConvergenceTable, DiagnosticReport, ExperimentConfig, Report,
};
use nsoc::mesh::{Mesh, Rect};
use nsoc::optimize::{ReducedProblem, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PAIRS: [ElementPair; 2] = [ElementPair::TaylorHood, ElementPair::Mini];
const SCHEMES: [Scheme; 2] = [Scheme::FullyDiscrete, Scheme::Semidiscrete];

struct Outcome {
    failures: Vec<String>,
    checked: usize,
    note: String,
}

impl Outcome {
    fn from_checks<'a>(checks: impl IntoIterator<Item = &'a Check>) -> Self {
        let mut o = Outcome { failures: vec![], checked: 0, note: String::new() };
        for c in checks {
            o.checked += 1;
            if !c.passed {
                o.failures.push(format!("{} (value {:?}, threshold {:?})", c.name, c.value, c.threshold));
            }
        }
        o
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    fn runtime(mut self, elapsed: Duration, limit_s: u64) -> Self {
        self.checked += 1;
        if elapsed > Duration::from_secs(limit_s) {
            self.failures.push(format!("runtime {:.1} s exceeds {limit_s} s", elapsed.as_secs_f64()));
        }
        let t = format!("{:.1} s of {limit_s} s", elapsed.as_secs_f64());
        self.note = if self.note.is_empty() { t } else { format!("{}; {t}", self.note) };
        self
    }

    fn error(msg: String) -> Self {
        Outcome { failures: vec![msg], checked: 0, note: String::new() }
    }
}

fn matching<'a>(checks: &'a [Check], keys: &'a [&str]) -> impl Iterator<Item = &'a Check> + 'a {
    checks.iter().filter(move |c| keys.iter().any(|k| c.name.contains(k)))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn eocs(table: &ConvergenceTable, pick: fn(&nsoc::experiments::ConvergenceRow) -> Option<f64>) -> String {
    table.rows.iter().filter_map(pick).map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", ")
}

fn main() -> ExitCode {
    let base = ExperimentConfig::default();
    let mut outcomes: Vec<(u32, &str, Outcome)> = vec![];

    // 1. Manufactured state verification.
    eprintln!("running state verification ...");
    let (verify, t1) = timed(|| {
        PAIRS
            .iter()
            .map(|&pair| run_verify_state(&ExperimentConfig { pair, levels: Some(vec![8, 16, 32, 64]), ..base.clone() }))
            .collect::<nsoc::Result<Vec<_>>>()
    });
    let verify = match verify {
        Ok(v) => v,
        Err(e) => {
            eprintln!("state verification failed: {e}");
            vec![]
        }
    };
    let verify_checks: Vec<Check> = verify.iter().flat_map(|t| t.checks.iter().cloned()).collect();
    let o1 = if verify.len() == 2 {
        Outcome::from_checks(matching(&verify_checks, &["EOC"]))
            .note(format!(
                "TH Linf EOC [{}], TH H1 EOC [{}], TH L2 EOC [{}], MINI H1 EOC [{}]",
                eocs(&verify[0], |r| r.eoc_yinf),
                eocs(&verify[0], |r| r.eoc_y_h1),
                eocs(&verify[0], |r| r.eoc_y),
                eocs(&verify[1], |r| r.eoc_y_h1)
            ))
            .runtime(t1, 180)
    } else {
        Outcome::error("state verification did not complete".into())
    };
    outcomes.push((1, "manufactured state verification", o1));

    // 3-5. Derivative checks on 16x16, both pairs and schemes.
    eprintln!("running derivative checks ...");
    let (deriv, t3) = timed(|| {
        run_derivative_checks(&ExperimentConfig { levels: Some(vec![16]), ..base.clone() }, &PAIRS, &SCHEMES)
    });
    let deriv = deriv.unwrap_or_else(|e| DiagnosticReport { checks: vec![Check::flag(format!("derivative checks: {e}"), false)] });

    // 6-7. Control studies, both schemes, levels 8, 16, 32 against 128.
    eprintln!("running control studies ...");
    let (studies, t7) = timed(|| {
        SCHEMES
            .iter()
            .map(|&scheme| {
                run_control_study(&ExperimentConfig {
                    scheme,
                    levels: Some(vec![8, 16, 32]),
                    reference_level_offset: 2,
                    ..base.clone()
                })
            })
            .collect::<Vec<_>>()
    });
    let mut study_checks: Vec<Check> = vec![];
    let mut study_notes = vec![];
    for (scheme, s) in SCHEMES.iter().zip(&studies) {
        match s {
            Ok(t) => {
                study_checks.extend(t.checks.iter().map(|c| Check { name: format!("{}: {}", scheme.short_name(), c.name), ..c.clone() }));
                study_notes.push(format!(
                    "{} control EOC [{}], adjoint EOC [{}]",
                    scheme.short_name(),
                    eocs(t, |r| r.eoc_u),
                    eocs(t, |r| r.eoc_z)
                ));
            }
            Err(e) => study_checks.push(Check::flag(format!("{}: control study: {e}", scheme.short_name()), false)),
        }
    }

    // 2. Continuity and gauge: every solve in the studies above plus extra
    // state/adjoint solves at random controls.
    eprintln!("running continuity and gauge checks ...");
    let mut cg: Vec<Check> = matching(&verify_checks, &["continuity", "gauge"]).cloned().collect();
    cg.extend(matching(&study_checks, &["continuity", "gauge"]).cloned());
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
    for pair in PAIRS {
        for scheme in SCHEMES {
            for n in [8, 16] {
                let space = build_space(&Mesh::build_structured(n, n, Rect::UNIT).unwrap(), pair);
                let problem = nsoc::optimize::ControlProblem { pair, scheme, ..base.problem() };
                let rp = ReducedProblem::new(&problem, &space).unwrap();
                for k in 0..3 {
                    let vals = (0..rp.control_len())
                        .map(|_| [rng.gen_range(-0.75..=0.75), rng.gen_range(-0.75..=0.75)])
                        .collect();
                    let u = rp.control_from_values(vals).unwrap();
                    let tag = format!("{}/{} {n}x{n} random control {k}", pair.short_name(), scheme.short_name());
                    match rp.solve_state(&u, None).and_then(|st| Ok((rp.solve_adjoint(&st.y)?, st))) {
                        Ok((adj, st)) => {
                            let ops = rp.operators();
                            for (what, v, p) in [("state", &st.y, &st.p), ("adjoint", &adj.z, &adj.r)] {
                                cg.push(Check::at_most(format!("{tag} {what} continuity"), Some(continuity_defect(ops, v)), 1e-9));
                                cg.push(Check::at_most(format!("{tag} {what} gauge"), Some(gauge_defect(&space, p)), 1e-12));
                            }
                        }
                        Err(e) => cg.push(Check::flag(format!("{tag}: {e}"), false)),
                    }
                }
            }
        }
    }
    let worst = |key: &str| {
        cg.iter().filter(|c| c.name.contains(key)).filter_map(|c| c.value).fold(0.0f64, f64::max)
    };
    let o2 = Outcome::from_checks(&cg)
        .note(format!("worst continuity {:.2e}, worst gauge {:.2e}", worst("continuity"), worst("gauge")));
    outcomes.push((2, "discrete continuity and pressure gauge", o2));

    let worst_in = |checks: &[Check], key: &str| {
        checks.iter().filter(|c| c.name.contains(key)).filter_map(|c| c.value).fold(0.0f64, f64::max)
    };
    let o3 = Outcome::from_checks(matching(&deriv.checks, &["gradient"]))
        .note(format!("worst relative FD error {:.2e}", worst_in(&deriv.checks, "gradient")))
        .runtime(t3, 120);
    outcomes.push((3, "adjoint gradient exactness", o3));
    let o4 = Outcome::from_checks(matching(&deriv.checks, &["second-order"]))
        .note(format!("worst relative error {:.2e}", worst_in(&deriv.checks, "second-order")));
    outcomes.push((4, "second-order identity", o4));
    let o5 = Outcome::from_checks(matching(&deriv.checks, &["transpose"]))
        .note(format!("worst relative gap {:.2e}", worst_in(&deriv.checks, "transpose")));
    outcomes.push((5, "transpose consistency", o5));

    let o6 = Outcome::from_checks(matching(&study_checks, &["converged", "projection identity", "closure identity", "variational inequality"]))
        .note(format!(
            "worst cellwise gap {:.2e}, worst closure gap {:.2e}",
            worst_in(&study_checks, "projection identity"),
            worst_in(&study_checks, "closure identity")
        ));
    outcomes.push((6, "stationarity certificates", o6));

    let o7 = Outcome::from_checks(matching(&study_checks, &["EOC", "bound", "optimization"]))
        .note(study_notes.join("; "))
        .runtime(t7, 900);
    outcomes.push((7, "control convergence rates", o7));

    // 8. Inf-sup diagnostic.
    eprintln!("running inf-sup diagnostic ...");
    let mut betas = vec![];
    let mut infsup_checks = vec![];
    for pair in PAIRS {
        match nsoc::experiments::run_infsup_diagnostic(&ExperimentConfig { pair, levels: Some(vec![4, 8, 16]), ..base.clone() }) {
            Ok(r) => {
                betas.push(format!(
                    "{} beta [{}]",
                    pair.short_name(),
                    r.levels.iter().map(|l| format!("{:.4}", l.beta)).collect::<Vec<_>>().join(", ")
                ));
                infsup_checks.extend(r.checks().iter().cloned());
            }
            Err(e) => infsup_checks.push(Check::flag(format!("{}: {e}", pair.short_name()), false)),
        }
    }
    outcomes.push((8, "inf-sup diagnostic", Outcome::from_checks(&infsup_checks).note(betas.join("; "))));

    // 9. Property suites with a fixed seed.
    eprintln!("running property suites ...");
    let (props, t9) = timed(property_suites);
    outcomes.push((9, "property suites", props.runtime(t9, 60)));

    outcomes.sort_by_key(|o| o.0);
    let mut all = true;
    for (id, title, o) in &outcomes {
        let ok = o.failures.is_empty();
        all &= ok;
        println!("{} {id}. {title}: {} checks ({})", if ok { "PASS" } else { "FAIL" }, o.checked, o.note);
        for f in &o.failures {
            println!("    failed: {f}");
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_917);
    let mut results: Vec<(String, common::Check)> = vec![];
    for d in 1..=8usize {
        for a in 0..=d as u32 {
            for b in 0..=(d as u32 - a) {
                results.push(("quadrature".into(), common::quadrature_exactness(d, a, b)));
            }
        }
    }
    for _ in 0..64 {
        let (s, t) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        for pair in PAIRS {
            results.push(("partition of unity".into(), common::partition_of_unity(pair, s, t)));
        }
    }
    for n in 2..6 {
        for pair in PAIRS {
            let w: Vec<f64> = (0..11).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
            results.push(("antisymmetry".into(), common::trilinear_antisymmetry(pair, n, &w, &v)));
            results.push(("mass/load Gram".into(), common::mass_load_gram(pair, n, &w)));
        }
    }
    for _ in 0..32 {
        let (nx, ny) = (rng.gen_range(1..12), rng.gen_range(1..12));
        let (x, y) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (w, h) = (rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0));
        results.push(("mesh invariants".into(), common::mesh_invariants(nx, ny, x, y, w, h)));
    }
    let total = results.len();
    let failures: Vec<String> =
        results.into_iter().filter_map(|(name, r)| r.err().map(|e| format!("{name}: {e}"))).collect();
    Outcome { failures, checked: total, note: String::new() }
}
