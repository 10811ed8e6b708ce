//! Acceptance suite. Each criterion prints one line with its verdict and
//! timing; the process exits nonzero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use poisred::dgla::{
    audit_action, audit_dgla, compute_d_and_invariance, crossed_module_to_dgla,
    dgla_to_crossed_module, random_spec, zero_constants, ActionData, Constants, DGLASpec,
};
use poisred::gradedalg::{derived_bracket, lie_derivative_bivector, schouten_bracket};
use poisred::liegroupoid::{
    mw_quotient_pair, verify_kxky, CrossedModuleGroups, LiftedAction, PairGroupoid,
};
use poisred::reduction::{
    check_marsden_ratiu, check_stages_a1, check_stages_a2, quotient_context, reduce_bivector,
    reduce_bivector_on_c, ReductionOptions, Stage,
};
use poisred::sample::{random_homogeneous, random_polynomial, random_vector_field};
use poisred::subman::{DistributionSpec, RankVerdict, Sampling, SubmanifoldSpec};
use poisred::verdict::overall;
use poisred::{
    int, rat, GradedContext, GradedFunction, PoissonBivector, Polynomial, Rational, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    if took > limit {
        Err(format!("{what} took {took:?}, limit {limit:?}"))
    } else {
        Ok(())
    }
}

fn r3() -> GradedContext {
    GradedContext::new(&["x1", "x2", "x3"])
}

fn r4() -> GradedContext {
    GradedContext::new(&["x1", "x2", "x3", "x4"])
}

fn presymplectic_verdicts() -> Outcome {
    let sampling = Sampling::default();
    let t = Instant::now();
    let a = SubmanifoldSpec::parse(&r3(), &[], &[("th1", "0"), ("th2", "x1*th3")]).unwrap();
    let ra = a.bracket_matrix_rank_probe(sampling);
    within(Duration::from_secs(1), t, "exconst (a)")?;
    ensure!(
        ra.degree0_rank == 0,
        "exconst (a) degree-0 rank {}",
        ra.degree0_rank
    );
    ensure!(ra.verdict != RankVerdict::Constant, "exconst (a) accepted");

    let t = Instant::now();
    let b =
        SubmanifoldSpec::parse(&r3(), &[("x2", "0")], &[("th1", "0"), ("th2", "x1*th3")]).unwrap();
    let rb = b.bracket_matrix_rank_probe(sampling);
    within(Duration::from_secs(1), t, "exconst (b)")?;
    ensure!(
        rb.verdict == RankVerdict::Constant,
        "exconst (b) rejected: {:?}",
        rb.verdict
    );

    // Contact kernel ker(x1 dx2 + dx3), from generators.
    let t = Instant::now();
    let gens = [
        GradedFunction::parse("th1", &r3()).unwrap(),
        GradedFunction::parse("th2 - x1*th3", &r3()).unwrap(),
    ];
    let rel = SubmanifoldSpec::theta_relations_from_generators(&r3(), &gens).unwrap();
    let contact = SubmanifoldSpec::new(&r3(), Default::default(), rel).unwrap();
    let rc = contact.bracket_matrix_rank_probe(sampling);
    within(Duration::from_secs(1), t, "contact")?;
    ensure!(
        rc.verdict == RankVerdict::NotConstant,
        "contact: {:?}",
        rc.verdict
    );
    let witness = rc
        .gamma_witness
        .ok_or("contact rejected without an involutivity witness")?;
    Ok(format!("ranks 0 / 2, contact witness {witness}"))
}

fn std4() -> PoissonBivector {
    PoissonBivector::parse("th1*th2 + th3*th4", &r4()).unwrap()
}

fn counterexample(alpha: &str) -> (SubmanifoldSpec, Stage) {
    let c = SubmanifoldSpec::parse(
        &r4(),
        &[("x4", "0")],
        &[("th4", &format!("-({alpha})*th1"))],
    )
    .unwrap()
    .with_quotient_names(&["x1", "x2", "x3"])
    .unwrap();
    let stage = Stage {
        a: SubmanifoldSpec::ambient(&r4()),
        d: DistributionSpec::parse(&r4(), &[&format!("th4 + ({alpha})*th1")]).unwrap(),
    };
    (c, stage)
}

fn counterexample_reproduction() -> Outcome {
    let opts = ReductionOptions::default();
    let (c, stage) = counterexample("x2");
    let qctx = quotient_context(&c).unwrap();
    let rep = check_stages_a2(&c, &stage, &std4(), &opts).unwrap();
    let red = rep.reduced.ok_or("alpha = x2: no reduced bivector")?;
    let expected = PoissonBivector::parse("th1*(th2 + x2*th3)", &qctx).unwrap();
    ensure!(
        red.bivector == expected,
        "alpha = x2: reduced {}",
        red.bivector
    );
    ensure!(
        red.jacobi_defect.is_zero(),
        "alpha = x2: defect {}",
        red.jacobi_defect
    );

    let (c, stage) = counterexample("x1");
    let rep = check_stages_a2(&c, &stage, &std4(), &opts).unwrap();
    let red = rep.reduced.ok_or("alpha = x1: no reduced bivector")?;
    let defect = GradedFunction::parse("-2*th1*th2*th3", &qctx).unwrap();
    ensure!(
        red.jacobi_defect == defect,
        "alpha = x1: defect {}",
        red.jacobi_defect
    );
    ensure!(
        rep.conditions
            .iter()
            .any(|c| c.entry.id == "jacobi" && c.entry.verdict == Verdict::Fail),
        "alpha = x1: jacobi not failed"
    );
    Ok(format!("x2: {expected}; x1: defect {defect}"))
}

fn cotangent_reconstruction() -> Outcome {
    let ctx = GradedContext::from_names(
        ["x1", "x2", "y1", "y2"].map(String::from).to_vec(),
        ["Q1", "Q2", "P1", "P2"].map(String::from).to_vec(),
    );
    let vars = ctx.even().clone();
    let p = |s: &str| Polynomial::parse(s, &vars).unwrap();
    // alpha = x1 d1^d2 on the base, as an antisymmetric matrix.
    let alpha = [[p("0"), p("x1")], [p("-x1"), p("0")]];
    let pi = PoissonBivector::parse("Q1*P1 + Q2*P2", &ctx).unwrap();
    // E is spanned by d_{x_j} + 1/2 sum_i alpha_ij d_{y_i}; in graph form the
    // odd momentum coordinates are solved.
    let half = rat(1, 2);
    let mut thetas = Vec::new();
    for (i, row) in alpha.iter().enumerate() {
        let mut img = GradedFunction::zero(&ctx);
        for (j, a) in row.iter().enumerate() {
            img = &img + &GradedFunction::term(&ctx, 1 << j, a.scale(&half));
        }
        thetas.push((format!("P{}", i + 1), img.to_string()));
    }
    let theta_refs: Vec<(&str, &str)> = thetas
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    let c = SubmanifoldSpec::parse(&ctx, &[("y1", "0"), ("y2", "0")], &theta_refs)
        .unwrap()
        .with_quotient_names(&["x1", "x2"])
        .unwrap();
    let rep = check_marsden_ratiu(&c, &pi, &ReductionOptions::default()).unwrap();
    ensure!(
        rep.descends() == Verdict::Pass,
        "descent conditions: {:?}",
        rep.conditions
    );
    let red = rep.reduced.ok_or("no reduced bivector")?;
    // Lifts x_j + 1/2 sum_i alpha_ij y_i.
    for (j, (name, lift)) in red.lifts.iter().enumerate() {
        let mut expected = Polynomial::var(&vars, j);
        for (i, row) in alpha.iter().enumerate() {
            expected = &expected + &(&row[j].scale(&half) * &Polynomial::var(&vars, 2 + i));
        }
        ensure!(
            lift == &expected,
            "lift of {name}: {lift}, expected {expected}"
        );
    }
    let qctx = quotient_context(&c).unwrap();
    let expected = PoissonBivector::parse("x1*Q1*Q2", &qctx).unwrap();
    ensure!(red.bivector == expected, "reduced {}", red.bivector);
    let on_c = reduce_bivector_on_c(&c, &pi).unwrap();
    ensure!(on_c == red.bivector, "restriction route gives {on_c}");
    Ok(format!(
        "lifts {}, {}; bivector {expected}",
        red.lifts[0].1, red.lifts[1].1
    ))
}

fn linear_bivector(ctx: &GradedContext, c: &Constants) -> PoissonBivector {
    let n = c.len();
    let mut pi = PoissonBivector::zero(ctx);
    for i in 0..n {
        for j in i + 1..n {
            let mut p = Polynomial::zero(ctx.even());
            for (k, ck) in c[i][j].iter().enumerate() {
                p = &p + &Polynomial::var(ctx.even(), k).scale(ck);
            }
            pi.set(i, j, p);
        }
    }
    pi
}

fn drinfeld_double() -> Outcome {
    // g = aff(1) with [e1, e2] = e2, and the dual bracket [f1, f2] = f2.
    let lie = poisred::dgla::lie_constants(2, &[(0, 1, 1, int(1))]);
    let dual = lie.clone();
    for (name, c) in [("g", &lie), ("g*", &dual)] {
        let audit = audit_dgla(&DGLASpec::lie_algebra(c.clone()));
        ensure!(
            overall(&audit) == Verdict::Pass,
            "{name} fails its audit: {audit:?}"
        );
    }
    // Double on g + g*: {x_i, y_j} = -c_ik^j y_k + d^jk_i x_k.
    let mut double = zero_constants(4, 4, 4);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                double[i][j][k] = lie[i][j][k].clone();
                double[2 + i][2 + j][2 + k] = dual[i][j][k].clone();
            }
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let y = -lie[i][k][j].clone();
                let x = dual[j][k][i].clone();
                double[i][2 + j][2 + k] += &y;
                double[2 + j][i][2 + k] -= &y;
                double[i][2 + j][k] += &x;
                double[2 + j][i][k] -= &x;
            }
        }
    }
    let audit = audit_dgla(&DGLASpec::lie_algebra(double.clone()));
    ensure!(
        overall(&audit) == Verdict::Pass,
        "double fails its audit: {audit:?}"
    );

    let ctx = GradedContext::new(&["x1", "x2", "y1", "y2"]);
    let pi = linear_bivector(&ctx, &double);
    let c = SubmanifoldSpec::parse(
        &ctx,
        &[("y1", "0"), ("y2", "0")],
        &[("th3", "0"), ("th4", "0")],
    )
    .unwrap()
    .with_quotient_names(&["x1", "x2"])
    .unwrap();
    let opts = ReductionOptions::default();
    let mr = check_marsden_ratiu(&c, &pi, &opts).unwrap();
    ensure!(
        mr.verdict_of("sharpEann_sub_TC") == Some(Verdict::Fail),
        "single-step check gives {:?}",
        mr.verdict_of("sharpEann_sub_TC")
    );
    let stage = Stage {
        a: SubmanifoldSpec::ambient(&ctx),
        d: DistributionSpec::parse(&ctx, &["th3", "th4"]).unwrap(),
    };
    let a2 = check_stages_a2(&c, &stage, &pi, &opts).unwrap();
    ensure!(a2.overall() == Verdict::Pass, "stages: {:?}", a2.conditions);
    let qctx = quotient_context(&c).unwrap();
    let expected = linear_bivector(&qctx, &lie);
    let red = a2.reduced.ok_or("no reduced bivector")?;
    ensure!(
        red.bivector == expected,
        "reduced {}, expected {expected}",
        red.bivector
    );
    Ok(format!("pi = {pi}; reduced {expected}"))
}

fn random_bivector(rng: &mut ChaCha8Rng, ctx: &GradedContext) -> PoissonBivector {
    poisred::sample::random_bivector(rng, ctx, 2, 3)
}

/// Coordinate formula for the Lie derivative of a bivector.
fn lie_derivative_oracle(x: &[Polynomial], pi: &PoissonBivector) -> PoissonBivector {
    let n = x.len();
    let mut out = PoissonBivector::zero(pi.context());
    for i in 0..n {
        for j in i + 1..n {
            let mut v = Polynomial::zero(pi.context().even());
            for k in 0..n {
                v = &v + &(&x[k] * &pi.get(i, j).diff_index(k));
                v = &v - &(&pi.get(k, j) * &x[i].diff_index(k));
                v = &v - &(&pi.get(i, k) * &x[j].diff_index(k));
            }
            out.set(i, j, v);
        }
    }
    out
}

fn xfg_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_5);
    for case in 0..200 {
        let n = rng.random_range(2..=4);
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let ctx = GradedContext::new(&refs);
        let x = random_vector_field(&mut rng, &ctx, 2, 3);
        let f = random_polynomial(&mut rng, ctx.even(), 2, 3);
        let g = random_polynomial(&mut rng, ctx.even(), 2, 3);
        let pi = random_bivector(&mut rng, &ctx);
        let apply = |p: &Polynomial| GradedFunction::apply_vector_field(&x, p).unwrap();
        let lxpi =
            PoissonBivector::from_function(&lie_derivative_bivector(&x, &pi).unwrap()).unwrap();
        let oracle = lie_derivative_oracle(&x.vector_components().unwrap(), &pi);
        ensure!(
            lxpi == oracle,
            "case {case}: L_X pi = {lxpi}, coordinate formula {oracle}"
        );
        let lhs = apply(&pi.contract(&f, &g));
        let rhs =
            &(&lxpi.contract(&f, &g) + &pi.contract(&apply(&f), &g)) + &pi.contract(&f, &apply(&g));
        ensure!(lhs == rhs, "case {case}: X{{f,g}} - rhs = {}", &lhs - &rhs);
    }
    within(Duration::from_secs(30), start, "200 cases")?;
    Ok(format!(
        "200 cases in {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn sign(p: usize, q: usize) -> Rational {
    if (p * q).is_multiple_of(2) {
        int(1)
    } else {
        int(-1)
    }
}

fn bracket_properties() -> Outcome {
    let ctx = GradedContext::new(&["x1", "x2", "x3"]);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5c40);
    let br = |a: &GradedFunction, b: &GradedFunction| schouten_bracket(a, b).unwrap();
    for case in 0..500 {
        let (p, q, r) = (
            rng.random_range(0..4),
            rng.random_range(0..4),
            rng.random_range(0..4),
        );
        let a = random_homogeneous(&mut rng, &ctx, p, 2, 3);
        let b = random_homogeneous(&mut rng, &ctx, q, 2, 3);
        let c = random_homogeneous(&mut rng, &ctx, r, 2, 3);
        ensure!(
            br(&a, &b) == -br(&b, &a).scale(&sign(p + 1, q + 1)),
            "case {case}: skew symmetry fails for {a} and {b}"
        );
        let jacobi = &br(&br(&a, &b), &c) + &br(&b, &br(&a, &c)).scale(&sign(p + 1, q + 1));
        ensure!(br(&a, &br(&b, &c)) == jacobi, "case {case}: Jacobi fails");
        let leibniz = &(&br(&a, &b) * &c).scale(&sign(p + 1, r)) + &(&b * &br(&a, &c));
        ensure!(br(&a, &(&b * &c)) == leibniz, "case {case}: Leibniz fails");
    }
    for case in 0..500 {
        let pi = random_bivector(&mut rng, &ctx);
        let f = random_polynomial(&mut rng, ctx.even(), 2, 3);
        let g = random_polynomial(&mut rng, ctx.even(), 2, 3);
        let derived = derived_bracket(
            &pi.to_function(),
            &GradedFunction::from_poly(&ctx, f.clone()),
            &GradedFunction::from_poly(&ctx, g.clone()),
        )
        .unwrap();
        // pi^{ij} df/dx_i dg/dx_j summed over all ordered pairs.
        let mut oracle = Polynomial::zero(ctx.even());
        for i in 0..3 {
            for j in 0..3 {
                let coeff = match i.cmp(&j) {
                    std::cmp::Ordering::Less => pi.get(i, j),
                    std::cmp::Ordering::Greater => -&pi.get(j, i),
                    std::cmp::Ordering::Equal => continue,
                };
                oracle = &oracle + &(&coeff * &(&f.diff_index(i) * &g.diff_index(j)));
            }
        }
        ensure!(
            derived == oracle,
            "case {case}: derived bracket {derived}, contraction {oracle}"
        );
    }
    Ok("500 bracket triples, 500 derived brackets".into())
}

fn dgla_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd91a);
    for case in 0..50 {
        let spec = random_spec(&mut rng);
        ensure!(
            spec.dim_g <= 3 && spec.dim_h <= 3,
            "case {case}: dimensions too large"
        );
        let audit = audit_dgla(&spec);
        ensure!(
            overall(&audit) == Verdict::Pass,
            "case {case}: input fails {audit:?}"
        );
        let cm = dgla_to_crossed_module(&spec).map_err(|e| format!("case {case}: {e}"))?;
        let back = crossed_module_to_dgla(&cm).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(back == spec, "case {case}: round trip changed the spec");
        let cm_audit = poisred::dgla::audit_crossed_module(&cm);
        ensure!(
            overall(&cm_audit) == Verdict::Pass,
            "case {case}: crossed module fails {cm_audit:?}"
        );
    }
    Ok("50 random specs".into())
}

fn line_data(j0: &str) -> (ActionData, DGLASpec) {
    let m = GradedContext::new(&["y1", "y2", "y3", "y4"]);
    let pi = PoissonBivector::parse("th1*th2 + th3*th4", &m).unwrap();
    let data = ActionData {
        j0: vec![Polynomial::parse(j0, m.even()).unwrap()],
        j1: vec![GradedFunction::parse("-th3", &m).unwrap()],
        pi,
    };
    (data, DGLASpec::adjoint(zero_constants(1, 1, 1), int(1)))
}

fn action_audit() -> Outcome {
    let (data, spec) = line_data("y4");
    let audit = audit_action(&data, &spec).unwrap();
    ensure!(overall(&audit) == Verdict::Pass, "audit: {audit:?}");
    let d = compute_d_and_invariance(&data, Sampling::default()).unwrap();
    ensure!(
        overall(&d.verdicts) == Verdict::Pass,
        "invariance: {:?}",
        d.verdicts
    );
    let (bad, spec) = line_data("y4 + y1");
    let audit = audit_action(&bad, &spec).unwrap();
    let failed = audit
        .iter()
        .find(|e| e.verdict == Verdict::Fail)
        .ok_or("perturbed moment map passes")?;
    let witness = failed.witness.clone().ok_or("failure without witness")?;
    Ok(format!(
        "{} passes; perturbed fails {}: {witness}",
        audit.len(),
        failed.id
    ))
}

fn line_action() -> (LiftedAction, f64) {
    let (data, spec) = line_data("y4");
    let groups = CrossedModuleGroups::vector_groups(&spec).unwrap();
    let (pair, cal) = PairGroupoid::calibrated(&data.pi, 16, 7).unwrap();
    (
        LiftedAction::new(data, groups, pair).unwrap(),
        cal.deviation,
    )
}

fn two_group_law() -> Outcome {
    let start = Instant::now();
    let (action, calibration) = line_action();
    ensure!(calibration <= 1e-9, "calibration deviation {calibration:e}");
    let stats = verify_kxky(&action, 100, 7).unwrap();
    ensure!(
        stats.misclassified == 0,
        "{} misclassified",
        stats.misclassified
    );
    ensure!(stats.composable > 0, "no composable samples");
    ensure!(
        stats.max_deviation <= 1e-8,
        "deviation {:e}",
        stats.max_deviation
    );
    within(Duration::from_secs(10), start, "2-group law")?;
    Ok(format!(
        "{} composable of 100, max deviation {:.1e}, calibration {calibration:.1e}",
        stats.composable, stats.max_deviation
    ))
}

fn mw_quotient() -> Outcome {
    let (action, _) = line_action();
    let q = mw_quotient_pair(&action).unwrap();
    for (label, quotient) in [("level-set", &q.marsden_weinstein), ("global", &q.global)] {
        let b = quotient
            .bivector
            .as_ref()
            .ok_or(format!("{label}: no bivector"))?;
        let expected = PoissonBivector::parse("-dx1*dx2 + dy1*dy2", b.context()).unwrap();
        ensure!(b == &expected, "{label}: {b}");
        ensure!(
            quotient.multiplicative.verdict == Verdict::Pass,
            "{label}: not multiplicative"
        );
    }

    let ctx = GradedContext::new(&["x1", "y1", "x2", "y2"]);
    let pi = PoissonBivector::parse("th1*th2 + th3*th4", &ctx).unwrap();
    let c = SubmanifoldSpec::parse(
        &ctx,
        &[("x2", "0"), ("y2", "0")],
        &[("th1", "0"), ("th3", "0"), ("th4", "-x1*th2")],
    )
    .unwrap()
    .with_quotient_names(&["y1"])
    .unwrap();
    let stage = Stage {
        a: SubmanifoldSpec::parse(&ctx, &[("y2", "0")], &[]).unwrap(),
        d: DistributionSpec::parse(&ctx, &["th1", "th3"]).unwrap(),
    };
    let rep = check_stages_a1(&c, &stage, &pi, &ReductionOptions::default()).unwrap();
    for cond in &rep.conditions {
        ensure!(
            cond.entry.verdict == Verdict::Pass,
            "two-stage example: {:?}",
            cond.entry
        );
    }
    let lift = reduce_bivector(&c, &pi, &ReductionOptions::default()).unwrap();
    Ok(format!(
        "both quotients -dx1*dx2 + dy1*dy2; {} stage verdicts pass, lift {}",
        rep.conditions.len(),
        lift.lifts[0].1
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("presymplectic verdicts", presymplectic_verdicts),
        ("counterexample reproduction", counterexample_reproduction),
        ("cotangent reconstruction", cotangent_reconstruction),
        ("Drinfeld double", drinfeld_double),
        ("Lie derivative identity", xfg_identity),
        ("bracket property suite", bracket_properties),
        ("DGLA / crossed module round trip", dgla_round_trip),
        ("action audit", action_audit),
        ("Lie 2-group law", two_group_law),
        ("Marsden-Weinstein quotient", mw_quotient),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!(
                "criterion {:>2} PASS  {name} ({secs:.2} s): {detail}",
                k + 1
            ),
            Err(why) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.2} s): {why}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
