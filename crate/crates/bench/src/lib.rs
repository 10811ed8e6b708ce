//! Inputs shared by the criterion benches.

use poisred::dgla::{zero_constants, ActionData, DGLASpec};
use poisred::liegroupoid::{CrossedModuleGroups, LiftedAction, PairGroupoid};
use poisred::reduction::Stage;
use poisred::subman::{DistributionSpec, SubmanifoldSpec};
use poisred::{int, GradedContext, GradedFunction, PoissonBivector, Polynomial};

pub fn euclidean(n: usize) -> GradedContext {
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    GradedContext::new(&refs)
}

/// Darboux bivector on R^{2m}.
pub fn darboux(m: usize) -> PoissonBivector {
    let ctx = euclidean(2 * m);
    let terms: Vec<String> = (0..m)
        .map(|i| format!("th{}*th{}", 2 * i + 1, 2 * i + 2))
        .collect();
    PoissonBivector::parse(&terms.join(" + "), &ctx).unwrap()
}

/// Constraint and stage of the translation counterexample with coefficient `alpha`.
pub fn translation_reduction(alpha: &str) -> (SubmanifoldSpec, Stage, PoissonBivector) {
    let ctx = euclidean(4);
    let c = SubmanifoldSpec::parse(&ctx, &[("x4", "0")], &[("th4", &format!("-({alpha})*th1"))])
        .unwrap()
        .with_quotient_names(&["x1", "x2", "x3"])
        .unwrap();
    let stage = Stage {
        a: SubmanifoldSpec::ambient(&ctx),
        d: DistributionSpec::parse(&ctx, &[&format!("th4 + ({alpha})*th1")]).unwrap(),
    };
    (c, stage, darboux(2))
}

/// Hamiltonian translation action of the line on R^4, lifted to the pair groupoid.
pub fn line_action() -> LiftedAction {
    let m = euclidean(4);
    let data = ActionData {
        j0: vec![Polynomial::parse("x4", m.even()).unwrap()],
        j1: vec![GradedFunction::parse("-th3", &m).unwrap()],
        pi: darboux(2),
    };
    let spec = DGLASpec::adjoint(zero_constants(1, 1, 1), int(1));
    let groups = CrossedModuleGroups::vector_groups(&spec).unwrap();
    let (pair, _) = PairGroupoid::calibrated(&data.pi, 16, 7).unwrap();
    LiftedAction::new(data, groups, pair).unwrap()
}
