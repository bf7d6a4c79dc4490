use ltadmm::compressors::CompressorSpec;
use ltadmm::estimators::EstimatorMode;
use ltadmm::objectives::{generate_logistic, generate_quadratic, quadratic_optimum, LocalProblem};
use ltadmm::oracle::{solve_reference, CompactForm, ExactAdmm};
use ltadmm::protocol::{Hyperparameters, Network};
use ltadmm::topology::Topology;

fn exact(rho: f64, r: f64, eta: Option<f64>) -> Hyperparameters {
    Hyperparameters {
        rho,
        r,
        eta,
        estimator: EstimatorMode::Full,
        ..Hyperparameters::reference(CompressorSpec::Identity)
    }
}

fn replay(
    topology: Topology,
    problems: Vec<LocalProblem>,
    hyper: Hyperparameters,
    rounds: usize,
) -> f64 {
    let dim = problems[0].dimension();
    let compact = CompactForm::new(&topology, dim).unwrap();
    let mut state = compact.zero_state();
    let mut net = Network::new(topology, problems.clone(), hyper, 0).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..rounds {
        net.run_round().unwrap();
        state = compact.step(&state, &hyper, &problems).unwrap();
        worst = worst.max(compact.max_deviation(&state, &net.snapshot()).unwrap());
    }
    worst
}

#[test]
fn compact_form_matches_protocol_on_several_graphs() {
    let cases = [
        (Topology::ring(5).unwrap(), exact(0.1, 1.0, None)),
        (Topology::complete(4).unwrap(), exact(0.5, 0.7, None)),
        (Topology::path(6).unwrap(), exact(0.2, 1.3, Some(0.6))),
        (
            Topology::from_edges(5, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)]).unwrap(),
            exact(1.0, 1.0, None),
        ),
    ];
    for (t, hyper) in cases {
        let n = t.node_count();
        let problems = generate_quadratic(n, 3, 1, 7).unwrap();
        let gap = replay(t, problems, hyper, 100);
        assert!(gap <= 1e-10, "deviation {gap}");
    }
}

#[test]
fn compact_form_matches_protocol_on_logistic_costs() {
    let problems = generate_logistic(5, 3, 8, 0.1, 3).unwrap();
    let gap = replay(
        Topology::ring(5).unwrap(),
        problems,
        exact(0.1, 1.0, None),
        60,
    );
    assert!(gap <= 1e-10, "deviation {gap}");
}

#[test]
fn compact_form_detects_a_different_trajectory() {
    let t = Topology::ring(5).unwrap();
    let problems = generate_quadratic(5, 3, 1, 7).unwrap();
    let compact = CompactForm::new(&t, 3).unwrap();
    let mut state = compact.zero_state();
    let mut net = Network::new(t, problems.clone(), exact(0.1, 1.0, None), 0).unwrap();
    for _ in 0..10 {
        net.run_round().unwrap();
        state = compact
            .step(&state, &exact(0.2, 1.0, None), &problems)
            .unwrap();
    }
    assert!(compact.max_deviation(&state, &net.snapshot()).unwrap() > 1e-6);
}

#[test]
fn compact_form_refuses_stochastic_settings() {
    let t = Topology::ring(4).unwrap();
    let problems = generate_quadratic(4, 2, 3, 1).unwrap();
    let compact = CompactForm::new(&t, 2).unwrap();
    let hyper = Hyperparameters::reference(CompressorSpec::QBit { bits: 4 });
    assert!(compact
        .step(&compact.zero_state(), &hyper, &problems)
        .is_err());
}

#[test]
fn exact_admm_reaches_closed_form_optimum() {
    for (t, rho) in [
        (Topology::ring(8).unwrap(), 0.1),
        (Topology::complete(5).unwrap(), 1.0),
        (Topology::path(4).unwrap(), 0.5),
    ] {
        let n = t.node_count();
        let problems = generate_quadratic(n, 4, 1, 99).unwrap();
        let optimum = quadratic_optimum(&problems).unwrap();
        let mut admm = ExactAdmm::new(t, &problems, rho).unwrap();
        for _ in 0..20_000 {
            admm.step();
        }
        assert!(admm.distance_to(&optimum) <= 1e-8, "rho {rho}");
    }
}

#[test]
fn protocol_agents_agree_with_centralized_solution() {
    let problems = generate_logistic(6, 4, 30, 0.1, 12).unwrap();
    let reference = solve_reference(&problems, 1e-12, 1_000_000).unwrap();
    let hyper = Hyperparameters::reference(CompressorSpec::RandK { k: 2 });
    let mut net = Network::new(Topology::ring(6).unwrap(), problems, hyper, 4).unwrap();
    for _ in 0..1500 {
        net.run_round().unwrap();
    }
    for x in net.primal_iterates() {
        assert!((x - &reference.x).norm() <= 1e-6);
    }
}
