use ltadmm::compressors::CompressorSpec;
use ltadmm::estimators::{EstimatorMode, SagaTable};
use ltadmm::harness::{parse_csv, ExperimentConfig, RoundMetrics, CSV_HEADER};
use ltadmm::objectives::generate_logistic;
use ltadmm::protocol::{parse_snapshots, Hyperparameters, Network};
use ltadmm::rng::{Purpose, RandomStream};
use ltadmm::topology::Topology;
use ltadmm::Vector;
use proptest::prelude::*;

/// Random connected graph: a random spanning tree plus extra edges.
fn connected_graph() -> impl Strategy<Value = Topology> {
    (2usize..12)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
            let extra = proptest::collection::vec((0..n, 0..n), 0..2 * n);
            (Just(n), parents, extra)
        })
        .prop_map(|(n, parents, extra)| {
            let mut edges: Vec<(usize, usize)> = parents
                .iter()
                .enumerate()
                .map(|(i, &p)| (p, i + 1))
                .collect();
            for (a, b) in extra {
                let e = (a.min(b), a.max(b));
                if a != b && !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == e) {
                    edges.push(e);
                }
            }
            Topology::from_edges(n, &edges).unwrap()
        })
}

fn compressor() -> impl Strategy<Value = CompressorSpec> {
    prop_oneof![
        Just(CompressorSpec::Identity),
        (1u32..=8).prop_map(|bits| CompressorSpec::QBit { bits }),
        (1usize..=3).prop_map(|k| CompressorSpec::RandK { k }),
    ]
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-5.0f64..5.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn degree_sum_is_twice_edge_count(t in connected_graph()) {
        prop_assert_eq!(t.degrees().iter().sum::<usize>(), 2 * t.edge_count());
        prop_assert_eq!(t.directed_edge_count(), 2 * t.edge_count());
        for i in 0..t.node_count() {
            for &j in t.neighbors(i) {
                prop_assert!(t.neighbors(j).contains(&i));
            }
        }
    }

    #[test]
    fn laplacian_annihilates_ones(t in connected_graph()) {
        let l = t.laplacian();
        let ones = Vector::from_element(t.node_count(), 1.0);
        prop_assert!((&l * ones).amax() == 0.0);
        prop_assert_eq!(l.clone(), l.transpose());
        let info = t.spectral_info().unwrap();
        prop_assert!(info.lambda_min_nonzero > 0.0);
        prop_assert!(info.lambda_max <= 2.0 * info.max_degree as f64 + 1e-9);
    }

    #[test]
    fn edge_list_round_trip(t in connected_graph()) {
        let back = Topology::parse_edge_list(&t.to_edge_list(), Some(t.node_count())).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn ring_spectrum(n in 3usize..=20) {
        let info = Topology::ring(n).unwrap().spectral_info().unwrap();
        let pi = std::f64::consts::PI;
        let low = 2.0 - 2.0 * (2.0 * pi / n as f64).cos();
        let high = 2.0 - 2.0 * (2.0 * pi * (n / 2) as f64 / n as f64).cos();
        prop_assert!((info.lambda_min_nonzero - low).abs() <= 1e-9);
        prop_assert!((info.lambda_max - high).abs() <= 1e-9);
    }

    #[test]
    fn compressing_zero_gives_zero(spec in compressor(), seed in any::<u64>()) {
        let mut rng = RandomStream::new(seed, 0, 0, Purpose::CompressX);
        let c = spec.compress(&Vector::zeros(5), &mut rng).unwrap();
        prop_assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn compressed_support_and_range(spec in compressor(), x in vector(5), seed in any::<u64>()) {
        let x = Vector::from_vec(x);
        let mut rng = RandomStream::new(seed, 1, 2, Purpose::CompressZ { neighbor: 3 });
        let c = spec.compress(&x, &mut rng).unwrap();
        match spec {
            CompressorSpec::Identity => prop_assert_eq!(c, x),
            CompressorSpec::QBit { bits } => {
                let norm = x.amax();
                let levels = f64::from(2u32.pow(bits - 1));
                for (ci, xi) in c.iter().zip(x.iter()) {
                    prop_assert!(ci.abs() <= norm * (1.0 + 1e-12));
                    prop_assert!(*ci == 0.0 || ci.signum() == xi.signum());
                    let level = ci.abs() / norm * levels;
                    prop_assert!((level - level.round()).abs() <= 1e-9);
                }
            }
            CompressorSpec::RandK { k } => {
                let kept = c.iter().zip(x.iter()).filter(|(ci, _)| **ci != 0.0).count();
                prop_assert!(kept <= k);
                for (ci, xi) in c.iter().zip(x.iter()) {
                    prop_assert!(*ci == 0.0 || *ci == 5.0 / k as f64 * xi);
                }
            }
        }
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), agent in 0usize..50, round in any::<u64>()) {
        let mut a = RandomStream::new(seed, agent, round, Purpose::Batch);
        let mut b = RandomStream::new(seed, agent, round, Purpose::Batch);
        let mut c = RandomStream::new(seed, agent, round, Purpose::CompressX);
        let (xa, xb, xc): (Vec<f64>, Vec<f64>, Vec<f64>) = (
            (0..4).map(|_| a.uniform()).collect(),
            (0..4).map(|_| b.uniform()).collect(),
            (0..4).map(|_| c.uniform()).collect(),
        );
        prop_assert_eq!(&xa, &xb);
        prop_assert_ne!(&xa, &xc);
    }

    #[test]
    fn saga_estimate_exact_after_reset(seed in 0u64..1000, m in 2usize..8, h in 0usize..8) {
        let p = generate_logistic(1, 3, m, 0.1, seed).unwrap().remove(0);
        let x = Vector::from_fn(3, |i, _| (seed as f64 * 0.37 + i as f64).sin());
        let mut table = SagaTable::new(3, m);
        table.reset(&p, &x).unwrap();
        let e = table.estimate(&p, &x, &[h % m]).unwrap();
        prop_assert!((e - p.full_gradient(&x)).amax() <= 1e-12);
    }

    #[test]
    fn dual_sum_identity_holds(t in connected_graph(), spec in compressor(), seed in 0u64..1000) {
        let n = t.node_count();
        let problems = generate_logistic(n, 3, 6, 0.1, seed).unwrap();
        let hyper = Hyperparameters {
            estimator: EstimatorMode::Saga { batch_size: 2 },
            ..Hyperparameters::reference(spec)
        };
        let mut net = Network::new(t, problems, hyper, seed).unwrap();
        for _ in 0..15 {
            let stats = net.run_round().unwrap();
            prop_assert!(stats.dual_residual <= 1e-9 * (1.0 + stats.stacked_x_norm));
            prop_assert!(net.copy_mismatches().is_empty());
        }
    }

    #[test]
    fn snapshot_text_round_trip(seed in 0u64..1000, rounds in 0usize..4) {
        let problems = generate_logistic(4, 2, 5, 0.1, seed).unwrap();
        let hyper = Hyperparameters::reference(CompressorSpec::QBit { bits: 3 });
        let mut net = Network::new(Topology::ring(4).unwrap(), problems, hyper, seed).unwrap();
        for _ in 0..rounds {
            net.run_round().unwrap();
        }
        let snap = net.snapshot();
        let back = parse_snapshots(&snap.to_text()).unwrap();
        prop_assert_eq!(back.len(), 1);
        for (label, v) in &snap.vectors {
            let w = back[0].get(label).unwrap();
            prop_assert!(v.iter().zip(w.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn csv_round_trip(rows in proptest::collection::vec((any::<u32>(), -1e300f64..1e300, 0.0f64..1e6, any::<u32>()), 1..20)) {
        let mut text = format!("{CSV_HEADER}\n");
        let metrics: Vec<RoundMetrics> = rows
            .iter()
            .map(|&(round, a, b, bits)| RoundMetrics {
                round: u64::from(round),
                model_time: b,
                grad_norm_sq: a.abs(),
                consensus_err: b / 3.0,
                dist_to_opt: a,
                bits_sent: u64::from(bits),
                dual_residual: b * 1e-20,
                stacked_x_norm: f64::NAN,
            })
            .collect();
        for m in &metrics {
            text += &format!(
                "{},{},{},{},{},{},{}\n",
                m.round, m.model_time, m.grad_norm_sq, m.consensus_err, m.dist_to_opt, m.bits_sent, m.dual_residual
            );
        }
        let back = parse_csv(&text).unwrap();
        prop_assert_eq!(back.len(), metrics.len());
        for (a, b) in metrics.iter().zip(&back) {
            prop_assert_eq!(a.round, b.round);
            prop_assert_eq!(a.bits_sent, b.bits_sent);
            for (x, y) in [
                (a.model_time, b.model_time),
                (a.grad_norm_sq, b.grad_norm_sq),
                (a.consensus_err, b.consensus_err),
                (a.dist_to_opt, b.dist_to_opt),
                (a.dual_residual, b.dual_residual),
            ] {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn config_text_round_trip(
        seed in any::<u64>(),
        rounds in 1u64..100_000,
        tau in 1usize..20,
        rho in 0.01f64..10.0,
        gamma in 0.001f64..1.0,
        beta in 0.001f64..1.0,
        spec in compressor(),
        n in 3usize..30,
    ) {
        let text = format!(
            "seed = {seed}\nrounds = {rounds}\n[topology]\nspec = \"ring:{n}\"\n[problem]\nkind = \"quadratic\"\n\
             [algorithm]\ntau = {tau}\nrho = {rho}\ngamma = {gamma}\nbeta = {beta}\ncompressor = \"{spec}\"\n"
        );
        let config = ExperimentConfig::parse(&text).unwrap();
        let again = ExperimentConfig::parse(&config.to_text().unwrap()).unwrap();
        prop_assert_eq!(config, again);
    }
}
