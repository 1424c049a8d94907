use nle::config::{ExperimentConfig, GridParams, KernelSource, ProcessParams, SourceDesc, Suite};
use proptest::prelude::*;

fn kernel_source() -> impl Strategy<Value = KernelSource> {
    prop_oneof![
        (0.01f64..1.99).prop_map(|sigma| KernelSource::Fractional { sigma }),
        (0.01f64..1.99, 0.0f64..1.0, 1.0f64..5.0, proptest::option::of(any::<u64>()))
            .prop_map(|(sigma, nu, lambda, seed)| KernelSource::Random { sigma, nu, lambda, seed }),
        "[a-z]{1,8}\\.json".prop_map(|s| KernelSource::File { path: s.into() }),
    ]
}

fn source() -> impl Strategy<Value = SourceDesc> {
    prop_oneof![
        (proptest::collection::vec(-3.0f64..3.0, 0..2), 0.1f64..3.0)
            .prop_map(|(center, width)| SourceDesc::Bump { center, width }),
        (1usize..40, 0.1f64..4.0, proptest::option::of(any::<u64>()))
            .prop_map(|(k_max, width, seed)| SourceDesc::Noise { k_max, width, seed }),
        proptest::collection::vec(-8.0f64..8.0, 1..2).prop_map(|xi| SourceDesc::Mode { xi }),
    ]
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        any::<u64>(),
        proptest::sample::subsequence(Suite::ALL.to_vec(), 0..=6),
        proptest::collection::vec(kernel_source(), 0..4),
        proptest::collection::vec(source(), 0..3),
        proptest::collection::vec(1e-4f64..1e4, 1..6),
        proptest::collection::vec(1.01f64..10.0, 1..4),
        any::<bool>(),
        (1e-14f64..1e-4, 1e-4f64..0.5, 1e-3f64..1.0, 2usize..1_000_000),
        proptest::option::of("[a-z]{1,6}"),
    )
        .prop_map(|(seed, suites, kernels, sources, lambdas, ps, drift, (tol, eps, t, paths), out)| ExperimentConfig {
            schema: 1,
            seed,
            suites,
            grid: GridParams { d: 1, half_period: 16.0, n: 512 },
            identity_grid: GridParams { d: 1, half_period: 6.0, n: 48 },
            identity_sources: sources.clone(),
            kernels,
            sources,
            lambdas,
            ps,
            kappas: vec![2.0, 4.0],
            radii: vec![0.25, 0.5],
            drift,
            tol,
            process: ProcessParams { eps, t, paths, xi: 1.0 / 3.0 },
            out_dir: out.map(Into::into),
        })
}

proptest! {
    #[test]
    fn config_round_trips_losslessly(cfg in config()) {
        let text = cfg.to_json();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_json(), text);
    }
}
