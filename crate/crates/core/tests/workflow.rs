use strelcast::bayes::{gibbs_run, lpds, predictive_draws, read_archive, write_archive, McmcConfig, ModelConfig, Variant};
use strelcast::par;
use strelcast::pipeline::SyntheticSpec;
use strelcast::strel::{build_p1, build_p2, build_p3, build_p4, monitor, parse, parse_script, Mode};
use strelcast::{Panel, SpatialGrid, StaticLabels};

fn small_data() -> (Panel, SpatialGrid, StaticLabels, Vec<f64>) {
    let mut s = SyntheticSpec::default_7x7();
    s.rows = 3;
    s.cols = 4;
    s.n_times = 80;
    s.truth.assignments = vec![0; 12];
    s.hospitals = vec![5];
    let (panel, spec) = s.generate().unwrap();
    let (grid, labels) = spec.build().unwrap();
    (panel, grid, labels, s.frequencies)
}

#[test]
fn scripts_and_builders_agree() {
    let (panel, grid, labels, _) = small_data();
    let script = "\
# the four requirements at c = 500
P1 := y > 500 -> F[1,3] !(y > 500)
P2 := F[1,1] (y > 500 -> somewhere[1] !(y > 500))
P3 := G[1,3] somewhere[1] !(y > 500)
P4 := label(hospital) | (G[0,1] !(y > 500) & somewhere[1] label(hospital))
";
    let parsed = parse_script(script, Some(&labels)).unwrap();
    let built = [
        build_p1(500.0, 3).unwrap(),
        build_p2(500.0, 1, 1).unwrap(),
        build_p3(500.0, 3, 1).unwrap(),
        build_p4(500.0, 1).unwrap(),
    ];
    let trace = panel.trace_from(10, 4).unwrap();
    for (nf, b) in parsed.iter().zip(&built) {
        assert_eq!(&nf.formula, b, "{}", nf.name);
        assert_eq!(parse(&b.to_string()).unwrap(), *b);
        for mode in [Mode::Boolean, Mode::Robustness] {
            assert_eq!(
                monitor(&nf.formula, &trace, &grid, &labels, mode).unwrap(),
                monitor(b, &trace, &grid, &labels, mode).unwrap()
            );
        }
    }
}

#[test]
fn archived_fit_predicts_like_the_original() {
    let (panel, grid, _, freqs) = small_data();
    let train = panel.window(0, 70).unwrap();
    let cfg = ModelConfig {
        mcmc: McmcConfig {
            iters: 80,
            burnin: 40,
            thin: 4,
            keep_latent: false,
        },
        seed: 9,
        ..ModelConfig::new(Variant::CarAr, freqs)
    };
    let fit = gibbs_run(&train, &grid, &cfg).unwrap();
    assert_eq!(fit.origin_time, 69);
    let dir = tempfile::tempdir().unwrap();
    write_archive(&fit, dir.path()).unwrap();
    let back = read_archive(dir.path(), &grid).unwrap();

    let a = predictive_draws(&fit, 3, 1).unwrap();
    let b = predictive_draws(&back, 3, 1).unwrap();
    let c = par::with_workers(1, || predictive_draws(&fit, 3, 1).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_ne!(a, predictive_draws(&fit, 3, 2).unwrap());
    // time 0 of every trajectory is the last training value
    for t in &a {
        assert_eq!(t.at_time(0), train.column(69));
    }
    let obs = panel.column(70);
    assert_eq!(lpds(&fit, 1, &obs).unwrap(), lpds(&back, 1, &obs).unwrap());
}

#[test]
fn same_seed_same_fit() {
    let (panel, grid, _, freqs) = small_data();
    let mut cfg = ModelConfig::new(Variant::CarArBnp, freqs);
    cfg.bnp = Some(Default::default());
    cfg.mcmc = McmcConfig {
        iters: 30,
        burnin: 10,
        thin: 2,
        keep_latent: true,
    };
    let a = gibbs_run(&panel, &grid, &cfg).unwrap();
    let b = gibbs_run(&panel, &grid, &cfg).unwrap();
    assert_eq!(a.draws, b.draws);
    assert!(a.draws.iter().all(|d| d.w.as_ref().is_some_and(|w| w.len() == 12 * 80)));
}
