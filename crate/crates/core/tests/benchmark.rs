use rasch_spectral::eval::{parse_grid, run_scaling_benchmark, BenchMethod, BenchmarkConfig, SlopeAxis};

fn config(grid: &str, trials: usize, seed: u64, methods: Vec<BenchMethod>) -> BenchmarkConfig {
    BenchmarkConfig::new(parse_grid(grid).unwrap(), trials, seed, methods)
}

#[test]
fn identical_config_gives_identical_report() {
    let methods = vec![BenchMethod::Spectral, BenchMethod::RowSum, BenchMethod::Pmle];
    let a = run_scaling_benchmark(&config("n=150,300;m=6;p=0.7,1", 6, 42, methods.clone())).unwrap();
    let b = run_scaling_benchmark(&config("n=150,300;m=6;p=0.7,1", 6, 42, methods)).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let c = run_scaling_benchmark(&config("n=150,300;m=6;p=0.7,1", 6, 43, vec![BenchMethod::Spectral])).unwrap();
    assert_ne!(a.cell(BenchMethod::Spectral, 150, 6, 1.0).unwrap().l2_errors, c.cell(BenchMethod::Spectral, 150, 6, 1.0).unwrap().l2_errors);
}

#[test]
fn doubling_trials_keeps_prefix() {
    let methods = vec![BenchMethod::Spectral, BenchMethod::Eigenvector];
    let short = run_scaling_benchmark(&config("n=200;m=8;p=0.5", 5, 9, methods.clone())).unwrap();
    let long = run_scaling_benchmark(&config("n=200;m=8;p=0.5", 10, 9, methods)).unwrap();
    for (s, l) in short.cells.iter().zip(&long.cells) {
        assert_eq!(s.l2_errors[..], l.l2_errors[..5]);
        assert_eq!(s.linf_rel_errors[..], l.linf_rel_errors[..5]);
    }
}

#[test]
fn error_decreases_with_users() {
    for seed in [0, 1, 2] {
        let report = run_scaling_benchmark(&config("n=200,3200;m=10;p=1", 20, seed, vec![BenchMethod::Spectral])).unwrap();
        let small = report.cell(BenchMethod::Spectral, 200, 10, 1.0).unwrap().median_l2.unwrap();
        let large = report.cell(BenchMethod::Spectral, 3200, 10, 1.0).unwrap().median_l2.unwrap();
        assert!(large < small, "seed {seed}: {large} !< {small}");
        let slope = report.slope(BenchMethod::Spectral, SlopeAxis::N).unwrap();
        assert_eq!(slope.points, 2);
        assert!(slope.slope < 0.0);
    }
}

#[test]
fn sparse_trials_are_excluded_not_fatal() {
    // p = 0.05 with 10 users leaves most trials disconnected without regularization
    let mut cfg = config("n=10;m=6;p=0.05", 8, 3, vec![BenchMethod::Spectral, BenchMethod::Pmle]);
    cfg.estimator.nu = 0.0;
    let report = run_scaling_benchmark(&cfg).unwrap();
    for c in &report.cells {
        assert!(c.excluded > 0);
        assert_eq!(c.excluded, c.l2_errors.iter().filter(|e| e.is_none()).count());
    }
}

#[test]
fn linf_metric_matches_reported_errors() {
    let report = run_scaling_benchmark(&config("n=500;m=5;p=1", 3, 4, vec![BenchMethod::Spectral])).unwrap();
    let c = &report.cells[0];
    for (l2, linf) in c.l2_errors.iter().zip(&c.linf_rel_errors) {
        let (l2, linf) = (l2.unwrap(), linf.unwrap());
        assert!(l2 > 0.0 && linf > 0.0 && linf < 1.0);
    }
}
