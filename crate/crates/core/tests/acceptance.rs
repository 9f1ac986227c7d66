//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stochcap::capacity::{IntensityLevel, WeibullCapacity};
use stochcap::mle::{fit, grid_search, FitOptions};
use stochcap::regression::{fit_model, predict, FittedModel, RegressionObservation, Variable};
use stochcap::study::{
    cell_profiles, mean_cdf_awre_at_target, run_one, run_study, to_regression_observations, Response, StudyConfig,
    StudyResults,
};
use stochcap::synthetic::{
    calibrate_base_profile, generate_dataset, rescale_profile, CalibrationSpec, IntensityProfile,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn base_profile() -> IntensityProfile {
    calibrate_base_profile(&CalibrationSpec::default()).unwrap().profile
}

fn estimator_consistency() -> Outcome {
    let truth = WeibullCapacity::new(150.0, 6.5).unwrap();
    let ((scale, shape, b), took) = timed(|| {
        let profile = rescale_profile(&base_profile(), &truth, 5000.0).unwrap();
        let data = generate_dataset(&profile, &truth, 7).unwrap();
        let est = fit(&data.histogram(), &FitOptions::default()).unwrap();
        (est.fitted.scale(), est.fitted.shape(), data.total_breakdowns())
    });
    let e_scale = (scale / 150.0 - 1.0).abs();
    let e_shape = (shape / 6.5 - 1.0).abs();
    outcome(
        e_scale < 0.02 && e_shape < 0.05 && took < Duration::from_secs(10),
        format!(
            "{b} breakdowns, scale {scale:.3} ({:.2}%), shape {shape:.4} ({:.2}%), {took:.2?}",
            100.0 * e_scale,
            100.0 * e_shape
        ),
    )
}

fn random_small_dataset(rng: &mut ChaCha8Rng) -> stochcap::mle::CensoredHistogram {
    loop {
        let n = rng.random_range(4..12usize);
        let start = rng.random_range(60.0..110.0);
        let step = rng.random_range(5.0..15.0);
        let levels: Vec<IntensityLevel> = (0..n)
            .map(|j| IntensityLevel::new(start + step * j as f64).unwrap())
            .collect();
        let records: Vec<f64> = (0..n).map(|_| rng.random_range(2.0..80.0)).collect();
        let truth = WeibullCapacity::new(rng.random_range(100.0..160.0), rng.random_range(3.0..9.0)).unwrap();
        let profile = IntensityProfile::new(levels, records).unwrap();
        let data = generate_dataset(&profile, &truth, rng.random()).unwrap();
        let h = data.histogram();
        let failing = h.breakdowns().iter().filter(|&&b| b > 0).count();
        let surviving = h
            .breakdowns()
            .iter()
            .zip(h.records())
            .filter(|(&b, &r)| r - b as f64 > 0.0)
            .count();
        if failing >= 2 && surviving >= 2 {
            return h;
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (worst, took) = timed(|| {
        let mut worst = f64::INFINITY;
        for _ in 0..20 {
            let h = random_small_dataset(&mut rng);
            let est = fit(&h, &FitOptions::default()).unwrap();
            let (l, g) = (est.fitted.scale(), est.fitted.shape());
            let (_, grid_ll) = grid_search(&h, (0.5 * l, 2.0 * l), (0.5 * g, 2.0 * g), 200).unwrap();
            worst = worst.min(est.log_likelihood - grid_ll);
        }
        worst
    });
    outcome(
        worst >= -1e-4 && took < Duration::from_secs(60),
        format!("min(fit - grid) log-likelihood {worst:.3e} over 20 histograms, {took:.2?}"),
    )
}

fn generator_expectation() -> Outcome {
    let truth = WeibullCapacity::new(150.0, 6.5).unwrap();
    let profile = base_profile();
    let (mean, took) = timed(|| {
        let total: u64 = (0..1000u64)
            .map(|seed| generate_dataset(&profile, &truth, seed).unwrap().total_breakdowns())
            .sum();
        total as f64 / 1000.0
    });
    outcome(
        within(mean, 50.5, 53.5) && took < Duration::from_secs(30),
        format!("mean total breakdowns {mean:.3} over 1000 draws, {took:.2?}"),
    )
}

fn cell_error_level() -> Outcome {
    let config = StudyConfig::default();
    let dist = config
        .distributions
        .iter()
        .position(|d| d.scale == 183.0 && d.shape == 7.5)
        .unwrap();
    let size = config.target_breakdowns.iter().position(|&t| t == 52.0).unwrap();
    let (awre, took) = timed(|| {
        let profiles = cell_profiles(&config).unwrap();
        (0..config.replications)
            .map(|rep| {
                run_one(&config, &profiles[dist][size], dist, size, rep)
                    .unwrap()
                    .cdf_awre
                    .unwrap()
            })
            .collect::<Vec<f64>>()
    });
    let mean = awre.iter().sum::<f64>() / awre.len() as f64;
    let max = awre.iter().cloned().fold(0.0, f64::max);
    outcome(
        within(mean, 0.08, 0.25) && took < Duration::from_secs(120),
        format!(
            "mean CDF AWRE {:.2}%, max {:.2}%, {took:.2?}",
            100.0 * mean,
            100.0 * max
        ),
    )
}

fn thresholds(results: &StudyResults, took: Duration) -> Outcome {
    let at = |t: f64| mean_cdf_awre_at_target(results, t).unwrap();
    let (m13, m208, m260) = (at(13.0), at(208.0), at(260.0));
    let ratio = m13 / m260;
    outcome(
        m208 < 0.10 && m260 < 0.10 && ratio >= 2.0 && took < Duration::from_secs(900),
        format!(
            "mean CDF AWRE 13: {:.2}%, 208: {:.2}%, 260: {:.2}%, ratio 13/260 {ratio:.2}, {} runs in {took:.2?}",
            100.0 * m13,
            100.0 * m208,
            100.0 * m260,
            results.runs.len()
        ),
    )
}

fn log_trend(
    results: &StudyResults,
    response: Response,
    intercept: (f64, f64),
    slope: (f64, f64),
    r2: (f64, f64),
) -> (bool, String) {
    let obs = to_regression_observations(&results.runs, response);
    let m = fit_model(&obs, &[Variable::LnBreakdowns]).unwrap();
    let pass = within(m.coefficients[0], intercept.0, intercept.1)
        && within(m.coefficients[1], slope.0, slope.1)
        && within(m.r_squared, r2.0, r2.1)
        && m.p_values[1] < 1e-10;
    let detail = format!(
        "intercept {:.4}, slope {:.5} (p {:.1e}), R2 {:.4}",
        m.coefficients[0], m.coefficients[1], m.p_values[1], m.r_squared
    );
    (pass, detail)
}

fn regression_reproduction(results: &StudyResults) -> Outcome {
    let (cdf_ok, cdf) = log_trend(results, Response::CdfAwre, (0.33, 0.56), (-0.095, -0.050), (0.30, 0.60));
    let (cfb_ok, cfb) = log_trend(results, Response::CfbAwre, (0.32, 0.55), (-0.093, -0.048), (0.19, 0.49));
    outcome(cdf_ok && cfb_ok, format!("CDF: {cdf}; CF_B: {cfb}"))
}

fn screening(studies: &[StudyResults]) -> Outcome {
    let full = [
        Variable::RecordsPerBreakdown,
        Variable::LnTotalRecords,
        Variable::LnBreakdowns,
    ];
    let reduced = [Variable::RecordsPerBreakdown, Variable::LnTotalRecords];
    let mut ordered = 0;
    let mut flagged = 0;
    for results in studies {
        let obs = to_regression_observations(&results.runs, Response::CdfAwre);
        let m4 = fit_model(&obs, &full).unwrap();
        let m10 = fit_model(&obs, &reduced).unwrap();
        ordered += (m4.r_squared >= m10.r_squared) as usize;
        flagged += !m4.insignificant(stochcap::regression::SIGNIFICANCE).is_empty() as usize;
    }
    let n = studies.len();
    outcome(
        ordered == n && flagged >= 1,
        format!(
            "{{x3,x4,x5}} R2 >= {{x3,x4}} R2 in {ordered}/{n} studies; flagged in {flagged}/{n} (majority: {})",
            if 2 * flagged > n { "yes" } else { "no" }
        ),
    )
}

fn obs(breakdowns: u64, response: f64) -> RegressionObservation {
    RegressionObservation {
        total_records: 1000.0,
        recorded_breakdowns: breakdowns,
        response,
    }
}

fn exact_fixtures() -> Outcome {
    let d = WeibullCapacity::new(150.0, 6.5).unwrap();
    let f = d.breakdown_probability(IntensityLevel::new(150.0).unwrap());
    let f_err = (f - (1.0 - (-1f64).exp())).abs();

    let line = fit_model(&[obs(1, 1.0), obs(2, 2.0), obs(3, 2.0)], &[Variable::Breakdowns]).unwrap();
    let ols_err = (line.coefficients[1] - 0.5).abs().max((line.r_squared - 0.75).abs());

    let published = FittedModel {
        variables: vec!["intercept".into(), "x5".into()],
        n: 360,
        df: 358,
        coefficients: vec![0.4456, -0.07348],
        standard_errors: vec![0.0; 2],
        t_values: vec![0.0; 2],
        p_values: vec![0.0; 2],
        ci_lower: vec![0.0; 2],
        ci_upper: vec![0.0; 2],
        r_squared: 0.4379,
        sse: 0.0,
        sst: 0.0,
        rejected_rows: 0,
        regressors: vec![Variable::LnBreakdowns],
        fitted_values: vec![],
        residuals: vec![],
    };
    let p52 = predict(&published, &obs(52, 0.0)).unwrap();
    outcome(
        f_err < 1e-12 && ols_err < 1e-9 && (p52 - 0.15526).abs() < 1e-5,
        format!("|F - (1-1/e)| {f_err:.1e}, OLS error {ols_err:.1e}, prediction at 52 breakdowns {p52:.6}"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |jobs: &str| {
        let out = dir.path().join(format!("jobs{jobs}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_stochcap"))
            .args(["study", "--jobs", jobs, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let (one, eight) = (run("1"), run("8"));
    outcome(
        one == eight && !one.is_empty(),
        format!(
            "--jobs 1 vs --jobs 8: {} vs {} bytes, identical: {}",
            one.len(),
            eight.len(),
            one == eight
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!(
            "criterion {n} {name}: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };

    report(1, "estimator consistency", estimator_consistency());
    report(2, "oracle equivalence", oracle_equivalence());
    report(3, "generator expectation", generator_expectation());
    report(4, "cell error level", cell_error_level());

    let config = StudyConfig::default();
    let (default_study, took) = timed(|| run_study(&config, 0).unwrap());
    report(5, "error thresholds", thresholds(&default_study, took));
    report(6, "log-breakdowns regression", regression_reproduction(&default_study));

    let mut studies = vec![default_study];
    for seed in 1..5u64 {
        let config = StudyConfig {
            master_seed: config.master_seed + seed,
            ..StudyConfig::default()
        };
        studies.push(run_study(&config, 0).unwrap());
    }
    report(7, "regressor screening", screening(&studies));
    report(8, "exact fixtures", exact_fixtures());
    report(9, "determinism", determinism());

    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.2.pass)
        .map(|r| format!("{} {}", r.0, r.1))
        .collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: FAILED {}", failed.join(", "));
        std::process::exit(1);
    }
}
