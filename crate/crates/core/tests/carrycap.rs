use chrono::{Duration, NaiveDate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spillcast_core::carrycap::{
    calibrate_k, fit_plane, predict_k_ar, predict_k_mean, KSeries, PlaneBin, PlaneModel,
    PlaneSample,
};
use spillcast_core::ingest::{CaseRecord, CaseSeries, Config, WeatherRecord, WeatherSeries};
use spillcast_core::synthetic::{expected_weekly_cases, rounded_cases, Climate};

fn climate_years(first: i32, n: i32, seed: u64) -> WeatherSeries {
    Climate::default().generate(first, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn calibration_recovers_the_generating_capacity() {
    let cfg = Config::default();
    let weather = climate_years(2018, 2, 21);
    let (weeks, expected) = expected_weekly_cases(&cfg, &weather, &[5000.0, 5000.0]).unwrap();
    let cases = rounded_cases(&weeks, &expected);
    assert!(
        cases.counts().iter().any(|&c| c > 0),
        "cases must be informative"
    );
    let grid: Vec<f64> = (1..=10).map(|i| 1000.0 * i as f64).collect();
    let k = calibrate_k(
        &weather,
        &cases,
        &cfg.params,
        &cfg.init.state(),
        cfg.steps_per_day,
        &grid,
    )
    .unwrap();
    assert_eq!(k.len(), weather.len());
    assert!(k.values.iter().all(|&v| v == 5000.0));
}

#[test]
fn argmin_is_invariant_under_common_scaling_of_cases() {
    // Doubling the reporting fraction doubles simulated cases; doubling the
    // observed counts too multiplies every loss by four.
    let mut cfg = Config::default();
    cfg.params.reporting_fraction = 0.5;
    let weather = climate_years(2018, 2, 22);
    let (weeks, expected) = expected_weekly_cases(&cfg, &weather, &[7000.0, 11000.0]).unwrap();
    let half = rounded_cases(&weeks, &expected);
    let doubled = CaseSeries::new(
        half.records()
            .iter()
            .map(|c| CaseRecord {
                week_start: c.week_start,
                count: 2 * c.count,
            })
            .collect(),
    )
    .unwrap();
    let grid: Vec<f64> = (2..=14).map(|i| 1000.0 * i as f64).collect();
    let init = cfg.init.state();
    let a = calibrate_k(
        &weather,
        &half,
        &cfg.params,
        &init,
        cfg.steps_per_day,
        &grid,
    )
    .unwrap();
    cfg.params.reporting_fraction = 1.0;
    let b = calibrate_k(
        &weather,
        &doubled,
        &cfg.params,
        &init,
        cfg.steps_per_day,
        &grid,
    )
    .unwrap();
    assert_eq!(a.values, b.values);
}

fn history(values_per_year: &[Vec<f64>]) -> KSeries {
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (y, year_values) in values_per_year.iter().enumerate() {
        let start = NaiveDate::from_ymd_opt(2013 + y as i32, 1, 1).unwrap();
        for (i, v) in year_values.iter().enumerate() {
            dates.push(start + Duration::days(i as i64));
            values.push(*v);
        }
    }
    KSeries::new(dates, values)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn day_of_year_mean_lies_within_historical_range(
        years in prop::collection::vec(prop::collection::vec(0.0..20000.0f64, 365), 1..4),
    ) {
        let hist = history(&years);
        let target: Vec<NaiveDate> = NaiveDate::from_ymd_opt(2030, 1, 1)
            .unwrap()
            .iter_days()
            .take(365)
            .collect();
        let pred = predict_k_mean(&hist, &target).unwrap();
        for (i, v) in pred.values.iter().enumerate() {
            let column: Vec<f64> = years.iter().map(|y| y[i]).collect();
            let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
        }
    }

    #[test]
    fn plane_predictions_are_never_negative(
        a in -500.0..500.0f64,
        b in -200.0..200.0f64,
        c in -20000.0..20000.0f64,
        seed in 0u64..100,
    ) {
        let model = PlaneModel {
            bins: vec![PlaneBin { lo: 0.0, hi: 100.0, a, b, c, samples: 10, usable: true }],
        };
        let weather = Climate::default().generate(2020, 1, &mut ChaCha8Rng::seed_from_u64(seed));
        let k = model.predict(&weather).unwrap();
        prop_assert!(k.values.iter().all(|&v| v >= 0.0));
    }
}

/// Normal equations for `K = a T + b H + c`, solved by Cramer's rule.
fn normal_equations(pts: &[PlaneSample]) -> (f64, f64, f64) {
    let mut m = [[0.0f64; 3]; 3];
    let mut v = [0.0f64; 3];
    for p in pts {
        let x = [p.temp, p.humidity, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += x[i] * x[j];
            }
            v[i] += x[i] * p.k;
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let solve = |col: usize| {
        let mut mc = m;
        for r in 0..3 {
            mc[r][col] = v[r];
        }
        det(&mc) / d
    };
    (solve(0), solve(1), solve(2))
}

fn rss(pts: &[PlaneSample], (a, b, c): (f64, f64, f64)) -> f64 {
    pts.iter()
        .map(|p| (p.k - (a * p.temp + b * p.humidity + c)).powi(2))
        .sum()
}

fn noisy_plane(
    n: usize,
    truth: (f64, f64, f64),
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<PlaneSample> {
    let noise = Normal::new(0.0, sigma).unwrap();
    (0..n)
        .map(|_| {
            let temp = rng.random_range(5.0..35.0);
            let humidity = rng.random_range(20.0..90.0);
            PlaneSample {
                temp,
                humidity,
                precip: rng.random_range(0.0..10.0),
                k: truth.0 * temp + truth.1 * humidity + truth.2 + noise.sample(rng),
            }
        })
        .collect()
}

#[test]
fn noisy_plane_coefficients_match_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let truth = (120.0, -15.0, 4000.0);
    let pts = noisy_plane(100, truth, 0.1, &mut rng);
    let model = fit_plane(&pts, &[0.0, 10.0]).unwrap();
    let bin = model.bins[0];
    let oracle = normal_equations(&pts);
    assert!((bin.a - truth.0).abs() < 0.05 && (bin.a - oracle.0).abs() < 1e-6);
    assert!((bin.b - truth.1).abs() < 0.05 && (bin.b - oracle.1).abs() < 1e-6);
    assert!((bin.c - truth.2).abs() < 0.05 && (bin.c - oracle.2).abs() < 1e-6);
}

#[test]
fn fitted_plane_has_minimal_residual_sum_of_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..5 {
        let truth = (
            rng.random_range(-200.0..200.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(0.0..10000.0),
        );
        let pts = noisy_plane(60, truth, 300.0, &mut rng);
        let bin = fit_plane(&pts, &[0.0, 10.0]).unwrap().bins[0];
        let fitted = rss(&pts, (bin.a, bin.b, bin.c));
        let oracle = normal_equations(&pts);
        assert!(fitted <= rss(&pts, oracle) * (1.0 + 1e-9));
        for _ in 0..50 {
            let other = (
                oracle.0 + rng.random_range(-1.0..1.0),
                oracle.1 + rng.random_range(-1.0..1.0),
                oracle.2 + rng.random_range(-10.0..10.0),
            );
            assert!(fitted <= rss(&pts, other));
        }
    }
}

#[test]
fn ar_continues_a_linear_ramp() {
    let ramp: Vec<f64> = (0..60).map(|t| 3000.0 + 25.0 * t as f64).collect();
    let ahead = predict_k_ar(&ramp, 2, 5).unwrap();
    for (h, v) in ahead.iter().enumerate() {
        let expected = 3000.0 + 25.0 * (60 + h) as f64;
        assert!((v - expected).abs() < 1e-6, "step {h}: {v} vs {expected}");
    }
}

#[test]
fn plane_routes_rain_to_its_bin() {
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let rec = |i: i64, precip: f64| WeatherRecord {
        date: start + Duration::days(i),
        temp_mean: 20.0,
        humidity: 50.0,
        precip,
    };
    let weather = WeatherSeries::observed(vec![rec(0, 0.0), rec(1, 7.0)]).unwrap();
    let bin = |lo: f64, hi: f64, c: f64| PlaneBin {
        lo,
        hi,
        a: 0.0,
        b: 0.0,
        c,
        samples: 5,
        usable: true,
    };
    let model = PlaneModel {
        bins: vec![bin(0.0, 5.0, 100.0), bin(5.0, 10.0, 900.0)],
    };
    assert_eq!(model.predict(&weather).unwrap().values, vec![100.0, 900.0]);
}
