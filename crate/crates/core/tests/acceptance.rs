//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;

use partkrls::harness::report::emit_report;
use partkrls::harness::{
    emit_improved_report, run_improved_bound_experiment, run_rate_experiment, run_timing_benchmark,
    Estimator, ExperimentConfig, RateReport,
};
use partkrls::krls::{fit_krls, Predictor};
use partkrls::localized::fit_localized;
use partkrls::nystrom::fit_nystrom;
use partkrls::partition::Partition;
use partkrls::seeding::rng_from;
use partkrls::synth::{gen_inputs, sample_labels, NoiseModel, SyntheticTask};
use partkrls::theory::{
    effective_dimension, effective_dimension_sum_check, l_schedule, lambda_schedule, m_schedule,
    rate_exponent, ModelParams,
};
use partkrls::{gram, BoxDomain, KernelSpec, Points};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn results_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

fn smooth_data(n: usize, seed: u64) -> (Points, Vec<f64>) {
    let task = SyntheticTask::sobolev(0.5, 1.0, 200, NoiseModel::Gaussian { sigma: 0.1 }).unwrap();
    let xs = gen_inputs(&task, n, seed);
    let y = sample_labels(&task, &xs, seed + 1).unwrap();
    (xs, y)
}

fn single_cell_localized() -> Verdict {
    let (xs, y) = smooth_data(200, 101);
    let kernel = KernelSpec::gaussian(0.2, BoxDomain::unit(1)).unwrap();
    let partition = Partition::intervals(0.0, 1.0, 1).unwrap();
    let local = fit_localized(&xs, &y, &partition, 1e-2, &[kernel.clone()]).unwrap();
    let global = fit_krls(&xs, &y, 1e-2, &kernel).unwrap();
    let test = smooth_data(100, 202).0;
    let diff = max_abs_diff(
        &local.predict_many(&test).unwrap(),
        &global.predict_many(&test).unwrap(),
    );
    verdict(
        diff <= 1e-10,
        format!("max abs diff {diff:.3e} (tol 1e-10)"),
    )
}

fn full_nystrom() -> Verdict {
    let (xs, y) = smooth_data(300, 303);
    let kernel = KernelSpec::gaussian(0.2, BoxDomain::unit(1)).unwrap();
    let nys = fit_nystrom(&xs, &y, 1e-3, 300, 9, &kernel).unwrap();
    let krls = fit_krls(&xs, &y, 1e-3, &kernel).unwrap();
    let test = smooth_data(200, 404).0;
    let diff = max_abs_diff(
        &nys.predict_many(&test).unwrap(),
        &krls.predict_many(&test).unwrap(),
    );
    verdict(diff <= 1e-8, format!("max abs diff {diff:.3e} (tol 1e-8)"))
}

fn sum_identity() -> Verdict {
    let mut rng = rng_from(505);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(1..=8);
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut p: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let head: f64 = p[..m - 1].iter().sum();
        p[m - 1] = 1.0 - head;
        let spectra: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let k = rng.random_range(1..=30);
                (0..k)
                    .map(|_| 10f64.powf(rng.random_range(-6.0..0.0)))
                    .collect()
            })
            .collect();
        let lambda = 10f64.powf(rng.random_range(-5.0..0.0));
        let check = effective_dimension_sum_check(&spectra, &p, lambda).unwrap();
        worst = worst.max(check.gap);
    }
    verdict(
        worst <= 1e-12,
        format!("worst gap {worst:.3e} over 100 draws (tol 1e-12)"),
    )
}

fn capacity_slope() -> Verdict {
    let n = 512;
    let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let xs = Points::from_scalars(&grid);
    let k = gram(&KernelSpec::brownian(), &xs).unwrap();
    let points: Vec<(f64, f64)> = [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&lambda| (lambda, effective_dimension(&k, lambda, false, 1.0).unwrap()))
        .collect();
    let fit = partkrls::harness::fit_loglog_slope(&points).unwrap();
    verdict(
        (fit.slope + 0.5).abs() <= 0.07,
        format!(
            "slope {:.4} (target -0.5 ± 0.07), N = {:?}",
            fit.slope,
            points.iter().map(|p| p.1).collect::<Vec<_>>()
        ),
    )
}

fn schedule_values() -> Verdict {
    let params = ModelParams::shape(0.5, 0.5).unwrap();
    let lambda = lambda_schedule(1024, &params);
    let m = m_schedule(1024, &params);
    let l = l_schedule(1024, &params);
    let e = rate_exponent(&params);
    verdict(
        lambda == 0.0625 && m == 16 && l == 64 && e == 0.8,
        format!("lambda {lambda:?}, m {m}, l {l}, exponent {e:?}"),
    )
}

fn rate_report() -> (RateReport, f64) {
    let config = ExperimentConfig::load(&configs_dir().join("rate_sobolev.json")).unwrap();
    let start = Instant::now();
    let report = run_rate_experiment(&config).unwrap();
    (report, start.elapsed().as_secs_f64())
}

fn rate_exponents(report: &RateReport) -> Verdict {
    let mut pass = report.summary.failures == 0;
    let mut lines = Vec::new();
    let estimators = [
        Estimator::Krls,
        Estimator::Localized,
        Estimator::Nystrom,
        Estimator::LocalizedNystrom,
    ];
    for e in estimators {
        match report.slope(e) {
            Some(fit) => {
                let ok = (fit.slope + 0.8).abs() <= 0.15;
                pass &= ok;
                lines.push(format!("{e} slope {:.3}±{:.3}", fit.slope, fit.stderr));
            }
            None => {
                pass = false;
                lines.push(format!("{e} no slope"));
            }
        }
    }
    let reference = report.mean_mise(Estimator::Krls);
    let mut worst_ratio = 1.0f64;
    for e in &estimators[1..] {
        for (n, v) in report.mean_mise(*e) {
            match reference.iter().find(|(m, _)| *m == n) {
                Some(&(_, base)) => {
                    let ratio = (v / base).max(base / v);
                    worst_ratio = worst_ratio.max(ratio);
                    if ratio > 3.0 {
                        pass = false;
                        lines.push(format!("{e} n={n} ratio {ratio:.2}"));
                    }
                }
                None => pass = false,
            }
        }
    }
    lines.push(format!("worst MISE ratio to krls {worst_ratio:.2}"));
    lines.push(format!("failures {}", report.summary.failures));
    verdict(pass, lines.join(", "))
}

fn determinism(first: &RateReport, second: &RateReport) -> Verdict {
    if first.rows.len() != second.rows.len() {
        return verdict(false, "row counts differ");
    }
    let mut worst = 0.0f64;
    let mut bitwise = true;
    for (a, b) in first.rows.iter().zip(&second.rows) {
        if (a.estimator, a.n, a.rep) != (b.estimator, b.n, b.rep) {
            return verdict(false, "row keys differ");
        }
        match (a.mise, b.mise) {
            (Some(x), Some(y)) => {
                worst = worst.max((x - y).abs());
                bitwise &= x.to_bits() == y.to_bits();
            }
            _ => return verdict(false, "a row failed"),
        }
    }
    verdict(
        worst <= 1e-12,
        format!(
            "{} rows, max |Δmise| {worst:.3e}, bitwise identical: {bitwise}",
            first.rows.len()
        ),
    )
}

fn improved_bound() -> Verdict {
    let config = ExperimentConfig::load(&configs_dir().join("improved_bound.json")).unwrap();
    let report = run_improved_bound_experiment(&config).unwrap();
    let _ = emit_improved_report(&report, &results_dir("improved_bound"));
    let mut pass = report.high.summary.failures == 0 && report.low.summary.failures == 0;
    let mut lines = Vec::new();
    for n in [2048, 4096, 8192] {
        match report
            .comparisons
            .iter()
            .find(|c| c.n == n && c.estimator == Estimator::Localized)
        {
            Some(c) => {
                let ok = c.mean_difference > 0.0 && c.z >= 2.0 && c.pairs == 20;
                pass &= ok;
                lines.push(format!(
                    "n={n}: r_h {:.3e} vs r_l {:.3e}, z {:.1}",
                    c.mean_high, c.mean_low, c.z
                ));
            }
            None => {
                pass = false;
                lines.push(format!("n={n}: missing"));
            }
        }
    }
    if let (Some(h), Some(l)) = (
        report.high.slope(Estimator::Localized),
        report.low.slope(Estimator::Localized),
    ) {
        lines.push(format!("slopes r_h {:.3}, r_l {:.3}", h.slope, l.slope));
    }
    verdict(pass, lines.join("; "))
}

fn cost_trend() -> Verdict {
    let config = ExperimentConfig::load(&configs_dir().join("timing.json")).unwrap();
    let table = run_timing_benchmark(&config, 5).unwrap();
    let krls = table.median(Estimator::Krls, 8192).unwrap();
    let local = table.median(Estimator::LocalizedNystrom, 8192).unwrap();
    let speedup = krls / local;
    verdict(
        speedup >= 3.0,
        format!("median fit krls {krls:.3}s, localized_nystrom {local:.4}s, speedup {speedup:.1}x (need 3x)"),
    )
}

fn report_line(id: usize, name: &str, v: &Verdict, seconds: f64) {
    let status = if v.pass { "PASS" } else { "FAIL" };
    println!(
        "[{status}] criterion {id} {name}: {} ({seconds:.1}s)",
        v.detail
    );
}

fn main() {
    let mut all = true;
    let mut record = |id: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        report_line(id, name, &v, start.elapsed().as_secs_f64());
        all &= v.pass;
    };
    record(
        1,
        "single-cell localized equals krls",
        &mut single_cell_localized,
    );
    record(2, "nystrom with l = n equals krls", &mut full_nystrom);
    record(3, "effective dimension sum identity", &mut sum_identity);
    record(4, "brownian capacity slope", &mut capacity_slope);
    record(8, "schedule unit values", &mut schedule_values);

    let (first, first_secs) = rate_report();
    let _ = emit_report(&first, &results_dir("rate_sobolev"));
    let v = rate_exponents(&first);
    report_line(5, "rate exponents on the sobolev task", &v, first_secs);
    all &= v.pass;

    let (second, second_secs) = rate_report();
    let v = determinism(&first, &second);
    report_line(9, "rerun determinism", &v, second_secs);
    all &= v.pass;

    let mut record = |id: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        report_line(id, name, &v, start.elapsed().as_secs_f64());
        all &= v.pass;
    };
    record(6, "improved bound direction", &mut improved_bound);
    record(7, "cost trend at n = 8192", &mut cost_trend);

    if !all {
        println!("acceptance: FAILED");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
