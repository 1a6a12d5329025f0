//! Ensemble drivers: theorem checks and the statistical scaling laws.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, ExperimentName, ExperimentReport, ExperimentSpec, Series};
use crate::channel::{evaluate_channel, ideal_upper_bound, Environment, SurfaceConfig};
use crate::error::Result;
use crate::measurement::{measurability_snr_linear, NoiseModel};
use crate::optimize::{arbitrary_line_2approx, brute_force_opt, halfplane_opt, partition_directions, surface_only_opt};
use crate::stats::{log_log_slope, spearman};
use crate::synth::{gen_iid, IidEnvSpec};

/// Instance `index` of the theorem-check ensemble: `N = 1 + index mod max_n`
/// i.i.d. elements with unit scale and a unit baseline.
pub fn theorem_instance(base_seed: u64, index: u64, max_n: usize) -> Result<Environment> {
    gen_iid(&IidEnvSpec {
        n_elements: 1 + (index % max_n as u64) as usize,
        element_sigma: 1.0,
        baseline_magnitude: 1.0,
        seed: derive_seed(base_seed, 1, index),
    })
}

/// `count` line directions evenly spaced over `[−π, π)`.
pub fn line_angles(count: usize) -> Vec<f64> {
    (0..count).map(|k| -PI + 2.0 * PI * k as f64 / count as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoApproxOptions {
    pub instances: usize,
    pub max_n: usize,
    pub angles: usize,
    /// Check every distinct partition instead of the evenly spaced angles.
    pub all_partitions: bool,
}

impl Default for TwoApproxOptions {
    fn default() -> Self {
        Self {
            instances: 1000,
            max_n: 16,
            angles: 8,
            all_partitions: false,
        }
    }
}

struct TwoApproxTrial {
    n: usize,
    brute: f64,
    halfplane_rel_err: f64,
    /// `(theta, line magnitude / optimum)`
    ratios: Vec<(f64, f64)>,
    surface_only_violations: usize,
}

/// Oracle equivalence and the arbitrary-line 2-approximation, over the
/// theorem ensemble.
pub fn exp_two_approx(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let o = &spec.options.two_approx;
    let angles = line_angles(o.angles);
    let trials: Vec<TwoApproxTrial> = (0..spec.trials.unwrap_or(o.instances) as u64)
        .into_par_iter()
        .map(|i| -> Result<TwoApproxTrial> {
            let env = theorem_instance(spec.seed, i, o.max_n)?;
            let (_, brute) = brute_force_opt(&env)?;
            let (_, hp) = halfplane_opt(&env);
            let dirs = if o.all_partitions {
                partition_directions(&env)
            } else {
                angles.clone()
            };
            let ratios = dirs
                .iter()
                .map(|&t| (t, arbitrary_line_2approx(&env, t).1 / brute))
                .collect();
            let so = env.surface_only();
            let so_opt = brute_force_opt(&so)?.1;
            let so_dirs = if o.all_partitions {
                partition_directions(&so)
            } else {
                angles.clone()
            };
            let surface_only_violations = so_dirs
                .iter()
                .filter(|&&t| arbitrary_line_2approx(&so, t).1 < 0.5 * so_opt)
                .count();
            Ok(TwoApproxTrial {
                n: env.n_elements(),
                brute,
                halfplane_rel_err: (hp - brute).abs() / brute,
                ratios,
                surface_only_violations,
            })
        })
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport::new(ExperimentName::TwoApprox, spec.seed);
    let max_err = trials.iter().map(|t| t.halfplane_rel_err).fold(0.0, f64::max);
    report.check(
        "halfplane_equals_brute_force",
        max_err < 1e-12,
        format!("max relative error {max_err:e} over {} instances", trials.len()),
    );
    let mut series = Series::new("two_approx_ratios", &["instance", "n", "theta", "ratio"]);
    let mut violations = 0usize;
    let mut worst = f64::INFINITY;
    let mut bad_instances = 0usize;
    for (i, t) in trials.iter().enumerate() {
        let mut bad = false;
        for &(theta, r) in &t.ratios {
            series.push(vec![i as f64, t.n as f64, theta, r]);
            worst = worst.min(r);
            if r < 0.5 {
                violations += 1;
                bad = true;
            }
        }
        bad_instances += bad as usize;
    }
    let checked: usize = trials.iter().map(|t| t.ratios.len()).sum();
    report.check(
        "two_approx_zero_violations",
        violations == 0,
        format!("{violations} of {checked} (instance, line) pairs below half the optimum in {bad_instances} instances; worst ratio {worst:.4}"),
    );
    let so_violations: usize = trials.iter().map(|t| t.surface_only_violations).sum();
    report.note(
        "two_approx_surface_only_zero_violations",
        so_violations == 0,
        format!("{so_violations} violations with the baseline path removed"),
    );
    report.metric("instances", trials.len());
    report.metric("max_halfplane_rel_err", max_err);
    report.metric("violations", violations);
    report.metric("violating_instances", bad_instances);
    report.metric("surface_only_violations", so_violations);
    report.metric("worst_ratio", worst);
    report.metric("mean_optimum", trials.iter().map(|t| t.brute).sum::<f64>() / trials.len() as f64);
    report.series.push(series);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PiBoundOptions {
    /// Instances checked exactly by brute force (`N ≤ small_max_n`).
    pub small_instances: usize,
    pub small_max_n: usize,
    pub large_sizes: Vec<usize>,
    pub large_instances: usize,
}

impl Default for PiBoundOptions {
    fn default() -> Self {
        Self {
            small_instances: 10_000,
            small_max_n: 16,
            large_sizes: vec![64, 256, 1024, 4096],
            large_instances: 100,
        }
    }
}

/// Two-state surface optimum against the ideal continuous-phase sum.
pub fn exp_pi_bound(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let o = &spec.options.pi_bound;
    let small: Vec<(usize, f64)> = (0..spec.trials.unwrap_or(o.small_instances) as u64)
        .into_par_iter()
        .map(|i| -> Result<(usize, f64)> {
            let env = theorem_instance(spec.seed, i, o.small_max_n)?.surface_only();
            let ideal = ideal_upper_bound(&env);
            Ok((env.n_elements(), brute_force_opt(&env)?.1 / ideal))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = o
        .large_sizes
        .iter()
        .flat_map(|&n| (0..o.large_instances as u64).map(move |i| (n, i)))
        .collect();
    let large: Vec<(usize, f64)> = jobs
        .par_iter()
        .map(|&(n, i)| -> Result<(usize, f64)> {
            let env = gen_iid(&IidEnvSpec {
                n_elements: n,
                element_sigma: 1.0,
                baseline_magnitude: 1.0,
                seed: derive_seed(spec.seed, 2, (n as u64) << 32 | i),
            })?;
            Ok((n, surface_only_opt(&env) / ideal_upper_bound(&env.surface_only())))
        })
        .collect::<Result<_>>()?;

    let floor = 1.0 / PI;
    let mut report = ExperimentReport::new(ExperimentName::PiBound, spec.seed);
    let mut series = Series::new("pi_bound_ratios", &["n", "ratio", "exact"]);
    for &(n, r) in &small {
        series.push(vec![n as f64, r, 1.0]);
    }
    for &(n, r) in &large {
        series.push(vec![n as f64, r, 0.0]);
    }
    let min_of = |v: &[(usize, f64)]| v.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let (min_small, min_large) = (min_of(&small), min_of(&large));
    let bad_small = small.iter().filter(|x| x.1 < floor).count();
    let bad_large = large.iter().filter(|x| x.1 < floor).count();
    report.check(
        "pi_bound_exact_small_n",
        bad_small == 0,
        format!("{bad_small} violations over {} brute-force instances; min ratio {min_small:.4}", small.len()),
    );
    report.check(
        "pi_bound_large_n",
        bad_large == 0,
        format!("{bad_large} violations over {} halfplane instances; min ratio {min_large:.4}", large.len()),
    );
    let min_all = min_small.min(min_large);
    report.note(
        "ratio_at_least_half",
        min_all >= 0.5,
        format!("min ratio {min_all:.4} over all instances"),
    );
    report.metric("min_ratio", min_all);
    report.metric("min_ratio_small", min_small);
    report.metric("min_ratio_large", min_large);
    report.metric("floor", floor);
    report.series.push(series);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadraticOptions {
    pub n_elements: usize,
    pub element_sigma: f64,
    pub baseline_magnitude: f64,
    pub sizes: Vec<usize>,
    /// Random active subsets averaged per size.
    pub subsets_per_size: usize,
    pub slope_min: f64,
    pub slope_max: f64,
}

impl Default for QuadraticOptions {
    fn default() -> Self {
        Self {
            n_elements: 1024,
            element_sigma: 1.0,
            baseline_magnitude: 1.0,
            sizes: (4..=10).map(|k| 1 << k).collect(),
            subsets_per_size: 16,
            slope_min: 1.8,
            slope_max: 2.1,
        }
    }
}

/// `|h(config with only `active` enabled) − h_Z|²`.
fn surface_power(env: &Environment, config: &SurfaceConfig, active: &[usize]) -> Result<f64> {
    let mut mask = vec![false; env.n_elements()];
    for &i in active {
        mask[i] = true;
    }
    let sub = env.restricted(&mask)?;
    Ok((evaluate_channel(&sub, config)? - env.h_z()).norm_sqr())
}

/// Mean surface power per active-subset size.
fn subset_curve(
    env: &Environment,
    config: &SurfaceConfig,
    sizes: &[usize],
    subsets: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sizes
        .iter()
        .map(|&m| {
            let mut acc = 0.0;
            for _ in 0..subsets {
                let idx = sample(&mut rng, env.n_elements(), m).into_vec();
                acc += surface_power(env, config, &idx)?;
            }
            Ok(acc / subsets as f64)
        })
        .collect()
}

/// Surface power against the number of enabled elements.
pub fn exp_quadratic(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let o = &spec.options.quadratic;
    let trials = spec.trials.unwrap_or(20);
    let xs: Vec<f64> = o.sizes.iter().map(|&m| m as f64).collect();

    let aligned = Environment::new(
        num_complex::Complex64::new(o.baseline_magnitude, 0.0),
        vec![num_complex::Complex64::new(1.0, 0.0); o.n_elements],
    )?;
    let aligned_curve = subset_curve(
        &aligned,
        &SurfaceConfig::all_ones(o.n_elements),
        &o.sizes,
        1,
        derive_seed(spec.seed, 3, u64::MAX),
    )?;
    let aligned_slope = log_log_slope(&xs, &aligned_curve);

    let curves: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let env = gen_iid(&IidEnvSpec {
                n_elements: o.n_elements,
                element_sigma: o.element_sigma,
                baseline_magnitude: o.baseline_magnitude,
                seed: derive_seed(spec.seed, 3, t),
            })?;
            let (config, _) = halfplane_opt(&env);
            subset_curve(&env, &config, &o.sizes, o.subsets_per_size, derive_seed(spec.seed, 4, t))
        })
        .collect::<Result<_>>()?;
    let slopes: Vec<f64> = curves.iter().map(|c| log_log_slope(&xs, c)).collect();

    let mut report = ExperimentReport::new(ExperimentName::Quadratic, spec.seed);
    report.check(
        "aligned_slope_exactly_two",
        (aligned_slope - 2.0).abs() < 1e-6,
        format!("slope {aligned_slope:.12}"),
    );
    let inside = slopes.iter().filter(|&&s| s >= o.slope_min && s <= o.slope_max).count();
    let (lo, hi) = slopes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    report.check(
        "optimized_slope_in_range",
        inside == slopes.len(),
        format!(
            "{inside}/{} trials in [{}, {}]; observed [{lo:.4}, {hi:.4}]",
            slopes.len(),
            o.slope_min,
            o.slope_max
        ),
    );
    report.metric("aligned_slope", aligned_slope);
    report.metric("slopes", &slopes);
    report.metric("slope_min_observed", lo);
    report.metric("slope_max_observed", hi);

    let mut curve = Series::new("quadratic_power", &["m", "aligned_power", "mean_power"]);
    for (k, &m) in xs.iter().enumerate() {
        let mean = curves.iter().map(|c| c[k]).sum::<f64>() / curves.len().max(1) as f64;
        curve.push(vec![m, aligned_curve[k], mean]);
    }
    let mut per_trial = Series::new("quadratic_slopes", &["trial", "slope"]);
    for (t, &s) in slopes.iter().enumerate() {
        per_trial.push(vec![t as f64, s]);
    }
    report.series.push(curve);
    report.series.push(per_trial);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasurabilityOptions {
    pub n_values: Vec<usize>,
    pub element_sigma: f64,
    pub baseline_magnitude: f64,
    pub n_configs: usize,
    pub reps: usize,
    /// Used when the spec carries no noise model.
    pub noise_db: f64,
    pub slope_tolerance: f64,
    pub min_spearman: f64,
}

impl Default for MeasurabilityOptions {
    fn default() -> Self {
        Self {
            n_values: (6..=12).map(|k| 1 << k).collect(),
            element_sigma: 0.005,
            baseline_magnitude: 1.0,
            n_configs: 100,
            reps: 125,
            noise_db: 0.5,
            slope_tolerance: 0.3,
            min_spearman: 0.9,
        }
    }
}

/// Measurability SNR against element count.
pub fn exp_measurability(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let o = &spec.options.measurability;
    let trials = spec.trials.unwrap_or(1).max(1);
    let base_noise = spec.noise.unwrap_or(NoiseModel::gaussian(o.noise_db, spec.seed));
    let jobs: Vec<(usize, u64)> = (0..o.n_values.len())
        .flat_map(|k| (0..trials as u64).map(move |t| (k, t)))
        .collect();
    let snrs: Vec<f64> = jobs
        .par_iter()
        .map(|&(k, t)| -> Result<f64> {
            let env = gen_iid(&IidEnvSpec {
                n_elements: o.n_values[k],
                element_sigma: o.element_sigma,
                baseline_magnitude: o.baseline_magnitude,
                seed: derive_seed(spec.seed, 5 + k as u64, t),
            })?;
            let noise = NoiseModel {
                seed: derive_seed(base_noise.seed, 100 + k as u64, t),
                ..base_noise
            };
            measurability_snr_linear(&env, o.n_configs, o.reps, &noise)
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = o.n_values.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = snrs.chunks(trials).map(|c| c.iter().sum::<f64>() / trials as f64).collect();
    let slope = log_log_slope(&xs, &ys);
    let rho = spearman(&xs, &ys);

    let mut report = ExperimentReport::new(ExperimentName::Measurability, spec.seed);
    report.check(
        "snr_slope_near_one",
        (slope - 1.0).abs() <= o.slope_tolerance,
        format!("log-log slope {slope:.4} (target 1 ± {})", o.slope_tolerance),
    );
    report.check(
        "snr_monotone",
        rho >= o.min_spearman,
        format!("Spearman {rho:.4} (min {})", o.min_spearman),
    );
    report.metric("slope", slope);
    report.metric("spearman", rho);
    let mut series = Series::new("measurability_snr", &["n", "snr_linear", "snr_db"]);
    for (&n, &s) in xs.iter().zip(&ys) {
        series.push(vec![n, s, crate::channel::power_to_db(s)]);
    }
    report.series.push(series);
    Ok(report)
}
