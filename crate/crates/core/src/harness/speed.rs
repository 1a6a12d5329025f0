//! Optimization-speed trajectories of the RSSI-only controller.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, ExperimentName, ExperimentReport, ExperimentSpec, Series};
use crate::channel::{capacity_improvement, power_to_db, rssi_ratio_exact, SurfaceConfig};
use crate::error::Result;
use crate::measurement::NoiseModel;
use crate::optimize::{halfplane_opt, run_controller, ControllerParams, OptimizationReport, PROBE_REPS};
use crate::stats::median;
use crate::synth::{gen_iid, IidEnvSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptSpeedOptions {
    pub n_elements: usize,
    /// One endpoint-pair analogue per entry.
    pub element_sigmas: Vec<f64>,
    pub baseline_magnitude: f64,
    /// Used when the spec carries no noise model.
    pub noise_db: f64,
    /// Replaces the controller budget.
    pub budget: usize,
    /// Baseline SNR used for the capacity figures.
    pub baseline_snr_db: f64,
    pub target_fraction: f64,
}

impl Default for OptSpeedOptions {
    fn default() -> Self {
        Self {
            n_elements: 3720,
            element_sigmas: vec![5e-4, 1e-3, 2e-3, 4e-3, 8e-3],
            baseline_magnitude: 1.0,
            noise_db: 0.5,
            budget: 10_000,
            baseline_snr_db: 10.0,
            target_fraction: 0.8,
        }
    }
}

struct SpeedTrial {
    sigma: f64,
    report: OptimizationReport,
    final_gain_db: f64,
    optimal_gain_db: f64,
    capacity_gain: f64,
}

/// First trajectory point reaching `fraction` of the final dB gain.
fn measurements_to_fraction(report: &OptimizationReport, fraction: f64) -> u64 {
    let last = power_to_db(report.trajectory.last().map_or(1.0, |p| p.1));
    report
        .trajectory
        .iter()
        .find(|p| power_to_db(p.1) >= fraction * last)
        .map_or(report.total_measurements, |p| p.0)
}

/// Runs the controller on one i.i.d. environment per element scale.
pub fn exp_opt_speed(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let o = &spec.options.opt_speed;
    let trials = spec.trials.unwrap_or(o.element_sigmas.len()).min(o.element_sigmas.len());
    let base_noise = spec.noise.unwrap_or(NoiseModel::gaussian(o.noise_db, spec.seed));
    let params = ControllerParams {
        budget: o.budget,
        ..spec.controller
    };
    let results: Vec<SpeedTrial> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<SpeedTrial> {
            let sigma = o.element_sigmas[t];
            let mut env = gen_iid(&IidEnvSpec {
                n_elements: o.n_elements,
                element_sigma: sigma,
                baseline_magnitude: o.baseline_magnitude,
                seed: derive_seed(spec.seed, 10, t as u64),
            })?;
            env.set_noise_floor_power(env.h_z().norm_sqr() / 10f64.powf(o.baseline_snr_db / 10.0))?;
            let noise = NoiseModel {
                seed: derive_seed(base_noise.seed, 11, t as u64),
                ..base_noise
            };
            let report = run_controller(
                &env,
                &noise,
                &ControllerParams {
                    seed: derive_seed(params.seed, 12, t as u64),
                    ..params
                },
            )?;
            let (opt, _) = halfplane_opt(&env);
            let zeros = SurfaceConfig::all_zeros(o.n_elements);
            Ok(SpeedTrial {
                sigma,
                final_gain_db: power_to_db(rssi_ratio_exact(&env, &report.best_config)?),
                optimal_gain_db: power_to_db(rssi_ratio_exact(&env, &opt)?),
                capacity_gain: capacity_improvement(&env, &zeros, &report.best_config)?,
                report,
            })
        })
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport::new(ExperimentName::OptSpeed, spec.seed);
    let monotone = results.iter().all(|r| {
        r.report
            .trajectory
            .windows(2)
            .all(|w| w[1].1 >= w[0].1 && w[1].0 >= w[0].0)
    });
    report.check(
        "trajectory_monotone",
        monotone,
        format!("{} trajectories checked", results.len()),
    );
    let two_batches = 2 * (params.batch_size + 2 * PROBE_REPS) as u64;
    let to_target: Vec<u64> = results
        .iter()
        .map(|r| measurements_to_fraction(&r.report, o.target_fraction))
        .collect();
    let early = to_target.iter().filter(|&&m| m <= two_batches).count();
    report.note(
        "most_gain_within_two_batches",
        early == results.len(),
        format!(
            "{early}/{} trials reach {:.0}% of their final dB gain within {two_batches} measurements",
            results.len(),
            100.0 * o.target_fraction
        ),
    );
    let finals: Vec<f64> = results.iter().map(|r| r.final_gain_db).collect();
    let (lo, hi) = finals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| (a.min(g), b.max(g)));
    report.note(
        "final_gains_span_3_to_15_db",
        lo <= 3.5 && hi >= 14.0,
        format!("final gains span {lo:.2} to {hi:.2} dB"),
    );
    let mut powers: Vec<f64> = finals.iter().map(|g| 10f64.powf(g / 10.0)).collect();
    let mut caps: Vec<f64> = results.iter().map(|r| r.capacity_gain).collect();
    if !results.is_empty() {
        report.metric("median_power_improvement", median(&mut powers));
        report.metric("median_capacity_improvement", median(&mut caps));
    }
    report.metric("measurements_to_target", &to_target);

    let mut traj = Series::new("opt_speed_trajectory", &["trial", "measurements", "best_ratio_db"]);
    let mut per = Series::new(
        "opt_speed_trials",
        &[
            "trial",
            "element_sigma",
            "final_gain_db",
            "optimal_gain_db",
            "measurements_to_target",
            "capacity_improvement",
            "frozen",
        ],
    );
    for (t, r) in results.iter().enumerate() {
        for &(m, v) in &r.report.trajectory {
            traj.push(vec![t as f64, m as f64, power_to_db(v)]);
        }
        per.push(vec![
            t as f64,
            r.sigma,
            r.final_gain_db,
            r.optimal_gain_db,
            to_target[t] as f64,
            r.capacity_gain,
            r.report.frozen_count() as f64,
        ]);
    }
    report.series.push(traj);
    report.series.push(per);
    Ok(report)
}
