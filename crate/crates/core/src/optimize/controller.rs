//! Batched RSSI-only controller.
//!
//! Each batch measures random configs over the still-free elements, votes
//! against the batch's own center, and freezes every free element whose
//! on/off RSSI-ratio populations differ under a two-sided Welch t-test at
//! the configured confidence. Elements never frozen take their last vote.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Environment, SurfaceConfig};
use crate::error::{Error, Result};
use crate::measurement::{MeasurementSession, NoiseModel};
use crate::optimize::vote::{vote_counts, CenterStatistic};
use crate::stats::welch_t_test;

/// Repeated measurements per candidate probe after each batch.
pub const PROBE_REPS: usize = 3;
/// Repeated measurements when re-probing the final winner.
pub const FINAL_REPS: usize = 5;
/// Measurements a batch needs on top of its random configs: two probes,
/// plus the final re-probe kept in reserve.
pub const BATCH_OVERHEAD: usize = 2 * PROBE_REPS + FINAL_REPS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub batch_size: usize,
    pub confidence: f64,
    /// Cap on every measurement the session takes, probes included.
    pub budget: usize,
    pub center_statistic: CenterStatistic,
    pub seed: u64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            batch_size: 2000,
            confidence: 0.95,
            budget: 200_000,
            center_statistic: CenterStatistic::Median,
            seed: 0,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidArgument("batch_size must be >= 2".into()));
        }
        if !(self.confidence > 0.5 && self.confidence < 1.0) {
            return Err(Error::InvalidArgument("confidence must lie in (0.5, 1)".into()));
        }
        if self.budget < self.batch_size + BATCH_OVERHEAD {
            return Err(Error::InvalidArgument(format!(
                "budget {} cannot fit one batch of {} plus {} probe measurements",
                self.budget, self.batch_size, BATCH_OVERHEAD
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationReport {
    pub n_elements: usize,
    pub best_config: SurfaceConfig,
    pub best_config_complement_candidate: SurfaceConfig,
    /// Median of [`FINAL_REPS`] measurements of `best_config`.
    pub achieved_ratio: f64,
    /// `(measurements_used, best_so_far_ratio)` after every batch and at the end.
    pub trajectory: Vec<(u64, f64)>,
    /// Measurement count at which each element was frozen, or −1.
    pub fixed_at: Vec<i64>,
    pub seed: u64,
    pub noise_seed: u64,
    pub total_measurements: u64,
    pub batches: u64,
}

impl OptimizationReport {
    pub fn frozen_count(&self) -> usize {
        self.fixed_at.iter().filter(|&&f| f >= 0).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn with_frozen(frozen: &[Option<bool>], mut free_bits: impl FnMut(usize) -> bool) -> SurfaceConfig {
    SurfaceConfig::from_bits(
        frozen
            .iter()
            .enumerate()
            .map(|(i, f)| f.unwrap_or_else(|| free_bits(i)))
            .collect(),
    )
}

/// Runs a full optimization session against the simulated receiver.
pub fn run_controller(
    env: &Environment,
    noise: &NoiseModel,
    params: &ControllerParams,
) -> Result<OptimizationReport> {
    let mut session = MeasurementSession::new(env, *noise)?;
    run_controller_in(&mut session, env.n_elements(), params)
}

/// Same as [`run_controller`] on a caller-owned session (e.g. one that
/// keeps a measurement trace).
pub fn run_controller_in(
    session: &mut MeasurementSession<'_>,
    n: usize,
    params: &ControllerParams,
) -> Result<OptimizationReport> {
    params.validate()?;
    let alpha = 1.0 - params.confidence;
    let budget = params.budget as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut frozen: Vec<Option<bool>> = vec![None; n];
    let mut fixed_at = vec![-1i64; n];
    let mut votes = vec![false; n];
    let mut trajectory = Vec::new();
    let mut best_so_far = f64::NEG_INFINITY;
    let mut hypothesis = SurfaceConfig::all_zeros(n);
    let mut complement = SurfaceConfig::all_ones(n);
    let mut probe_h = f64::NEG_INFINITY;
    let mut probe_c = f64::NEG_INFINITY;
    let mut batch = 0u64;

    let mut configs = Vec::with_capacity(params.batch_size);
    let mut ratios = Vec::with_capacity(params.batch_size);
    let mut on = Vec::with_capacity(params.batch_size);
    let mut off = Vec::with_capacity(params.batch_size);

    while frozen.iter().any(Option::is_none) {
        let remaining = budget - session.measurements_used();
        let size = remaining.saturating_sub(BATCH_OVERHEAD as u64).min(params.batch_size as u64) as usize;
        if size < 2 {
            break;
        }
        session.set_batch(batch);
        configs.clear();
        ratios.clear();
        for _ in 0..size {
            let cfg = with_frozen(&frozen, |_| rng.random::<bool>());
            let r = session.measure(&cfg)?.rssi_ratio;
            best_so_far = best_so_far.max(r);
            configs.push(cfg);
            ratios.push(r);
        }
        let center = params.center_statistic.of(&ratios);
        let refs: Vec<&SurfaceConfig> = configs.iter().collect();
        let counts = vote_counts(&refs, &ratios, center);
        let used = session.measurements_used() as i64;
        for i in 0..n {
            if frozen[i].is_some() {
                continue;
            }
            votes[i] = counts[i].0 > counts[i].1;
            on.clear();
            off.clear();
            for (cfg, &r) in configs.iter().zip(&ratios) {
                if cfg.get(i) {
                    on.push(r);
                } else {
                    off.push(r);
                }
            }
            if let Some(test) = welch_t_test(&on, &off) {
                if test.p < alpha {
                    frozen[i] = Some(test.mean_a > test.mean_b);
                    fixed_at[i] = used;
                }
            }
        }
        hypothesis = with_frozen(&frozen, |i| votes[i]);
        complement = with_frozen(&frozen, |i| !votes[i]);
        probe_h = session.probe(&hypothesis, PROBE_REPS)?;
        probe_c = session.probe(&complement, PROBE_REPS)?;
        best_so_far = best_so_far.max(probe_h).max(probe_c);
        trajectory.push((session.measurements_used(), best_so_far));
        batch += 1;
    }

    let (best_config, other) = if probe_c > probe_h {
        (complement, hypothesis)
    } else {
        (hypothesis, complement)
    };
    session.set_batch(batch);
    let achieved_ratio = session.probe(&best_config, FINAL_REPS)?;
    best_so_far = best_so_far.max(achieved_ratio);
    let total = session.measurements_used();
    trajectory.push((total, best_so_far));

    Ok(OptimizationReport {
        n_elements: n,
        best_config,
        best_config_complement_candidate: other,
        achieved_ratio,
        trajectory,
        fixed_at,
        seed: params.seed,
        noise_seed: session.noise().seed,
        total_measurements: total,
        batches: batch,
    })
}
