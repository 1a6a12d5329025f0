//! RSSI-only majority voting.

use serde::{Deserialize, Serialize};

use crate::channel::SurfaceConfig;
use crate::error::{Error, Result};
use crate::measurement::MeasurementRecord;
use crate::stats::median;

/// Reference value each RSSI-ratio sample is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterStatistic {
    Mean,
    #[default]
    Median,
}

impl CenterStatistic {
    pub fn of(self, values: &[f64]) -> f64 {
        match self {
            CenterStatistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
            CenterStatistic::Median => median(&mut values.to_vec()),
        }
    }
}

/// Per-element `(votes_on, votes_off)`.
///
/// A sample votes "on" for element `i` when the element was on and the
/// ratio is above `center`, or off and below it; every other case
/// (including a ratio equal to the center) votes "off".
pub fn vote_counts(configs: &[&SurfaceConfig], ratios: &[f64], center: f64) -> Vec<(usize, usize)> {
    let n = configs.first().map_or(0, |c| c.len());
    let mut counts = vec![(0usize, 0usize); n];
    for (cfg, &r) in configs.iter().zip(ratios) {
        let above = r > center;
        let below = r < center;
        for (i, &b) in cfg.bits().iter().enumerate() {
            if (b && above) || (!b && below) {
                counts[i].0 += 1;
            } else {
                counts[i].1 += 1;
            }
        }
    }
    counts
}

/// Majority vote over measured configs. Returns `(Opt, ¬Opt)`; one of the
/// two is the candidate 2-approximation. Ties set the element off.
pub fn majority_vote(
    records: &[MeasurementRecord],
    center: CenterStatistic,
) -> Result<(SurfaceConfig, SurfaceConfig)> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("majority_vote needs at least one record".into()))?;
    let n = first.config.len();
    if let Some(bad) = records.iter().find(|r| r.config.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: bad.config.len(),
        });
    }
    let ratios: Vec<f64> = records.iter().map(|r| r.rssi_ratio).collect();
    let configs: Vec<&SurfaceConfig> = records.iter().map(|r| &r.config).collect();
    let c = center.of(&ratios);
    let opt = SurfaceConfig::from_bits(
        vote_counts(&configs, &ratios, c)
            .into_iter()
            .map(|(on, off)| on > off)
            .collect(),
    );
    let not_opt = opt.complement();
    Ok((opt, not_opt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::evaluate_channel;
    use crate::measurement::{measure, random_config, NoiseModel};
    use crate::optimize::brute_force_opt;
    use crate::synth::{gen_iid, IidEnvSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(bits: &[u8], ratio: f64) -> MeasurementRecord {
        MeasurementRecord {
            config: SurfaceConfig::from_bits(bits.iter().map(|&b| b == 1).collect()),
            rssi_ratio: ratio,
            seq: 0,
            batch: 0,
        }
    }

    #[test]
    fn clean_single_element() {
        let recs = [rec(&[1], 2.0), rec(&[0], 0.5)];
        for center in [CenterStatistic::Mean, CenterStatistic::Median] {
            let (opt, not_opt) = majority_vote(&recs, center).unwrap();
            assert_eq!(opt.to_string(), "1");
            assert_eq!(not_opt.to_string(), "0");
        }
    }

    #[test]
    fn uninformative_element_still_yields_valid_pair() {
        // element 1 is independent of the ratio
        let recs = [
            rec(&[1, 0], 3.0),
            rec(&[1, 1], 3.0),
            rec(&[0, 0], 1.0),
            rec(&[0, 1], 1.0),
        ];
        let (opt, not_opt) = majority_vote(&recs, CenterStatistic::Median).unwrap();
        assert_eq!(opt.len(), 2);
        assert_eq!(opt.complement(), not_opt);
        assert!(opt.get(0));
        // 2 on-votes vs 2 off-votes: tie goes off
        assert!(!opt.get(1));
    }

    #[test]
    fn errors() {
        assert!(majority_vote(&[], CenterStatistic::Median).is_err());
        assert!(matches!(
            majority_vote(&[rec(&[1], 1.0), rec(&[1, 0], 2.0)], CenterStatistic::Mean),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn ratio_at_center_votes_off() {
        let recs = [rec(&[1], 1.0), rec(&[1], 2.0), rec(&[0], 3.0)];
        // median 2.0: first votes off, second votes off (equal), third off (bit 0, above)
        let counts = vote_counts(
            &recs.iter().map(|r| &r.config).collect::<Vec<_>>(),
            &[1.0, 2.0, 3.0],
            2.0,
        );
        assert_eq!(counts, vec![(0, 3)]);
    }

    #[test]
    fn noiseless_vote_reaches_half_of_optimum() {
        let mut failures = 0;
        for seed in 0..20 {
            let env = gen_iid(&IidEnvSpec {
                n_elements: 16,
                element_sigma: 1.0,
                baseline_magnitude: 1.0,
                seed,
            })
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let recs: Vec<_> = (0..5000)
                .map(|k| measure(&env, &random_config(&mut rng, 16), &NoiseModel::noiseless(), k, 0).unwrap())
                .collect();
            let (opt, not_opt) = majority_vote(&recs, CenterStatistic::Median).unwrap();
            let best = evaluate_channel(&env, &opt)
                .unwrap()
                .norm()
                .max(evaluate_channel(&env, &not_opt).unwrap().norm());
            if best < 0.5 * brute_force_opt(&env).unwrap().1 {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures} failures");
    }
}
