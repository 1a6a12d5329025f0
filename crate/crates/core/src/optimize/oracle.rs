//! Perfect-information optimizers: exhaustive search, the optimal
//! halfplane sweep, the arbitrary-line 2-approximation, and the
//! surface-only optimum used for the two-state vs. ideal comparison.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{evaluate_channel, Environment, SurfaceConfig};
use crate::error::{Error, Result};

/// Largest element count [`brute_force_opt`] accepts.
pub const BRUTE_FORCE_MAX_N: usize = 24;

/// The halfplane sweep runs in parallel once directions × elements reaches
/// this squared.
const PAR_THRESHOLD: usize = 256;

/// Keeps the larger value; equal values keep the smaller index.
fn better(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Subset sums of `h`, indexed so that bit `k - 1 - i` selects `h[i]`.
fn subset_sums(h: &[Complex64]) -> Vec<Complex64> {
    let k = h.len();
    (0..1u64 << k)
        .map(|mask| {
            h.iter()
                .enumerate()
                .filter(|(i, _)| (mask >> (k - 1 - i)) & 1 == 1)
                .map(|(_, c)| *c)
                .sum()
        })
        .collect()
}

/// Exhaustive maximizer of `|h|` over all `2^N` configs. Ties resolve to
/// the lexicographically smallest bitstring (element 0 first).
pub fn brute_force_opt(env: &Environment) -> Result<(SurfaceConfig, f64)> {
    let n = env.n_elements();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::SizeGuard {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let (_, index) = if env.is_linear() {
        // meet in the middle: elements [0, k) form the high bits
        let k = n / 2;
        let high = subset_sums(&env.h()[..k]);
        let low = subset_sums(&env.h()[k..]);
        let low_bits = n - k;
        let hz = env.h_z();
        high.par_iter()
            .enumerate()
            .map(|(a, &ha)| {
                let base = hz + ha;
                let mut best = (f64::NEG_INFINITY, 0u64);
                for (b, &lb) in low.iter().enumerate() {
                    let v = (base + lb).norm_sqr();
                    if v > best.0 {
                        best = (v, ((a as u64) << low_bits) | b as u64);
                    }
                }
                best
            })
            .reduce(|| (f64::NEG_INFINITY, u64::MAX), better)
    } else {
        (0..1u64 << n)
            .into_par_iter()
            .map(|idx| {
                let c = SurfaceConfig::from_index(idx, n);
                (evaluate_channel(env, &c).map(|h| h.norm_sqr()).unwrap_or(f64::NEG_INFINITY), idx)
            })
            .reduce(|| (f64::NEG_INFINITY, u64::MAX), better)
    };
    let config = SurfaceConfig::from_index(index, n);
    let mag = evaluate_channel(env, &config)?.norm();
    Ok((config, mag))
}

fn side_of(h: Complex64, theta: f64) -> f64 {
    h.re * theta.cos() + h.im * theta.sin()
}

/// Config turning on every element with `Re(h_i e^{−jθ}) ≥ 0`.
pub fn halfplane_config(env: &Environment, theta: f64) -> SurfaceConfig {
    let (c, s) = (theta.cos(), theta.sin());
    SurfaceConfig::from_bits(env.h().iter().map(|h| h.re * c + h.im * s >= 0.0).collect())
}

/// Representative directions for every distinct halfplane partition of the
/// non-zero elements: one direction strictly inside each arc between
/// consecutive critical angles `arg(h_i) ± π/2`.
pub fn partition_directions(env: &Environment) -> Vec<f64> {
    let two_pi = 2.0 * PI;
    let mut crit: Vec<f64> = env
        .h()
        .iter()
        .filter(|h| h.norm_sqr() > 0.0)
        .flat_map(|h| {
            let a = h.arg();
            [(a + PI / 2.0).rem_euclid(two_pi), (a - PI / 2.0).rem_euclid(two_pi)]
        })
        .collect();
    crit.sort_by(f64::total_cmp);
    crit.dedup();
    let m = crit.len();
    (0..m)
        .map(|k| {
            let lo = crit[k];
            let hi = if k + 1 < m { crit[k + 1] } else { crit[0] + two_pi };
            0.5 * (lo + hi)
        })
        .collect()
}

/// Config for direction `theta` where zero-valued elements stay off.
fn candidate_config(env: &Environment, theta: f64) -> SurfaceConfig {
    SurfaceConfig::from_bits(
        env.h()
            .iter()
            .map(|&h| h.norm_sqr() > 0.0 && side_of(h, theta) >= 0.0)
            .collect(),
    )
}

fn candidate_power(env: &Environment, theta: f64) -> f64 {
    if env.is_linear() {
        let (c, s) = (theta.cos(), theta.sin());
        let mut acc = env.h_z();
        for &h in env.h() {
            if h.norm_sqr() > 0.0 && h.re * c + h.im * s >= 0.0 {
                acc += h;
            }
        }
        acc.norm_sqr()
    } else {
        evaluate_channel(env, &candidate_config(env, theta))
            .map(|h| h.norm_sqr())
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Optimal config under the linear model: the best of the halfplane
/// solutions over all `O(N)` distinct directions, plus the direction of
/// `h_Z`. `O(N²)` overall.
pub fn halfplane_opt(env: &Environment) -> (SurfaceConfig, f64) {
    let mut dirs = partition_directions(env);
    if env.h_z().norm_sqr() > 0.0 {
        dirs.push(env.h_z().arg());
    }
    if dirs.is_empty() {
        return (SurfaceConfig::all_zeros(env.n_elements()), env.h_z().norm());
    }
    let powers: Vec<f64> = if dirs.len() * env.n_elements() >= PAR_THRESHOLD * PAR_THRESHOLD {
        dirs.par_iter().map(|&t| candidate_power(env, t)).collect()
    } else {
        dirs.iter().map(|&t| candidate_power(env, t)).collect()
    };
    let best = powers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let config = dirs
        .iter()
        .zip(&powers)
        .filter(|(_, &p)| p == best)
        .map(|(&t, _)| candidate_config(env, t))
        .min()
        .expect("at least one candidate");
    let mag = evaluate_channel(env, &config).expect("length matches").norm();
    (config, mag)
}

/// Splits the elements by the line through the origin perpendicular to
/// `theta` and returns the better of the two one-side-on configs.
pub fn arbitrary_line_2approx(env: &Environment, theta: f64) -> (SurfaceConfig, f64) {
    let a = halfplane_config(env, theta);
    let b = a.complement();
    let ma = evaluate_channel(env, &a).expect("length matches").norm();
    let mb = evaluate_channel(env, &b).expect("length matches").norm();
    if mb > ma {
        (b, mb)
    } else {
        (a, ma)
    }
}

/// `max |Σ b_i h_i|`: the optimum with the baseline path removed.
pub fn surface_only_opt(env: &Environment) -> f64 {
    halfplane_opt(&env.surface_only()).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ideal_upper_bound;
    use crate::synth::{gen_iid, IidEnvSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bits(cfg: &SurfaceConfig) -> String {
        cfg.to_string()
    }

    /// Plain enumeration through `evaluate_channel`; shares no code with
    /// the meet-in-the-middle search.
    fn naive_opt(env: &Environment) -> (SurfaceConfig, f64) {
        let n = env.n_elements();
        let mut best = (SurfaceConfig::all_zeros(n), f64::NEG_INFINITY);
        for idx in 0..1u64 << n {
            let cfg = SurfaceConfig::from_index(idx, n);
            let m = evaluate_channel(env, &cfg).unwrap().norm();
            if m > best.1 {
                best = (cfg, m);
            }
        }
        best
    }

    fn iid(n: usize, seed: u64) -> Environment {
        gen_iid(&IidEnvSpec {
            n_elements: n,
            element_sigma: 1.0,
            baseline_magnitude: 1.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn brute_force_examples() {
        let env = Environment::new(c(1.0, 0.0), vec![c(-1.0, 0.0)]).unwrap();
        let (cfg, m) = brute_force_opt(&env).unwrap();
        assert_eq!(bits(&cfg), "0");
        assert_eq!(m, 1.0);

        let env = Environment::new(c(0.0, 0.0), vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let (cfg, m) = brute_force_opt(&env).unwrap();
        assert_eq!(bits(&cfg), "11");
        assert!((m - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn brute_force_tie_break_is_lexicographic() {
        // "10" and "01" both reach magnitude 1
        let env = Environment::new(c(0.0, 0.0), vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let (cfg, m) = brute_force_opt(&env).unwrap();
        assert_eq!(m, 1.0);
        assert_eq!(bits(&cfg), "01");
        let env = Environment::new(c(0.0, 0.0), vec![c(0.0, 1.0), c(0.0, 1.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(bits(&brute_force_opt(&env).unwrap().0), "110");
    }

    #[test]
    fn brute_force_size_guard() {
        let env = Environment::new(c(1.0, 0.0), vec![c(0.1, 0.0); 25]).unwrap();
        assert!(matches!(brute_force_opt(&env), Err(Error::SizeGuard { n: 25, max: 24 })));
    }

    #[test]
    fn brute_force_matches_naive() {
        for seed in 0..40 {
            let env = iid(1 + (seed as usize % 12), seed);
            let (cfg, m) = brute_force_opt(&env).unwrap();
            let (ncfg, nm) = naive_opt(&env);
            assert!((m - nm).abs() <= 1e-12 * nm, "seed {seed}");
            assert_eq!(cfg, ncfg, "seed {seed}");
        }
    }

    #[test]
    fn brute_force_with_interactions_matches_naive() {
        let env = iid(8, 3);
        let env = crate::synth::add_pair_interactions(&env, &[(0, 1), (2, 3), (6, 7)], 0.8, 9).unwrap();
        let (cfg, m) = brute_force_opt(&env).unwrap();
        let (ncfg, nm) = naive_opt(&env);
        assert_eq!(cfg, ncfg);
        assert_eq!(m, nm);
    }

    #[test]
    fn halfplane_examples() {
        let env = Environment::new(c(1.0, 0.0), vec![c(1.0, 0.0), c(-0.5, 0.0)]).unwrap();
        let (cfg, m) = halfplane_opt(&env);
        assert_eq!(bits(&cfg), "10");
        assert_eq!(m, 2.0);

        let env = Environment::new(c(0.3, -0.2), vec![c(0.0, 0.0); 4]).unwrap();
        let (cfg, m) = halfplane_opt(&env);
        assert!(cfg.is_all_zeros());
        assert_eq!(m, env.h_z().norm());
    }

    #[test]
    fn halfplane_matches_brute_force() {
        for seed in 0..300 {
            let env = iid(1 + (seed as usize % 16), 1000 + seed);
            let (_, bf) = brute_force_opt(&env).unwrap();
            let (_, hp) = halfplane_opt(&env);
            assert!((bf - hp).abs() <= 1e-12 * bf, "seed {seed}: {bf} vs {hp}");
        }
    }

    #[test]
    fn optimum_satisfies_sign_property() {
        for seed in 0..100 {
            let env = iid(10, 500 + seed);
            let (cfg, _) = brute_force_opt(&env).unwrap();
            let hopt = evaluate_channel(&env, &cfg).unwrap();
            for (i, &h) in env.h().iter().enumerate() {
                let dot = (h * hopt.conj()).re;
                if cfg.get(i) {
                    assert!(dot >= -1e-12, "seed {seed} elem {i}");
                } else {
                    assert!(dot <= 1e-12, "seed {seed} elem {i}");
                }
            }
        }
    }

    #[test]
    fn arbitrary_line_examples() {
        let env = Environment::new(c(0.0, 0.0), vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let (cfg, m) = arbitrary_line_2approx(&env, PI / 2.0);
        assert_eq!(bits(&cfg), "11");
        assert_eq!(m, 2.0);

        // direction of the true optimum reproduces it
        for seed in 0..50 {
            let env = iid(9, 70 + seed);
            let (opt, m) = brute_force_opt(&env).unwrap();
            let theta = evaluate_channel(&env, &opt).unwrap().arg();
            let (cfg, lm) = arbitrary_line_2approx(&env, theta);
            assert!((lm - m).abs() <= 1e-12 * m);
            assert_eq!(evaluate_channel(&env, &cfg).unwrap().norm(), lm);
        }
    }

    #[test]
    fn two_approx_can_fail_without_baseline() {
        // A side at ±89° cancels, B side at ±91° cancels, yet {89°, 91°} sums to ~2.
        let deg = PI / 180.0;
        let h = [89.0, -89.0, 91.0, -91.0].map(|a: f64| Complex64::from_polar(1.0, a * deg)).to_vec();
        let env = Environment::new(c(0.0, 0.0), h).unwrap();
        let (_, opt) = brute_force_opt(&env).unwrap();
        assert!((opt - 2.0 * deg.cos()).abs() < 1e-12);
        let (_, m) = arbitrary_line_2approx(&env, 0.0);
        assert!((m - 2.0 * (89.0 * deg).cos()).abs() < 1e-12);
        assert!(m < 0.05 * opt);
    }

    #[test]
    fn two_approx_can_fail_with_baseline() {
        // h_Z = −1 and two elements at ±ε straddling the real axis: both must
        // be on to beat the baseline, but no line through the origin perpendicular
        // to the imaginary axis puts them on the same side.
        let eps: f64 = 0.05;
        let env = Environment::new(c(-1.0, 0.0), vec![Complex64::from_polar(1.0, eps), Complex64::from_polar(1.0, -eps)])
            .unwrap();
        let (_, opt) = brute_force_opt(&env).unwrap();
        let (_, m) = arbitrary_line_2approx(&env, PI / 2.0);
        assert!(m < 0.5 * opt);
    }

    #[test]
    fn surface_only_examples() {
        let env = Environment::new(c(5.0, 0.0), vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert_eq!(surface_only_opt(&env), 1.0);
        let env = Environment::new(c(0.0, 0.0), vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)])
            .unwrap();
        let brute = brute_force_opt(&env).unwrap().1;
        assert!((brute - 2f64.sqrt()).abs() < 1e-15);
        assert!((surface_only_opt(&env) - brute).abs() < 1e-15);
    }

    #[test]
    fn pi_bound_on_random_instances() {
        for seed in 0..200 {
            let env = iid(1 + seed as usize % 40, 4000 + seed);
            let ideal = ideal_upper_bound(&env.surface_only());
            assert!(surface_only_opt(&env) >= ideal / PI);
        }
    }

    #[test]
    fn partition_directions_cover_every_split() {
        let env = iid(6, 77);
        let dirs = partition_directions(&env);
        assert_eq!(dirs.len(), 12);
        let mut seen: Vec<String> = dirs.iter().map(|&t| bits(&halfplane_config(&env, t))).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 12);
    }
}
