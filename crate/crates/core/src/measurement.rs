//! Simulated RSSI-ratio receiver.
//!
//! Each sample is the exact power ratio scaled by `10^(ε/10)` with
//! `ε ~ Normal(0, rel_sigma_db)`; with probability `outlier_prob` the
//! sample is additionally shifted by `±outlier_scale_db` (packet loss, AGC
//! jumps). Sample `seq` draws from ChaCha stream `seq` of the noise seed, so
//! a measurement is a pure function of `(seed, seq)`.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{evaluate_channel, power_to_db, rssi_ratio_exact, Environment, SurfaceConfig};
use crate::error::{Error, Result};

/// SNR values below this are reported as the floor.
pub const SNR_FLOOR_DB: f64 = -40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of each sample in dB.
    pub rel_sigma_db: f64,
    pub outlier_prob: f64,
    pub outlier_scale_db: f64,
    /// Phase jitter of complex (phase-synchronised) measurements, radians.
    #[serde(default)]
    pub phase_sigma_rad: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::gaussian(0.0, 0)
    }

    pub fn gaussian(rel_sigma_db: f64, seed: u64) -> Self {
        Self {
            rel_sigma_db,
            outlier_prob: 0.0,
            outlier_scale_db: 0.0,
            phase_sigma_rad: 0.0,
            seed,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.rel_sigma_db == 0.0 && self.outlier_prob == 0.0 && self.phase_sigma_rad == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_sigma_db >= 0.0 && self.rel_sigma_db.is_finite()) {
            return Err(Error::InvalidArgument("rel_sigma_db must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_prob) {
            return Err(Error::InvalidArgument("outlier_prob must lie in [0, 1)".into()));
        }
        if !(self.outlier_scale_db >= 0.0 && self.phase_sigma_rad >= 0.0) {
            return Err(Error::InvalidArgument("noise scales must be >= 0".into()));
        }
        Ok(())
    }

    fn stream(&self, seq: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(seq);
        rng
    }

    /// dB perturbation for sample `seq`; also returns a phase perturbation.
    fn draw(&self, seq: u64) -> (f64, f64) {
        let mut rng = self.stream(seq);
        let z: f64 = StandardNormal.sample(&mut rng);
        let zp: f64 = StandardNormal.sample(&mut rng);
        let u: f64 = rng.random();
        let up: bool = rng.random();
        let mut eps = self.rel_sigma_db * z;
        if u < self.outlier_prob {
            eps += if up { self.outlier_scale_db } else { -self.outlier_scale_db };
        }
        (eps, self.phase_sigma_rad * zp)
    }
}

/// One RSSI-ratio sample reported to the controller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub config: SurfaceConfig,
    pub rssi_ratio: f64,
    pub seq: u64,
    pub batch: u64,
}

/// Noisy RSSI-ratio of `config`.
pub fn measure(
    env: &Environment,
    config: &SurfaceConfig,
    noise: &NoiseModel,
    seq: u64,
    batch: u64,
) -> Result<MeasurementRecord> {
    let exact = rssi_ratio_exact(env, config)?;
    let rssi_ratio = if noise.is_noiseless() {
        exact
    } else {
        let (eps, _) = noise.draw(seq);
        exact * 10f64.powf(eps / 10.0)
    };
    Ok(MeasurementRecord {
        config: config.clone(),
        rssi_ratio,
        seq,
        batch,
    })
}

/// Noisy complex ratio `h(config) / h_Z`, as seen by a receiver whose clock
/// is synchronised with the controller. Amplitude noise is half the dB
/// perturbation of [`measure`]; phase noise is `phase_sigma_rad`.
pub fn measure_complex(
    env: &Environment,
    config: &SurfaceConfig,
    noise: &NoiseModel,
    seq: u64,
) -> Result<Complex64> {
    let hz = env.h_z();
    if hz.norm_sqr() == 0.0 {
        return Err(Error::DegenerateBaseline);
    }
    let exact = evaluate_channel(env, config)? / hz;
    if noise.is_noiseless() {
        return Ok(exact);
    }
    let (eps, phi) = noise.draw(seq);
    Ok(exact * Complex64::from_polar(10f64.powf(eps / 20.0), phi))
}

/// A measurement session: one noise stream, strictly increasing sequence
/// numbers, optional trace.
#[derive(Debug)]
pub struct MeasurementSession<'a> {
    env: &'a Environment,
    noise: NoiseModel,
    next_seq: u64,
    batch: u64,
    trace: Option<Vec<MeasurementRecord>>,
}

impl<'a> MeasurementSession<'a> {
    pub fn new(env: &'a Environment, noise: NoiseModel) -> Result<Self> {
        noise.validate()?;
        if env.h_z().norm_sqr() == 0.0 {
            return Err(Error::DegenerateBaseline);
        }
        Ok(Self {
            env,
            noise,
            next_seq: 0,
            batch: 0,
            trace: None,
        })
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn set_batch(&mut self, batch: u64) {
        self.batch = batch;
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn measurements_used(&self) -> u64 {
        self.next_seq
    }

    pub fn measure(&mut self, config: &SurfaceConfig) -> Result<MeasurementRecord> {
        let rec = measure(self.env, config, &self.noise, self.next_seq, self.batch)?;
        self.next_seq += 1;
        if let Some(t) = self.trace.as_mut() {
            t.push(rec.clone());
        }
        Ok(rec)
    }

    /// Median of `reps` repeated measurements of `config`.
    pub fn probe(&mut self, config: &SurfaceConfig, reps: usize) -> Result<f64> {
        let mut values = (0..reps)
            .map(|_| self.measure(config).map(|r| r.rssi_ratio))
            .collect::<Result<Vec<_>>>()?;
        Ok(crate::stats::median(&mut values))
    }

    pub fn trace(&self) -> Option<&[MeasurementRecord]> {
        self.trace.as_deref()
    }
}

/// Writes records as `seq,batch,config,rssi_ratio,rssi_ratio_db`.
pub fn write_trace_csv<W: Write>(records: &[MeasurementRecord], mut w: W) -> Result<()> {
    writeln!(w, "seq,batch,config,rssi_ratio,rssi_ratio_db")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.seq,
            r.batch,
            r.config.to_hex(),
            r.rssi_ratio,
            power_to_db(r.rssi_ratio)
        )?;
    }
    Ok(())
}

/// Uniform random config of `n` elements.
pub fn random_config<R: Rng>(rng: &mut R, n: usize) -> SurfaceConfig {
    SurfaceConfig::from_bits((0..n).map(|_| rng.random::<bool>()).collect())
}

/// Measurability SNR in linear units: variance across configs of the
/// per-config mean RSSI-ratio, over the mean within-config variance.
/// Returns `+inf` when the within-config variance is zero.
pub fn measurability_snr_linear(
    env: &Environment,
    n_configs: usize,
    reps: usize,
    noise: &NoiseModel,
) -> Result<f64> {
    if n_configs < 2 || reps < 2 {
        return Err(Error::InvalidArgument("need n_configs >= 2 and reps >= 2".into()));
    }
    noise.validate()?;
    if noise.is_noiseless() {
        return Ok(f64::INFINITY);
    }
    let mut cfg_rng = ChaCha8Rng::seed_from_u64(noise.seed);
    cfg_rng.set_stream(u64::MAX);
    let mut means = Vec::with_capacity(n_configs);
    let mut variances = Vec::with_capacity(n_configs);
    let mut samples = vec![0.0; reps];
    for k in 0..n_configs {
        let config = random_config(&mut cfg_rng, env.n_elements());
        for (r, s) in samples.iter_mut().enumerate() {
            *s = measure(env, &config, noise, (k * reps + r) as u64, 0)?.rssi_ratio;
        }
        let (m, v) = crate::stats::mean_var(&samples);
        means.push(m);
        variances.push(v);
    }
    let signal = crate::stats::mean_var(&means).1;
    let noise_var = variances.iter().sum::<f64>() / n_configs as f64;
    if noise_var == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(signal / noise_var)
}

/// [`measurability_snr_linear`] in dB, floored at [`SNR_FLOOR_DB`].
pub fn measurability_snr(
    env: &Environment,
    n_configs: usize,
    reps: usize,
    noise: &NoiseModel,
) -> Result<f64> {
    let snr = measurability_snr_linear(env, n_configs, reps, noise)?;
    if snr == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(power_to_db(snr).max(SNR_FLOOR_DB))
}
