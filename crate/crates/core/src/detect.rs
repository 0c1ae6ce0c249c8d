//! The users' variance test and its behavior under parameter uncertainty.
//!
//! Bob checks the sample variance of the disclosed subsequence against
//! the expectation `T_nominal * V + 1`. The heterodyne intercept-resend
//! attack adds `2T` of excess variance, so with perfectly known
//! transmittance the test is sharp — but an uncertainty of `rel_dT` in T
//! smears the expectation by `rel_dT * T * V`, and once that reaches the
//! attack excess the two hypotheses overlap no matter where the
//! thresholds sit. [`detectability_margin`] is that arithmetic;
//! [`roc_sweep`] measures the resulting false-alarm/missed-detection
//! trade-off by Monte Carlo.

use std::io::Write;

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::model::{AttackModel, SessionConfig, Snu};
use crate::rng::{StreamLabel, Substream};
use crate::simulate::{stream_disclosed_variance, PulseLedger};
use crate::stats;
use crate::{Error, Result};

/// Outcome of the variance check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    AbortAttackSuspected,
}

/// Result of one variance test over the disclosed subsequence.
#[derive(Debug, Clone, Copy)]
pub struct DetectionReport {
    pub n_disclosed: usize,
    /// Unbiased sample variance of the disclosed Bob outcomes, SNU.
    pub var_hat: f64,
    /// `T_nominal * V + 1`, what the users believe they should see.
    pub expected_var: f64,
    pub threshold_lo: f64,
    pub threshold_hi: f64,
    pub decision: Decision,
    /// Two-sided p-value of `var_hat` under the no-attack hypothesis.
    pub p_value: f64,
}

/// Sample-size cutoff above which the chi-square law of the sample
/// variance is replaced by its Gaussian approximation.
const GAUSSIAN_APPROX_MIN_N: usize = 10_000;

/// Two-sided variance test at significance `alpha`.
pub fn variance_test(ledger: &PulseLedger, alpha: f64) -> Result<DetectionReport> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::InvalidConfig("alpha must be in (0,1)".into()));
    }
    let disclosed = ledger.disclosed_bob_outcomes();
    let n = disclosed.len();
    if n < 100 {
        return Err(Error::InsufficientSamples(format!(
            "variance test needs at least 100 disclosed pulses, got {n}"
        )));
    }
    let var_hat = stats::variance(&disclosed);
    let expected = ledger.config.nominal_transmittance * ledger.config.modulation_variance.0 + 1.0;
    let (threshold_lo, threshold_hi, p_value) = if n > GAUSSIAN_APPROX_MIN_N {
        let sd = expected * (2.0 / (n as f64 - 1.0)).sqrt();
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let z = std_normal.inverse_cdf(1.0 - alpha / 2.0);
        let cdf = std_normal.cdf((var_hat - expected) / sd);
        (
            expected - z * sd,
            expected + z * sd,
            (2.0 * cdf.min(1.0 - cdf)).clamp(0.0, 1.0),
        )
    } else {
        let df = n as f64 - 1.0;
        let chi2 = ChiSquared::new(df).expect("positive degrees of freedom");
        let x = df * var_hat / expected;
        let cdf = chi2.cdf(x);
        (
            expected * chi2.inverse_cdf(alpha / 2.0) / df,
            expected * chi2.inverse_cdf(1.0 - alpha / 2.0) / df,
            (2.0 * cdf.min(1.0 - cdf)).clamp(0.0, 1.0),
        )
    };
    let decision = if var_hat >= threshold_lo && var_hat <= threshold_hi {
        Decision::Accept
    } else {
        Decision::AbortAttackSuspected
    };
    Ok(DetectionReport {
        n_disclosed: n,
        var_hat,
        expected_var: expected,
        threshold_lo,
        threshold_hi,
        decision,
        p_value,
    })
}

/// Attack excess minus the variance ambiguity from transmittance
/// uncertainty: `T * (2 - rel_dT * V)`, SNU.
///
/// Factored form, so the boundary `rel_dT = 2/V` gives exactly zero for
/// every `T`. A nonpositive margin means the heterodyne signature is
/// indistinguishable from an allowed transmittance fluctuation even with
/// infinite statistics.
pub fn detectability_margin(transmittance: f64, modulation_variance: Snu, rel_dt: f64) -> Snu {
    Snu(transmittance * (2.0 - rel_dt * modulation_variance.0))
}

/// One point of the false-alarm/missed-detection trade-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Acceptance half-width in units of the null-hypothesis standard
    /// deviation of the sample variance.
    pub threshold_scale: f64,
    pub false_alarm: f64,
    pub missed_detection: f64,
}

/// Threshold scale equivalent to a two-sided significance level.
pub fn alpha_to_threshold_scale(alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::InvalidConfig("alpha must be in (0,1)".into()));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    Ok(std_normal.inverse_cdf(1.0 - alpha / 2.0))
}

/// Monte Carlo ROC sweep under transmittance uncertainty.
///
/// Runs `n_trials` no-attack sessions and `n_trials` attacked sessions,
/// each with the true transmittance drawn uniformly from
/// `T_nominal * (1 ± rel_dT)` (clamped to 1), and evaluates every
/// threshold scale against the same trial statistics. Trials are
/// independent substreams of the config seed, so the sweep is
/// deterministic and worker-count independent.
pub fn roc_sweep(
    config: &SessionConfig,
    rel_dt: f64,
    n_trials: usize,
    thresholds: &[f64],
) -> Result<Vec<RocPoint>> {
    let cfg = config.clone().validate()?;
    if n_trials < 100 {
        return Err(Error::InvalidConfig(
            "n_trials must be at least 100".into(),
        ));
    }
    if !rel_dt.is_finite() || rel_dt < 0.0 || rel_dt >= 1.0 {
        return Err(Error::InvalidConfig("rel_dT must be in [0,1)".into()));
    }
    if thresholds.is_empty() || thresholds.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::InvalidConfig(
            "threshold scales must be positive and nonempty".into(),
        ));
    }
    let null_stats = run_trials(&cfg, rel_dt, n_trials, StreamLabel::TrialNull, AttackModel::none())?;
    let attacked_stats = run_trials(
        &cfg,
        rel_dt,
        n_trials,
        StreamLabel::TrialAttacked,
        cfg.attack,
    )?;
    let center = cfg.nominal_transmittance * cfg.modulation_variance.0 + 1.0;
    let points = thresholds
        .iter()
        .map(|&scale| {
            let outside = |&(n_disc, var_hat): &(usize, f64)| {
                let w = scale * center * (2.0 / (n_disc as f64 - 1.0)).sqrt();
                (var_hat - center).abs() > w
            };
            let false_alarm =
                null_stats.iter().filter(|s| outside(s)).count() as f64 / n_trials as f64;
            let missed_detection =
                attacked_stats.iter().filter(|s| !outside(s)).count() as f64 / n_trials as f64;
            RocPoint {
                threshold_scale: scale,
                false_alarm,
                missed_detection,
            }
        })
        .collect();
    Ok(points)
}

fn run_trials(
    cfg: &SessionConfig,
    rel_dt: f64,
    n_trials: usize,
    label: StreamLabel,
    attack: AttackModel,
) -> Result<Vec<(usize, f64)>> {
    let t_nom = cfg.nominal_transmittance;
    let t_lo = t_nom * (1.0 - rel_dt);
    let t_hi = (t_nom * (1.0 + rel_dt)).min(1.0);
    let run_one = move |cfg: &SessionConfig, i: u64| -> Result<(usize, f64)> {
        let mut rng = Substream::new(cfg.seed, label, i);
        let u: f64 = rng.gen();
        let mut trial_cfg = cfg.clone();
        trial_cfg.true_transmittance = t_lo + u * (t_hi - t_lo);
        trial_cfg.attack = attack;
        trial_cfg.seed = rng.next_u64();
        let dv = stream_disclosed_variance(&trial_cfg)?;
        Ok((dv.n_disclosed, dv.var_hat))
    };
    #[cfg(feature = "parallel")]
    {
        (0..n_trials as u64)
            .into_par_iter()
            .map(|i| run_one(cfg, i))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_trials as u64).map(|i| run_one(cfg, i)).collect()
    }
}

/// Write ROC points as `rel_dT,threshold_scale,false_alarm,
/// missed_detection,n_trials` under a `#` config comment.
pub fn write_roc_csv<W: Write>(
    w: &mut W,
    comment: &str,
    blocks: &[(f64, usize, Vec<RocPoint>)],
) -> std::io::Result<()> {
    writeln!(w, "# {comment}")?;
    writeln!(w, "rel_dT,threshold_scale,false_alarm,missed_detection,n_trials")?;
    for (rel_dt, n_trials, points) in blocks {
        for p in points {
            writeln!(
                w,
                "{},{},{},{},{}",
                rel_dt, p.threshold_scale, p.false_alarm, p.missed_detection, n_trials
            )?;
        }
    }
    Ok(())
}

/// The tap-deviation arithmetic under one unit reading of the amplitude.
#[derive(Debug, Clone, Copy)]
pub struct TapReading {
    /// Reading label: the amplitude taken in SNU, or as sqrt(photons).
    pub label: &'static str,
    /// Mean-square amplitude in SNU under this reading.
    pub amplitude_sq_snu: f64,
    /// Variance shift a relative tap deviation induces at Bob, SNU.
    pub signal_shift: Snu,
    /// Heterodyne attack excess `2T` at the same point, SNU.
    pub attack_excess: Snu,
    /// signal_shift / attack_excess.
    pub ratio: f64,
}

/// Both unit readings of the source-tap sensitivity claim.
#[derive(Debug, Clone, Copy)]
pub struct TapSensitivity {
    pub transmittance: f64,
    pub snu_reading: TapReading,
    pub photon_reading: TapReading,
}

/// How a relative deviation of the source tap compares against the
/// heterodyne attack signature after `user_loss_db` of total loss.
///
/// The amplitude is ambiguous in the source claim, so both readings are
/// reported: `m` as an SNU amplitude (`m^2` SNU of mean-square signal)
/// and `m^2` as a photon count (`4 m^2` SNU). Neither is asserted to be
/// the intended one.
pub fn tap_sensitivity(
    m_amplitude: Snu,
    user_loss_db: f64,
    tap_deviation: f64,
) -> Result<TapSensitivity> {
    if !user_loss_db.is_finite() || user_loss_db < 0.0 {
        return Err(Error::InvalidConfig(
            "user_loss_db must be finite and nonnegative".into(),
        ));
    }
    if !m_amplitude.0.is_finite() || !tap_deviation.is_finite() {
        return Err(Error::InvalidConfig(
            "tap parameters must be finite".into(),
        ));
    }
    let t = 10.0_f64.powf(-user_loss_db / 10.0);
    let attack_excess = 2.0 * t;
    let reading = |label: &'static str, amplitude_sq_snu: f64| TapReading {
        label,
        amplitude_sq_snu,
        signal_shift: Snu(tap_deviation * t * amplitude_sq_snu),
        attack_excess: Snu(attack_excess),
        ratio: tap_deviation * amplitude_sq_snu / 2.0,
    };
    let m_sq = m_amplitude.0 * m_amplitude.0;
    Ok(TapSensitivity {
        transmittance: t,
        snu_reading: reading("snu_amplitude", m_sq),
        photon_reading: reading("photon_m2", 4.0 * m_sq),
    })
}

/// Write both tap readings as CSV rows.
pub fn write_tap_csv<W: Write>(
    w: &mut W,
    comment: &str,
    m_amplitude: Snu,
    user_loss_db: f64,
    tap_deviation: f64,
    sensitivity: &TapSensitivity,
) -> std::io::Result<()> {
    writeln!(w, "# {comment}")?;
    writeln!(
        w,
        "reading,m,loss_db,deviation,T,signal_shift,attack_excess,ratio"
    )?;
    for r in [&sensitivity.snu_reading, &sensitivity.photon_reading] {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.label,
            m_amplitude,
            user_loss_db,
            tap_deviation,
            sensitivity.transmittance,
            r.signal_shift,
            r.attack_excess,
            r.ratio
        )?;
    }
    Ok(())
}
