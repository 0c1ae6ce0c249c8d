//! Seeded Monte Carlo generation of pulse ledgers.
//!
//! Per pulse: both quadratures are drawn from the circularly symmetric
//! Gaussian source, the source model decides what Alice records versus
//! what actually leaves the transmitter, Bob's basis is flipped fairly,
//! and the configured attack acts on a Bernoulli subset of pulses while
//! the rest see the plain lossy channel. Every pulse owns an independent
//! counter-derived substream, so ledgers are bit-identical whether the
//! loop runs sequentially or on any number of workers.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::model::{AttackKind, Basis, PulseRecord, SessionConfig, SourceModel, Snu};
use crate::rng::{Substream, StreamLabel, SCHEME_ID};
use crate::stats::RunningVariance;
use crate::{Error, Result};

/// A complete simulated session: the config echo, every pulse in index
/// order, and the identifier of the substream scheme that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseLedger {
    pub config: SessionConfig,
    pub pulses: Vec<PulseRecord>,
    pub rng_scheme: &'static str,
}

impl PulseLedger {
    pub fn n_disclosed(&self) -> usize {
        self.pulses.iter().filter(|p| p.disclosed).count()
    }

    pub fn n_attacked(&self) -> usize {
        self.pulses.iter().filter(|p| p.attacked).count()
    }

    /// Bob outcomes of the disclosed subsequence, in ledger order.
    pub fn disclosed_bob_outcomes(&self) -> Vec<f64> {
        self.pulses
            .iter()
            .filter(|p| p.disclosed)
            .map(|p| p.bob_outcome)
            .collect()
    }

    /// Pulses kept for key generation, in ledger order.
    pub fn undisclosed(&self) -> impl Iterator<Item = &PulseRecord> {
        self.pulses.iter().filter(|p| !p.disclosed)
    }

    /// Export the full ledger.
    ///
    /// Columns: `index,basis,m,m_A,m_B,m_E,attacked,disclosed`, with an
    /// empty `m_E` field where Eve holds no record. The first line is a
    /// `#` comment with the canonical config.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# {}", self.config.canonical_line())?;
        writeln!(w, "index,basis,m,m_A,m_B,m_E,attacked,disclosed")?;
        for (i, p) in self.pulses.iter().enumerate() {
            let eve = p.eve_record.map(|e| e.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                i, p.basis, p.modulation, p.alice_record, p.bob_outcome, eve, p.attacked,
                p.disclosed
            )?;
        }
        Ok(())
    }
}

/// Draw one pulse's modulation pair: independent zero-mean Gaussians of
/// variance `variance` for each quadrature.
pub fn draw_modulation<R: Rng>(rng: &mut R, variance: Snu) -> (f64, f64) {
    let sd = variance.0.sqrt();
    let x: f64 = rng.sample(StandardNormal);
    let p: f64 = rng.sample(StandardNormal);
    (sd * x, sd * p)
}

/// What the source model did to one pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceOutcome {
    /// Alice's record of the launched amplitude.
    pub alice_record: f64,
    /// Amplitude that actually entered the channel.
    pub transmitted: f64,
}

/// Apply the source model to the chosen-basis amplitude `m`.
pub fn apply_source<R: Rng>(rng: &mut R, m: f64, source: &SourceModel) -> SourceOutcome {
    match source {
        SourceModel::Ideal => SourceOutcome {
            alice_record: m,
            transmitted: m,
        },
        SourceModel::TapHomodyne {
            record_noise_var, ..
        } => {
            let noise: f64 = rng.sample(StandardNormal);
            SourceOutcome {
                alice_record: m + record_noise_var.sqrt() * noise,
                transmitted: m,
            }
        }
        SourceModel::AttenuatorFluctuation { rel_sigma } => {
            let delta: f64 = rng.sample(StandardNormal);
            SourceOutcome {
                alice_record: m,
                transmitted: m * (1.0 + rel_sigma * delta),
            }
        }
    }
}

/// Lossy channel with no eavesdropper: `m_B = sqrt(T) m + n_B`,
/// `var n_B = 1`.
pub fn apply_lossy_channel<R: Rng>(rng: &mut R, m: f64, transmittance: f64) -> f64 {
    let n_b: f64 = rng.sample(StandardNormal);
    transmittance.sqrt() * m + n_b
}

/// Beamsplitter attack: Eve taps `1 - T` and forwards the rest lossless.
/// Returns `(m_B, m_E)` with independent unit-variance detector noises.
pub fn apply_beamsplitter_attack<R: Rng>(
    rng: &mut R,
    m: f64,
    transmittance: f64,
) -> (f64, f64) {
    let n_b: f64 = rng.sample(StandardNormal);
    let n_e: f64 = rng.sample(StandardNormal);
    let m_b = transmittance.sqrt() * m + n_b;
    let m_e = (1.0 - transmittance).sqrt() * m + n_e;
    (m_b, m_e)
}

/// Heterodyne intercept-resend: Eve measures both quadratures near the
/// transmitter (2 SNU added noise in the chosen quadrature) and resends
/// her measured value, which then crosses the link of transmittance `T`.
pub fn apply_heterodyne_ir_attack<R: Rng>(
    rng: &mut R,
    m: f64,
    transmittance: f64,
) -> (f64, f64) {
    let het_noise: f64 = rng.sample(StandardNormal);
    let m_e = m + std::f64::consts::SQRT_2 * het_noise;
    let n_b: f64 = rng.sample(StandardNormal);
    let m_b = transmittance.sqrt() * m_e + n_b;
    (m_b, m_e)
}

fn generate_pulse(cfg: &SessionConfig, index: u64) -> PulseRecord {
    let mut rng = Substream::new(cfg.seed, StreamLabel::Pulse, index);
    let (modulation_x, modulation_p) = draw_modulation(&mut rng, cfg.modulation_variance);
    let basis = if rng.gen_bool(0.5) { Basis::X } else { Basis::P };
    let modulation = match basis {
        Basis::X => modulation_x,
        Basis::P => modulation_p,
    };
    let source = apply_source(&mut rng, modulation, &cfg.source);
    let attacked = cfg.attack.fraction > 0.0 && rng.gen_bool(cfg.attack.fraction);
    let t = cfg.true_transmittance;
    let (bob_outcome, eve_record) = if attacked {
        match cfg.attack.kind {
            AttackKind::Beamsplitter => {
                let (b, e) = apply_beamsplitter_attack(&mut rng, source.transmitted, t);
                (b, Some(e))
            }
            AttackKind::HeterodyneInterceptResend => {
                let (b, e) = apply_heterodyne_ir_attack(&mut rng, source.transmitted, t);
                (b, Some(e))
            }
            AttackKind::NoAttack => unreachable!("no-attack fraction is normalized to 0"),
        }
    } else {
        (apply_lossy_channel(&mut rng, source.transmitted, t), None)
    };
    let disclosed = rng.gen_bool(cfg.disclosure_fraction);
    PulseRecord {
        modulation_x,
        modulation_p,
        basis,
        modulation,
        alice_record: source.alice_record,
        bob_outcome,
        eve_record,
        attacked,
        disclosed,
    }
}

/// Run a full session, generating pulses in parallel when the `parallel`
/// feature is enabled. Bit-identical to [`simulate_session_seq`].
pub fn simulate_session(config: &SessionConfig) -> Result<PulseLedger> {
    let cfg = config.clone().validate()?;
    #[cfg(feature = "parallel")]
    let pulses: Vec<PulseRecord> = (0..cfg.n_pulses as u64)
        .into_par_iter()
        .map(|i| generate_pulse(&cfg, i))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let pulses: Vec<PulseRecord> = (0..cfg.n_pulses as u64)
        .map(|i| generate_pulse(&cfg, i))
        .collect();
    Ok(PulseLedger {
        config: cfg,
        pulses,
        rng_scheme: SCHEME_ID,
    })
}

/// Always-sequential session generator. Exists so the bench suite and the
/// determinism tests can compare against the parallel path directly.
pub fn simulate_session_seq(config: &SessionConfig) -> Result<PulseLedger> {
    let cfg = config.clone().validate()?;
    let pulses: Vec<PulseRecord> = (0..cfg.n_pulses as u64)
        .map(|i| generate_pulse(&cfg, i))
        .collect();
    Ok(PulseLedger {
        config: cfg,
        pulses,
        rng_scheme: SCHEME_ID,
    })
}

/// Sample variance of the disclosed subsequence.
#[derive(Debug, Clone, Copy)]
pub struct DisclosedVariance {
    pub n_disclosed: usize,
    pub var_hat: f64,
}

/// Streaming variant of "simulate, then take the disclosed variance":
/// generates the same pulses as [`simulate_session`] but only accumulates
/// Bob's disclosed outcomes, without materializing the ledger. Used by the
/// detection trial loops where thousands of sessions are run.
pub fn stream_disclosed_variance(config: &SessionConfig) -> Result<DisclosedVariance> {
    let cfg = config.clone().validate()?;
    let mut acc = RunningVariance::default();
    for i in 0..cfg.n_pulses as u64 {
        let pulse = generate_pulse(&cfg, i);
        if pulse.disclosed {
            acc.push(pulse.bob_outcome);
        }
    }
    if acc.count() < 2 {
        return Err(Error::InsufficientSamples(
            "fewer than 2 disclosed pulses".into(),
        ));
    }
    Ok(DisclosedVariance {
        n_disclosed: acc.count() as usize,
        var_hat: acc.variance(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AttackModel;
    use crate::stats;

    fn rng() -> Substream {
        Substream::new(0xC0FFEE, StreamLabel::Pulse, 0)
    }

    #[test]
    fn modulation_has_the_configured_variance() {
        let mut r = rng();
        let n = 1_000_000;
        let mut xs = Vec::with_capacity(n);
        let mut ps = Vec::with_capacity(n);
        for _ in 0..n {
            let (x, p) = draw_modulation(&mut r, Snu(100.0));
            xs.push(x);
            ps.push(p);
        }
        // var of the sample variance is 2 V^2 / N; spec band is ~4 sigma
        let vx = stats::variance(&xs);
        assert!((99.0..=101.0).contains(&vx), "var(m_x) = {vx}");
        let cov = stats::covariance(&xs, &ps);
        assert!(cov.abs() < 0.5, "cov = {cov}");
    }

    #[test]
    fn modulation_degenerates_with_vanishing_variance() {
        let mut r = rng();
        for _ in 0..1000 {
            let (x, p) = draw_modulation(&mut r, Snu(1e-30));
            assert!(x.abs() < 1e-10 && p.abs() < 1e-10);
        }
    }

    #[test]
    fn ideal_source_records_exactly() {
        let mut r = rng();
        let out = apply_source(&mut r, 7.3, &SourceModel::Ideal);
        assert_eq!(out.alice_record, 7.3);
        assert_eq!(out.transmitted, 7.3);
    }

    #[test]
    fn tap_source_adds_one_unit_of_record_noise() {
        let mut r = rng();
        let source = SourceModel::TapHomodyne {
            tap_transmittance: 0.5,
            record_noise_var: 1.0,
        };
        let n = 1_000_000;
        let mut diffs = Vec::with_capacity(n);
        for _ in 0..n {
            let out = apply_source(&mut r, 3.0, &source);
            assert_eq!(out.transmitted, 3.0);
            diffs.push(out.alice_record - 3.0);
        }
        let v = stats::variance(&diffs);
        assert!((0.99..=1.01).contains(&v), "var(n_A) = {v}");
    }

    #[test]
    fn attenuator_fluctuation_scales_the_transmitted_amplitude() {
        let mut r = rng();
        let source = SourceModel::AttenuatorFluctuation { rel_sigma: 0.02 };
        let n = 1_000_000;
        let mut sent = Vec::with_capacity(n);
        for _ in 0..n {
            let out = apply_source(&mut r, 10.0, &source);
            assert_eq!(out.alice_record, 10.0);
            sent.push(out.transmitted);
        }
        let mean = stats::mean(&sent);
        let sd = stats::variance(&sent).sqrt();
        assert!((mean - 10.0).abs() < 1e-3, "mean = {mean}");
        assert!((0.198..=0.202).contains(&sd), "sd = {sd}");
    }

    #[test]
    fn beamsplitter_at_full_transmittance_gives_eve_pure_noise() {
        let mut r = rng();
        let n = 1_000_000;
        let mut ms = Vec::with_capacity(n);
        let mut es = Vec::with_capacity(n);
        for _ in 0..n {
            let (m, _) = draw_modulation(&mut r, Snu(100.0));
            let (_, e) = apply_beamsplitter_attack(&mut r, m, 1.0);
            ms.push(m);
            es.push(e);
        }
        let corr = stats::correlation(&ms, &es);
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr = {corr}");
        let v = stats::variance(&es);
        assert!((v - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "var = {v}");
    }

    #[test]
    fn beamsplitter_statistics_match_the_closed_forms() {
        let mut r = rng();
        let n = 1_000_000;
        let (t, v) = (0.5, 100.0);
        let mut bobs = Vec::with_capacity(n);
        let mut eves = Vec::with_capacity(n);
        for _ in 0..n {
            let (m, _) = draw_modulation(&mut r, Snu(v));
            let (b, e) = apply_beamsplitter_attack(&mut r, m, t);
            bobs.push(b);
            eves.push(e);
        }
        let var_b = stats::variance(&bobs);
        assert!((50.0..=52.0).contains(&var_b), "var(m_B) = {var_b}");
        // rho = sqrt(T(1-T)) V / sqrt((TV+1)((1-T)V+1)) = 50/51 here
        let rho = stats::correlation(&bobs, &eves);
        assert!((rho - 50.0 / 51.0).abs() < 0.002, "rho = {rho}");
    }

    #[test]
    fn heterodyne_statistics_match_the_closed_forms() {
        let mut r = rng();
        let n = 1_000_000;
        let (t, v) = (0.5, 100.0);
        let mut bobs = Vec::with_capacity(n);
        let mut eves = Vec::with_capacity(n);
        let mut excess = Vec::with_capacity(n);
        for _ in 0..n {
            let (m, _) = draw_modulation(&mut r, Snu(v));
            let (b, e) = apply_heterodyne_ir_attack(&mut r, m, t);
            bobs.push(b);
            eves.push(e);
            excess.push(e - m);
        }
        let var_b = stats::variance(&bobs);
        assert!((51.0..=53.0).contains(&var_b), "var(m_B) = {var_b}");
        // Eve's heterodyne noise is 2 SNU in the measured quadrature
        let var_excess = stats::variance(&excess);
        assert!(
            (var_excess - 2.0).abs() < 4.0 * 2.0 * (2.0 / n as f64).sqrt(),
            "var(m_E - m) = {var_excess}"
        );
        // given m_E, only unit detector noise remains on m_B
        let resid = stats::regression_residual_variance(&eves, &bobs);
        assert!((resid - 1.0).abs() < 0.01, "resid var = {resid}");
    }

    #[test]
    fn heterodyne_at_vanishing_transmittance_leaves_shot_noise() {
        let mut r = rng();
        let n = 200_000;
        let mut bobs = Vec::with_capacity(n);
        for _ in 0..n {
            let (m, _) = draw_modulation(&mut r, Snu(100.0));
            let (b, _) = apply_heterodyne_ir_attack(&mut r, m, 1e-12);
            bobs.push(b);
        }
        let var_b = stats::variance(&bobs);
        assert!((var_b - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "var = {var_b}");
    }

    #[test]
    fn lossless_session_shows_signal_plus_shot_noise() {
        let cfg = SessionConfig::new(4.0, 1.0, 1_000_000, 7);
        let ledger = simulate_session(&cfg).unwrap();
        let disclosed = ledger.disclosed_bob_outcomes();
        let v = stats::variance(&disclosed);
        let band = 4.0 * 5.0 * (2.0 / disclosed.len() as f64).sqrt();
        assert!((v - 5.0).abs() < band, "var = {v}");
    }

    #[test]
    fn partial_heterodyne_session_matches_the_mixture_variance() {
        let mut cfg = SessionConfig::new(100.0, 0.1, 2_000_000, 11);
        cfg.attack = AttackModel::heterodyne(0.5);
        let ledger = simulate_session(&cfg).unwrap();
        let bobs: Vec<f64> = ledger.pulses.iter().map(|p| p.bob_outcome).collect();
        let v = stats::variance(&bobs);
        // mixture: TV + f*T*2 + 1 = 11.1; fourth-moment band
        let (v0, v1) = (11.0_f64, 11.2_f64);
        let expected = 11.1;
        let mu4 = 0.5 * 3.0 * v0 * v0 + 0.5 * 3.0 * v1 * v1;
        let sigma = ((mu4 - expected * expected) / bobs.len() as f64).sqrt();
        assert!((v - expected).abs() < 3.0 * sigma, "var = {v}");
    }

    #[test]
    fn attacked_and_disclosed_fractions_follow_their_bernoulli_rates() {
        let mut cfg = SessionConfig::new(100.0, 0.5, 500_000, 5);
        cfg.attack = AttackModel::beamsplitter(0.3);
        cfg.disclosure_fraction = 0.5;
        let ledger = simulate_session(&cfg).unwrap();
        let n = ledger.pulses.len() as f64;
        let attacked_rate = ledger.n_attacked() as f64 / n;
        let disclosed_rate = ledger.n_disclosed() as f64 / n;
        assert!((attacked_rate - 0.3).abs() < 4.0 * (0.3 * 0.7 / n).sqrt());
        assert!((disclosed_rate - 0.5).abs() < 4.0 * (0.25 / n).sqrt());
        // only attacked pulses carry an Eve record
        for p in &ledger.pulses {
            assert_eq!(p.attacked, p.eve_record.is_some());
        }
    }

    #[test]
    fn streaming_variance_agrees_with_the_ledger() {
        let mut cfg = SessionConfig::new(100.0, 0.5, 50_000, 99);
        cfg.attack = AttackModel::heterodyne(1.0);
        let ledger = simulate_session(&cfg).unwrap();
        let streamed = stream_disclosed_variance(&cfg).unwrap();
        let disclosed = ledger.disclosed_bob_outcomes();
        assert_eq!(streamed.n_disclosed, disclosed.len());
        let two_pass = stats::variance(&disclosed);
        assert!((streamed.var_hat - two_pass).abs() < 1e-9 * two_pass);
    }

    #[test]
    fn parallel_and_sequential_sessions_are_identical() {
        let mut cfg = SessionConfig::new(100.0, 0.7, 20_000, 123);
        cfg.attack = AttackModel::heterodyne(0.4);
        cfg.source = SourceModel::TapHomodyne {
            tap_transmittance: 0.5,
            record_noise_var: 1.0,
        };
        let par = simulate_session(&cfg).unwrap();
        let seq = simulate_session_seq(&cfg).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn ledger_csv_has_the_mandatory_header_and_empty_eve_fields() {
        let cfg = SessionConfig::new(4.0, 1.0, 500, 3);
        let ledger = simulate_session(&cfg).unwrap();
        let mut buf = Vec::new();
        ledger.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# V=4"));
        assert_eq!(
            lines.next().unwrap(),
            "index,basis,m,m_A,m_B,m_E,attacked,disclosed"
        );
        let first = lines.next().unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 8);
        assert_eq!(fields[5], "", "no attack, so m_E must be empty");
        assert_eq!(fields[0], "0");
    }
}
