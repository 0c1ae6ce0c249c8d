//! Domain types and unit conventions shared by every other module.
//!
//! All amplitudes and variances are expressed in shot-noise units (SNU):
//! the variance a vacuum-state quadrature shows under homodyne detection
//! is 1, and 1 SNU of mean-square amplitude corresponds to 1/4 photon.

use crate::{Error, Result};

/// A quadrature amplitude or variance in shot-noise units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Snu(pub f64);

impl Snu {
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for Snu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Convert a mean photon number into an SNU variance (1 SNU = 1/4 photon).
pub fn photons_to_snu(n_photons: f64) -> Result<Snu> {
    if !n_photons.is_finite() || n_photons < 0.0 {
        return Err(Error::InvalidConfig(
            "photon number must be finite and nonnegative".into(),
        ));
    }
    Ok(Snu(4.0 * n_photons))
}

/// Inverse of [`photons_to_snu`].
pub fn snu_to_photons(v: Snu) -> f64 {
    v.0 / 4.0
}

/// How well the transmitter knows what it actually sent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceModel {
    /// Alice's record equals the launched amplitude exactly.
    Ideal,
    /// Alice splits every pulse on a tap and homodynes one arm to pin
    /// down the launched amplitude. Her record then carries at least one
    /// shot-noise unit of measurement noise.
    TapHomodyne {
        /// Design transmittance of the tap beamsplitter, in (0,1).
        tap_transmittance: f64,
        /// Variance of the noise on Alice's record, SNU. Must be >= 1.
        record_noise_var: f64,
    },
    /// The output attenuator drifts from pulse to pulse: Alice records
    /// the intended amplitude, but the launched amplitude is scaled by
    /// `1 + delta` with `delta ~ N(0, rel_sigma^2)`.
    AttenuatorFluctuation { rel_sigma: f64 },
}

impl SourceModel {
    /// Variance of Alice's record noise (the `n_A` of the tap model), SNU.
    pub fn record_noise_var(&self) -> f64 {
        match self {
            SourceModel::TapHomodyne {
                record_noise_var, ..
            } => *record_noise_var,
            _ => 0.0,
        }
    }

    pub(crate) fn canonical(&self) -> String {
        match self {
            SourceModel::Ideal => "ideal".into(),
            SourceModel::TapHomodyne {
                tap_transmittance,
                record_noise_var,
            } => format!("tap(tap_T={tap_transmittance},var_nA={record_noise_var})"),
            SourceModel::AttenuatorFluctuation { rel_sigma } => {
                format!("atten(rel_sigma={rel_sigma})")
            }
        }
    }
}

/// Eavesdropping strategies the channel can be configured with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    NoAttack,
    /// Eve taps a fraction `1 - T` of the signal and forwards the rest
    /// over a lossless link; Bob's marginal statistics are unchanged.
    Beamsplitter,
    /// Eve heterodynes both quadratures near the transmitter and resends
    /// the measured complex amplitude, adding 2 SNU of noise.
    HeterodyneInterceptResend,
}

impl AttackKind {
    pub fn label(&self) -> &'static str {
        match self {
            AttackKind::NoAttack => "none",
            AttackKind::Beamsplitter => "bs",
            AttackKind::HeterodyneInterceptResend => "het",
        }
    }
}

/// An attack kind together with the fraction of pulses it touches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackModel {
    pub kind: AttackKind,
    /// Fraction of pulses attacked, in [0,1]. 1.0 is the full attack;
    /// anything smaller is the partial attack used to duck detection.
    pub fraction: f64,
}

impl AttackModel {
    pub fn none() -> Self {
        Self {
            kind: AttackKind::NoAttack,
            fraction: 0.0,
        }
    }

    pub fn beamsplitter(fraction: f64) -> Self {
        Self {
            kind: AttackKind::Beamsplitter,
            fraction,
        }
    }

    pub fn heterodyne(fraction: f64) -> Self {
        Self {
            kind: AttackKind::HeterodyneInterceptResend,
            fraction,
        }
    }

    pub(crate) fn canonical(&self) -> String {
        format!("{}(fraction={})", self.kind.label(), self.fraction)
    }
}

/// Which quadrature Bob's homodyne detector measured for a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    X,
    P,
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Basis::X => write!(f, "X"),
            Basis::P => write!(f, "P"),
        }
    }
}

/// Everything a session needs: physics, attack, statistics, and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// Modulation variance per quadrature, SNU.
    pub modulation_variance: Snu,
    /// Total transmittance the users assume when they test the channel.
    pub nominal_transmittance: f64,
    /// Total transmittance actually in effect, in (0,1].
    pub true_transmittance: f64,
    pub n_pulses: usize,
    /// Fraction of pulses sacrificed to the variance check, in (0,1).
    pub disclosure_fraction: f64,
    pub source: SourceModel,
    pub attack: AttackModel,
    pub seed: u64,
}

impl SessionConfig {
    /// Convenience constructor with the defaults used throughout:
    /// ideal source, no attack, 50% disclosure, matched transmittances.
    pub fn new(modulation_variance: f64, transmittance: f64, n_pulses: usize, seed: u64) -> Self {
        Self {
            modulation_variance: Snu(modulation_variance),
            nominal_transmittance: transmittance,
            true_transmittance: transmittance,
            n_pulses,
            disclosure_fraction: 0.5,
            source: SourceModel::Ideal,
            attack: AttackModel::none(),
            seed,
        }
    }

    /// Check every invariant, normalizing the no-attack fraction to 0.
    ///
    /// Returns the config unchanged when all invariants hold; the error
    /// message names the violated invariant. Idempotent.
    pub fn validate(mut self) -> Result<Self> {
        let v = self.modulation_variance.0;
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidConfig("V must be positive".into()));
        }
        for t in [self.true_transmittance, self.nominal_transmittance] {
            if !t.is_finite() || t <= 0.0 || t > 1.0 {
                return Err(Error::InvalidConfig(
                    "transmittance must be in (0,1]".into(),
                ));
            }
        }
        if self.n_pulses == 0 {
            return Err(Error::InvalidConfig("n_pulses must be positive".into()));
        }
        let f = self.disclosure_fraction;
        if !f.is_finite() || f <= 0.0 || f >= 1.0 {
            return Err(Error::InvalidConfig(
                "disclosure_fraction must be in (0,1)".into(),
            ));
        }
        if (self.n_pulses as f64) * f < 100.0 {
            return Err(Error::InvalidConfig(
                "n_pulses * disclosure_fraction must be at least 100".into(),
            ));
        }
        match self.source {
            SourceModel::Ideal => {}
            SourceModel::TapHomodyne {
                tap_transmittance,
                record_noise_var,
            } => {
                if !tap_transmittance.is_finite()
                    || tap_transmittance <= 0.0
                    || tap_transmittance >= 1.0
                {
                    return Err(Error::InvalidConfig(
                        "tap_transmittance must be in (0,1)".into(),
                    ));
                }
                if !record_noise_var.is_finite() || record_noise_var < 1.0 {
                    return Err(Error::InvalidConfig(
                        "TapHomodyne source requires var_nA >= 1".into(),
                    ));
                }
            }
            SourceModel::AttenuatorFluctuation { rel_sigma } => {
                if !rel_sigma.is_finite() || rel_sigma < 0.0 {
                    return Err(Error::InvalidConfig(
                        "rel_sigma must be finite and nonnegative".into(),
                    ));
                }
            }
        }
        if !self.attack.fraction.is_finite()
            || self.attack.fraction < 0.0
            || self.attack.fraction > 1.0
        {
            return Err(Error::InvalidConfig(
                "attack fraction must be in [0,1]".into(),
            ));
        }
        if self.attack.kind == AttackKind::NoAttack {
            self.attack.fraction = 0.0;
        }
        Ok(self)
    }

    /// One-line `key=value` form embedded as the `#` comment of every CSV.
    /// Stable field order, so identical configs serialize byte-identically.
    pub fn canonical_line(&self) -> String {
        format!(
            "V={} T_nominal={} T_true={} pulses={} disclose={} source={} attack={} seed={}",
            self.modulation_variance,
            self.nominal_transmittance,
            self.true_transmittance,
            self.n_pulses,
            self.disclosure_fraction,
            self.source.canonical(),
            self.attack.canonical(),
            self.seed,
        )
    }
}

/// Full record of one simulated pulse. Amplitudes in SNU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRecord {
    /// True modulation drawn for the x quadrature.
    pub modulation_x: f64,
    /// True modulation drawn for the p quadrature.
    pub modulation_p: f64,
    /// Quadrature Bob measured.
    pub basis: Basis,
    /// True modulation in Bob's basis (`modulation_x` or `modulation_p`).
    pub modulation: f64,
    /// Alice's record of the launched amplitude (her `m_A`).
    pub alice_record: f64,
    /// Bob's homodyne outcome.
    pub bob_outcome: f64,
    /// Eve's record, present only on attacked pulses.
    pub eve_record: Option<f64>,
    pub attacked: bool,
    pub disclosed: bool,
}
