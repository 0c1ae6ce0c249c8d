//! Gaussian mutual informations for both reconciliation directions.
//!
//! Closed forms come from the exact joint covariance of
//! `(m, m_A, m_B, m_E)` implied by the attack equations; the empirical
//! estimator recovers the same quantities from a simulated ledger via the
//! Gaussian correlation identity `I = -1/2 log2(1 - rho^2)` and serves as
//! the cross-check for every closed form.
//!
//! Conventions: the users' rate is `I(m_A; m_B)` in both directions
//! (mutual information is symmetric). Eve's reference variable differs:
//! in direct reconciliation she estimates the sent value `m`, in reverse
//! reconciliation she estimates Bob's outcome `m_B`.

use std::io::Write;

use crate::model::{AttackKind, AttackModel, Snu};
use crate::simulate::PulseLedger;
use crate::stats;
use crate::{Error, Result};

/// How an [`InfoReport`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    ClosedForm,
    Empirical,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::ClosedForm => write!(f, "closed_form"),
            Mode::Empirical => write!(f, "empirical"),
        }
    }
}

/// Mutual informations (bits/pulse) and the users' advantage over Eve in
/// each reconciliation direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoReport {
    /// Users' information, direct reconciliation: I(m_A; m_B).
    pub i_ab_dr: f64,
    /// Eve's information about the sent value: I(m_E; m).
    pub i_eb_dr: f64,
    /// Users' information, reverse reconciliation: I(m_A; m_B).
    pub i_ab_rr: f64,
    /// Eve's information about Bob's outcome: I(m_E; m_B).
    pub i_eb_rr: f64,
    pub delta_dr: f64,
    pub delta_rr: f64,
    pub mode: Mode,
}

impl InfoReport {
    fn from_parts(i_ab: f64, i_eb_dr: f64, i_eb_rr: f64, mode: Mode) -> Self {
        Self {
            i_ab_dr: i_ab,
            i_eb_dr,
            i_ab_rr: i_ab,
            i_eb_rr,
            delta_dr: i_ab - i_eb_dr,
            delta_rr: i_ab - i_eb_rr,
            mode,
        }
    }
}

/// Shannon rate of a scalar Gaussian channel: `1/2 log2(1 + S/N)` bits.
pub fn gaussian_mi(signal_var: Snu, noise_var: Snu) -> Result<f64> {
    if !noise_var.0.is_finite() || noise_var.0 <= 0.0 {
        return Err(Error::InvalidConfig(
            "noise variance must be positive".into(),
        ));
    }
    if !signal_var.0.is_finite() || signal_var.0 < 0.0 {
        return Err(Error::InvalidConfig(
            "signal variance must be nonnegative".into(),
        ));
    }
    Ok(0.5 * (1.0 + signal_var.0 / noise_var.0).log2())
}

fn mi_from_second_moments(cov: f64, var_x: f64, var_y: f64) -> f64 {
    let rho_sq = (cov * cov / (var_x * var_y)).min(1.0 - 1e-15);
    -0.5 * (1.0 - rho_sq).log2()
}

/// Exact second moments of `(m, m_A, m_B, m_E)` under one attack model
/// applied to every pulse.
struct JointMoments {
    var_m: f64,
    var_a: f64,
    var_b: f64,
    cov_ab: f64,
    /// `(var_e, cov_me, cov_be)`, absent when Eve holds no record.
    eve: Option<(f64, f64, f64)>,
}

impl JointMoments {
    fn new(v: f64, t: f64, record_noise_var: f64, kind: AttackKind) -> Self {
        let var_a = v + record_noise_var;
        match kind {
            AttackKind::NoAttack => JointMoments {
                var_m: v,
                var_a,
                var_b: t * v + 1.0,
                cov_ab: t.sqrt() * v,
                eve: None,
            },
            AttackKind::Beamsplitter => JointMoments {
                var_m: v,
                var_a,
                var_b: t * v + 1.0,
                cov_ab: t.sqrt() * v,
                eve: Some((
                    (1.0 - t) * v + 1.0,
                    (1.0 - t).sqrt() * v,
                    (t * (1.0 - t)).sqrt() * v,
                )),
            },
            AttackKind::HeterodyneInterceptResend => JointMoments {
                var_m: v,
                var_a,
                var_b: t * (v + 2.0) + 1.0,
                cov_ab: t.sqrt() * v,
                eve: Some((v + 2.0, v, t.sqrt() * (v + 2.0))),
            },
        }
    }

    fn report(&self) -> InfoReport {
        let i_ab = mi_from_second_moments(self.cov_ab, self.var_a, self.var_b);
        let (i_eb_dr, i_eb_rr) = match self.eve {
            None => (0.0, 0.0),
            Some((var_e, cov_me, cov_be)) => (
                mi_from_second_moments(cov_me, self.var_m, var_e),
                mi_from_second_moments(cov_be, self.var_b, var_e),
            ),
        };
        InfoReport::from_parts(i_ab, i_eb_dr, i_eb_rr, Mode::ClosedForm)
    }
}

/// Closed-form informations for a full (fraction-1) attack.
pub fn closed_form_report(
    modulation_variance: Snu,
    transmittance: f64,
    record_noise_var: f64,
    attack: &AttackModel,
) -> Result<InfoReport> {
    let v = modulation_variance.0;
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::InvalidConfig("V must be positive".into()));
    }
    if !transmittance.is_finite() || transmittance <= 0.0 || transmittance > 1.0 {
        return Err(Error::InvalidConfig(
            "transmittance must be in (0,1]".into(),
        ));
    }
    if !record_noise_var.is_finite() || record_noise_var < 0.0 {
        return Err(Error::InvalidConfig(
            "var_nA must be finite and nonnegative".into(),
        ));
    }
    if attack.kind != AttackKind::NoAttack && attack.fraction != 1.0 {
        return Err(Error::InvalidConfig(
            "closed-form report requires attack fraction 1".into(),
        ));
    }
    Ok(JointMoments::new(v, transmittance, record_noise_var, attack.kind).report())
}

/// Estimate the same informations from a simulated ledger.
///
/// Uses the Gaussian correlation estimator on the undisclosed pulses, so
/// it only applies when the attack fraction is 0 or 1; anything between
/// makes the joint distribution a mixture and is rejected.
pub fn empirical_report(ledger: &PulseLedger) -> Result<InfoReport> {
    let fraction = ledger.config.attack.fraction;
    if fraction != 0.0 && fraction != 1.0 {
        return Err(Error::MixtureAttack(fraction));
    }
    let kept: Vec<_> = ledger.undisclosed().collect();
    if kept.len() < 100_000 {
        return Err(Error::InsufficientSamples(format!(
            "empirical MI needs at least 100000 undisclosed pulses, got {}",
            kept.len()
        )));
    }
    let sent: Vec<f64> = kept.iter().map(|p| p.modulation).collect();
    let alice: Vec<f64> = kept.iter().map(|p| p.alice_record).collect();
    let bob: Vec<f64> = kept.iter().map(|p| p.bob_outcome).collect();
    let i_ab = mi_from_corr_samples(&alice, &bob);
    let (i_eb_dr, i_eb_rr) = if fraction == 0.0 {
        (0.0, 0.0)
    } else {
        let eve: Vec<f64> = kept
            .iter()
            .map(|p| p.eve_record.expect("fraction-1 attack leaves a record"))
            .collect();
        (
            mi_from_corr_samples(&eve, &sent),
            mi_from_corr_samples(&eve, &bob),
        )
    };
    Ok(InfoReport::from_parts(
        i_ab,
        i_eb_dr,
        i_eb_rr,
        Mode::Empirical,
    ))
}

fn mi_from_corr_samples(xs: &[f64], ys: &[f64]) -> f64 {
    let rho = stats::correlation(xs, ys);
    let rho_sq = (rho * rho).min(1.0 - 1e-15);
    -0.5 * (1.0 - rho_sq).log2()
}

/// Advantage threshold used by [`rr_breakeven_transmittance`], bits/pulse.
pub const RR_BREAKEVEN_EPSILON: f64 = 1e-6;

/// Smallest transmittance at which the reverse-reconciliation advantage
/// reaches [`RR_BREAKEVEN_EPSILON`] bits, found by bisection on the
/// closed form. `None` when the advantage stays below the threshold on
/// all of (0,1] — notably under the heterodyne intercept-resend attack,
/// where Eve always knows Bob's outcome better than Alice.
pub fn rr_breakeven_transmittance(
    modulation_variance: Snu,
    record_noise_var: f64,
    attack: &AttackModel,
) -> Result<Option<f64>> {
    let delta_rr = |t: f64| -> Result<f64> {
        Ok(closed_form_report(modulation_variance, t, record_noise_var, attack)?.delta_rr)
    };
    if delta_rr(1.0)? < RR_BREAKEVEN_EPSILON {
        return Ok(None);
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    // delta_rr -> 0 as T -> 0+, so the crossing is bracketed by (0, 1]
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if delta_rr(mid)? >= RR_BREAKEVEN_EPSILON {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// One row of the sweep CSV.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub transmittance: f64,
    pub modulation_variance: f64,
    pub record_noise_var: f64,
    pub attack: AttackKind,
    pub report: InfoReport,
}

/// Write sweep rows as `T,V,var_nA,attack,i_ab_dr,i_eb_dr,i_ab_rr,
/// i_eb_rr,delta_dr,delta_rr,mode` under a `#` config comment.
pub fn write_sweep_csv<W: Write>(w: &mut W, comment: &str, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "# {comment}")?;
    writeln!(
        w,
        "T,V,var_nA,attack,i_ab_dr,i_eb_dr,i_ab_rr,i_eb_rr,delta_dr,delta_rr,mode"
    )?;
    for row in rows {
        let r = &row.report;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.transmittance,
            row.modulation_variance,
            row.record_noise_var,
            row.attack.label(),
            r.i_ab_dr,
            r.i_eb_dr,
            r.i_ab_rr,
            r.i_eb_rr,
            r.delta_dr,
            r.delta_rr,
            r.mode
        )?;
    }
    Ok(())
}
