//! Switched prescribed performance: the envelope `ρ_q`, the transformed
//! error, the switching indicators and their smooth-max composition.

use serde::{Deserialize, Serialize};

use crate::error::ControlError;

/// Segment points and steepness of a mollified switching function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchSpec {
    pub p: f64,
    pub s0: f64,
    pub s1: f64,
}

impl SwitchSpec {
    pub fn new(s0: f64, s1: f64, p: f64) -> Result<Self, String> {
        if !(s0.is_finite() && s1.is_finite() && s0 < s1) {
            return Err(format!("switching segment requires S0 < S1, got [{s0}, {s1}]"));
        }
        if !(p.is_finite() && p * (s1 - s0) > 1.0) {
            return Err(format!(
                "switching steepness {p} too small for segment [{s0}, {s1}]"
            ));
        }
        Ok(Self { p, s0, s1 })
    }

    /// Steepness given in dimensionless form `p (S₁ − S₀)`.
    pub fn with_steepness(s0: f64, s1: f64, steepness: f64) -> Result<Self, String> {
        Self::new(s0, s1, steepness / (s1 - s0))
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.s0 + self.s1)
    }
}

/// `Ω(x)`: 0 below `S₀`, 1 from `S₁` on, a tanh blend in between.
pub fn switching_function(x: f64, spec: &SwitchSpec) -> f64 {
    if x <= spec.s0 {
        return 0.0;
    }
    if x >= spec.s1 {
        return 1.0;
    }
    let arg = spec.p * (spec.s1 - spec.s0) * (x - spec.midpoint())
        / ((x - spec.s0) * (spec.s1 - x)).sqrt();
    0.5 * (arg.tanh() + 1.0)
}

/// Pre-clamp real soft max `(1/K_s) ln Σ exp(K_s vⱼ)`, max-shifted.
pub fn real_soft_max(values: &[f64], k_s: f64) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = values.iter().map(|v| (k_s * (v - m)).exp()).sum();
    m + sum.ln() / k_s
}

/// Soft max clamped to 1.
pub fn smooth_max(values: &[f64], k_s: f64) -> f64 {
    real_soft_max(values, k_s).min(1.0)
}

/// Envelope and BLF parameters together with the indicator segments that are
/// not attached to a forbidden zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GovernorParams {
    pub k_rho: f64,
    pub rho_inf: f64,
    pub rho0: f64,
    pub k_b: f64,
    pub k_s: f64,
    /// Indicator over `ω_i²`.
    pub rate_indicator: SwitchSpec,
    /// Indicator over `ε_q`.
    pub ppc_indicator: SwitchSpec,
    /// Indicator over `ρ_q`.
    pub rho_indicator: SwitchSpec,
}

impl GovernorParams {
    /// Paper-style settings for a rate limit `max_rate`.
    pub fn standard(max_rate: f64) -> Self {
        let m2 = max_rate * max_rate;
        let rho_inf = 1e-4;
        Self {
            k_rho: 0.05,
            rho_inf,
            rho0: 4.0,
            k_b: 0.4,
            k_s: 100.0,
            rate_indicator: SwitchSpec::with_steepness(0.8 * m2, 0.9 * m2, 2.0).unwrap(),
            ppc_indicator: SwitchSpec::with_steepness(0.9, 0.95, 2.0).unwrap(),
            rho_indicator: SwitchSpec::with_steepness(rho_inf + 0.001, rho_inf + 0.002, 2.0)
                .unwrap(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("k_rho", self.k_rho),
            ("rho_inf", self.rho_inf),
            ("rho0", self.rho0),
            ("k_b", self.k_b),
            ("k_s", self.k_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        for s in [self.rate_indicator, self.ppc_indicator, self.rho_indicator] {
            SwitchSpec::new(s.s0, s.s1, s.p)?;
        }
        if self.ppc_indicator.s1 >= 1.0 {
            return Err("PPC indicator must saturate below eps = 1".into());
        }
        if self.rho_indicator.s0 <= self.rho_inf {
            return Err("envelope indicator must start above rho_inf".into());
        }
        if self.rho0 <= self.rho_indicator.s1 {
            return Err("initial envelope must exceed the envelope indicator band".into());
        }
        Ok(())
    }
}

/// All switching indicator values at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Indicators {
    pub zones: Vec<f64>,
    pub rates: [f64; 3],
    pub ppc: f64,
    pub rho: f64,
}

impl Indicators {
    /// Safety indicators fed to the soft max.
    pub fn safety(&self) -> impl Iterator<Item = f64> + '_ {
        self.zones
            .iter()
            .copied()
            .chain(self.rates)
            .chain(std::iter::once(self.ppc))
    }
}

/// Evaluates every indicator from its argument.
pub fn indicators(
    zone_gammas: &[f64],
    zone_specs: &[SwitchSpec],
    omega_sq: [f64; 3],
    eps: f64,
    rho: f64,
    params: &GovernorParams,
) -> Indicators {
    Indicators {
        zones: zone_gammas
            .iter()
            .zip(zone_specs)
            .map(|(g, s)| switching_function(*g, s))
            .collect(),
        rates: omega_sq.map(|w2| switching_function(w2, &params.rate_indicator)),
        ppc: switching_function(eps, &params.ppc_indicator),
        rho: switching_function(rho, &params.rho_indicator),
    }
}

/// Composite freezing weight, clamped and raw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaQ {
    pub clamped: f64,
    pub raw: f64,
}

/// `Ω_Q = Ω_ρ · min(1, RSM(safety indicators))`.
pub fn omega_q(ind: &Indicators, k_s: f64) -> OmegaQ {
    let values: Vec<f64> = ind.safety().collect();
    let rsm = real_soft_max(&values, k_s);
    OmegaQ {
        clamped: ind.rho * rsm.min(1.0),
        raw: ind.rho * rsm,
    }
}

/// Below this pointing error the freeze quotient `ẋ_e/x_e` is dropped.
pub const FREEZE_XE_FLOOR: f64 = 1e-12;

/// `ρ̇_q = −k_ρ(ρ_q − ρ_∞)(1 − Ω_Q) + (ẋ_e/x_e) ρ_q Ω_Q`.
pub fn rho_dot(rho: f64, x_e: f64, x_e_dot: f64, omega_q: f64, k_rho: f64, rho_inf: f64) -> f64 {
    let decay = -k_rho * (rho - rho_inf) * (1.0 - omega_q);
    if x_e < FREEZE_XE_FLOOR {
        decay
    } else {
        decay + x_e_dot / x_e * rho * omega_q
    }
}

/// `ε_q = x_e/ρ_q` and `R_ρ = k_B/(1 − ε_q)`.
pub fn transformed_error(x_e: f64, rho: f64, k_b: f64) -> Result<(f64, f64), ControlError> {
    let eps = x_e / rho;
    if !(eps < 1.0) {
        return Err(ControlError::EnvelopeViolated { eps });
    }
    Ok((eps, k_b / (1.0 - eps)))
}

/// Barrier Lyapunov value `V_B = k_B ln(1/(1 − ε_q))`.
pub fn blf_value(eps: f64, k_b: f64) -> f64 {
    -k_b * (-eps).ln_1p()
}
