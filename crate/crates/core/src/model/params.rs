use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the driven optomechanical resonator in the frame
/// rotating at the drive frequency. All rates share one frequency unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub delta_a: f64,
    pub omega_b: f64,
    pub g: f64,
    pub force: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
}

impl SystemParams {
    /// Working point used throughout: two coexisting limit cycles.
    pub const WORKING_POINT: SystemParams = SystemParams {
        delta_a: -0.7,
        omega_b: 1.0,
        g: 0.35,
        force: 0.2,
        kappa_a: 0.1,
        kappa_b: 0.01,
    };

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.delta_a,
            self.omega_b,
            self.g,
            self.force,
            self.kappa_a,
            self.kappa_b,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite system parameter".into()));
        }
        if self.kappa_a <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kappa_a must be positive, got {}",
                self.kappa_a
            )));
        }
        if self.kappa_b < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kappa_b must be non-negative, got {}",
                self.kappa_b
            )));
        }
        if self.omega_b <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "omega_b must be positive, got {}",
                self.omega_b
            )));
        }
        Ok(())
    }

    /// Weaker check used by propagators, which also accept closed systems
    /// (`kappa_a = kappa_b = 0`).
    pub fn validate_closed_or_open(&self) -> Result<()> {
        match self.validate() {
            Err(Error::InvalidParameter(_)) if self.kappa_a == 0.0 => {
                Self { kappa_a: 1.0, ..*self }.validate()
            }
            other => other,
        }
    }

    /// Same parameters with the dissipative rates switched off. Only used
    /// by tests and diagnostics; `validate` rejects `kappa_a = 0`.
    pub fn without_dissipation(mut self) -> Self {
        self.kappa_a = 0.0;
        self.kappa_b = 0.0;
        self
    }
}

/// How the fluctuation strength is dialled while keeping the mean-field drift fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// `F = sqrt(aleph) F~`, `g = g~ / sqrt(aleph)`.
    #[serde(rename = "a")]
    TheoryA,
    /// Fixed coupling: every rate and frequency scales with `sqrt(aleph)`,
    /// the drive with `aleph`, and time is reported as `sqrt(aleph) t`.
    #[serde(rename = "b")]
    AdjointB,
}

impl Scheme {
    pub fn tag(self) -> u8 {
        match self {
            Scheme::TheoryA => 0,
            Scheme::AdjointB => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Scheme::TheoryA),
            1 => Some(Scheme::AdjointB),
            _ => None,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "theory" | "theorya" => Ok(Scheme::TheoryA),
            "b" | "adjoint" | "adjointb" => Ok(Scheme::AdjointB),
            other => Err(Error::InvalidParameter(format!("unknown scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::TheoryA => "a",
            Scheme::AdjointB => "b",
        })
    }
}

/// A point on the scaling manifold: the tilde-quantities in `base` plus `aleph`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPlan {
    pub aleph: f64,
    pub scheme: Scheme,
    pub base: SystemParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub params: SystemParams,
    /// Factor converting simulation time into reported time (`t' = factor * t`).
    /// Equal to 1 for scheme A and `sqrt(aleph)` for scheme B.
    pub time_factor: f64,
}

impl ScalingPlan {
    pub fn new(aleph: f64, scheme: Scheme, base: SystemParams) -> Self {
        Self {
            aleph,
            scheme,
            base,
        }
    }

    /// Factor that converts raw amplitudes into tilde amplitudes.
    pub fn amplitude_scale(&self) -> f64 {
        self.aleph.sqrt()
    }
}

/// Maps a scaling plan to the microscopic parameters that are simulated.
pub fn resolve_params(plan: &ScalingPlan) -> Result<ResolvedParams> {
    if !(plan.aleph > 0.0) || !plan.aleph.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "aleph must be positive, got {}",
            plan.aleph
        )));
    }
    let root = plan.aleph.sqrt();
    let b = plan.base;
    let resolved = match plan.scheme {
        Scheme::TheoryA => ResolvedParams {
            params: SystemParams {
                force: root * b.force,
                g: b.g / root,
                ..b
            },
            time_factor: 1.0,
        },
        Scheme::AdjointB => ResolvedParams {
            params: SystemParams {
                delta_a: root * b.delta_a,
                omega_b: root * b.omega_b,
                kappa_a: root * b.kappa_a,
                kappa_b: root * b.kappa_b,
                force: plan.aleph * b.force,
                g: b.g,
            },
            time_factor: root,
        },
    };
    Ok(resolved)
}
