//! Model constants, run configuration, and their validation.
//!
//! All quantities are raw floats in the unit system of the parameter table:
//! μm for lengths, s for times, nN for forces, ng/μm³ for densities.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

/// Per-phase constants of one protein: basement membrane, extracellular fluid, fibrin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseValues<T> {
    pub b: T,
    pub e: T,
    pub f: T,
}

impl<T: Real> PhaseValues<T> {
    pub fn min(&self) -> T {
        self.b.min(self.e).min(self.f)
    }

    pub fn max(&self) -> T {
        self.b.max(self.e).max(self.f)
    }

    fn cast<U: Real>(&self) -> PhaseValues<U> {
        PhaseValues { b: U::lit(self.b.as_f64()), e: U::lit(self.e.as_f64()), f: U::lit(self.f.as_f64()) }
    }
}

/// The four signal proteins carried as concentration fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    /// VEGF, attracts tip cells.
    Vegf,
    /// DLL4, attracts stalk cells.
    Dll4,
    /// MMP, degrades basement membrane.
    Mmp,
    /// uPA, degrades fibrin.
    Upa,
}

impl Species {
    pub const ALL: [Species; 4] = [Species::Vegf, Species::Dll4, Species::Mmp, Species::Upa];

    /// Field name used in snapshot files.
    pub fn field_name(self) -> &'static str {
        match self {
            Species::Vegf => "c_V",
            Species::Dll4 => "c_D",
            Species::Mmp => "c_M",
            Species::Upa => "c_U",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Every named physical constant of the model plus the geometry radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams<T> {
    /// b_i, 1/s
    pub b_i: T,
    /// F_i, nN
    pub force: T,
    /// μ, dimensionless
    pub mu: T,
    /// λ̃, dimensionless
    pub lambda_tilde: T,
    /// R_c, cell radius in μm
    pub cell_radius: T,
    /// ρ_B, ρ_F, ρ_E in ng/μm³
    pub rho_b: T,
    pub rho_f: T,
    pub rho_e: T,
    /// Mixing-rule diffusivities per protein, μm²/s.
    pub d_vegf: PhaseValues<T>,
    pub d_dll4: PhaseValues<T>,
    pub d_mmp: PhaseValues<T>,
    pub d_upa: PhaseValues<T>,
    /// Production scalings r_D, r_M, r_U, μm³/s.
    pub r_d: T,
    pub r_m: T,
    pub r_u: T,
    /// Consumption scalings s_V, s_D, μm³/s.
    pub s_v: T,
    pub s_d: T,
    /// Decay rates s_M, s_U, 1/s.
    pub s_m: T,
    pub s_u: T,
    /// Degradation rates s_B, s_F, μm³/(ng·s).
    pub s_b: T,
    pub s_f: T,
    /// R, radius of the disk domain (μm).
    pub domain_radius: T,
    /// R_m, support radius of the source mollifier (μm).
    pub mollifier_radius: T,
    /// R_f, outer radius of the initial fibrin plateau profile (μm).
    pub fibrin_radius: T,
    /// Support radius of the initial VEGF bump (μm), 0.75 R.
    pub vegf_radius: T,
}

impl Default for ModelParams<f64> {
    fn default() -> Self {
        default_params()
    }
}

/// Parameter table values, with R = 500, R_m = 12.5 and R_f = 0.75 R, and the
/// initial VEGF support radius 0.75 R.
pub fn default_params() -> ModelParams<f64> {
    ModelParams {
        b_i: 0.02,
        force: 1000.0,
        mu: 0.2,
        lambda_tilde: 15.0,
        cell_radius: 11.25,
        rho_b: 1.06e-3,
        rho_f: 1.06e-3,
        rho_e: 0.9933e-3,
        d_vegf: PhaseValues { b: 100.0, e: 10.0, f: 200.0 },
        d_dll4: PhaseValues { b: 0.51, e: 0.051, f: 1.02 },
        d_mmp: PhaseValues { b: 1.23, e: 0.123, f: 2.46 },
        d_upa: PhaseValues { b: 0.53, e: 0.053, f: 1.06 },
        r_d: 10.0,
        r_m: 10.0,
        r_u: 10.0,
        s_v: 0.024,
        s_d: 0.024,
        s_m: 0.024,
        s_u: 0.024,
        s_b: 1.21,
        s_f: 1.21,
        domain_radius: 500.0,
        mollifier_radius: 12.5,
        fibrin_radius: 375.0,
        vegf_radius: 375.0,
    }
}

impl<T: Real> ModelParams<T> {
    pub fn diffusivities(&self, species: Species) -> &PhaseValues<T> {
        match species {
            Species::Vegf => &self.d_vegf,
            Species::Dll4 => &self.d_dll4,
            Species::Mmp => &self.d_mmp,
            Species::Upa => &self.d_upa,
        }
    }

    /// Converts every constant to another scalar type.
    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let c = |v: T| U::lit(v.as_f64());
        ModelParams {
            b_i: c(self.b_i),
            force: c(self.force),
            mu: c(self.mu),
            lambda_tilde: c(self.lambda_tilde),
            cell_radius: c(self.cell_radius),
            rho_b: c(self.rho_b),
            rho_f: c(self.rho_f),
            rho_e: c(self.rho_e),
            d_vegf: self.d_vegf.cast(),
            d_dll4: self.d_dll4.cast(),
            d_mmp: self.d_mmp.cast(),
            d_upa: self.d_upa.cast(),
            r_d: c(self.r_d),
            r_m: c(self.r_m),
            r_u: c(self.r_u),
            s_v: c(self.s_v),
            s_d: c(self.s_d),
            s_m: c(self.s_m),
            s_u: c(self.s_u),
            s_b: c(self.s_b),
            s_f: c(self.s_f),
            domain_radius: c(self.domain_radius),
            mollifier_radius: c(self.mollifier_radius),
            fibrin_radius: c(self.fibrin_radius),
            vegf_radius: c(self.vegf_radius),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let zero = T::zero();
        for (key, d) in [
            ("params.d_vegf", &self.d_vegf),
            ("params.d_dll4", &self.d_dll4),
            ("params.d_mmp", &self.d_mmp),
            ("params.d_upa", &self.d_upa),
        ] {
            if !(d.min() > zero) || !d.max().is_finite() {
                return Err(invalid(key, "diffusivities must be finite and strictly positive"));
            }
        }
        let nonneg = [
            ("params.b_i", self.b_i),
            ("params.lambda_tilde", self.lambda_tilde),
            ("params.r_d", self.r_d),
            ("params.r_m", self.r_m),
            ("params.r_u", self.r_u),
            ("params.s_v", self.s_v),
            ("params.s_d", self.s_d),
            ("params.s_m", self.s_m),
            ("params.s_u", self.s_u),
            ("params.s_b", self.s_b),
            ("params.s_f", self.s_f),
        ];
        for (key, v) in nonneg {
            if !(v >= zero) || !v.is_finite() {
                return Err(invalid(key, "rate constants must be finite and nonnegative"));
            }
        }
        let positive = [
            ("params.force", self.force),
            ("params.mu", self.mu),
            ("params.cell_radius", self.cell_radius),
            ("params.rho_b", self.rho_b),
            ("params.rho_f", self.rho_f),
            ("params.rho_e", self.rho_e),
            ("params.domain_radius", self.domain_radius),
            ("params.mollifier_radius", self.mollifier_radius),
            ("params.fibrin_radius", self.fibrin_radius),
            ("params.vegf_radius", self.vegf_radius),
        ];
        for (key, v) in positive {
            if !(v > zero) || !v.is_finite() {
                return Err(invalid(key, "must be finite and strictly positive"));
            }
        }
        if self.mollifier_radius >= self.domain_radius {
            return Err(invalid("params.mollifier_radius", "must be smaller than the domain radius"));
        }
        if self.fibrin_radius > self.domain_radius {
            return Err(invalid("params.fibrin_radius", "must not exceed the domain radius"));
        }
        if self.vegf_radius > self.domain_radius {
            return Err(invalid("params.vegf_radius", "must not exceed the domain radius"));
        }
        Ok(())
    }
}

/// Placement of reaction terms in the semi-implicit protein step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionMode {
    /// All reactions evaluated at time n on the right-hand side.
    #[default]
    Explicit,
    /// Sinks on the matrix diagonal, productions explicit.
    ImplicitSinks,
}

impl std::str::FromStr for ReactionMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "explicit" => Ok(Self::Explicit),
            "implicit-sinks" => Ok(Self::ImplicitSinks),
            other => Err(format!("unknown reaction mode `{other}` (expected explicit|implicit-sinks)")),
        }
    }
}

impl std::fmt::Display for ReactionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Explicit => "explicit",
            Self::ImplicitSinks => "implicit-sinks",
        })
    }
}

/// Which fields drive the cell drift in a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DriftFields {
    /// (c^n, f^n)
    Old,
    /// (c^{n+1}, f^{n+1})
    #[default]
    New,
}

/// Run configuration. Serialized as a single JSON object with these keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Grid spacing (μm); must divide the domain radius.
    pub h: f64,
    /// Time step (s).
    pub tau: f64,
    pub n_steps: u64,
    /// Tip cell count.
    pub n1: usize,
    /// Stalk cell count.
    pub n2: usize,
    pub seed: u64,
    /// Replica index, mixed into every cell's random substream.
    pub replica: u32,
    pub snapshot_every: u64,
    pub reaction_mode: ReactionMode,
    pub drift_cutoff: bool,
    pub drift_fields: DriftFields,
    /// Keep the Hertz contact term inside the strain energy magnitude.
    pub hertz_in_strain: bool,
    pub output_dir: PathBuf,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    /// Write one residual line per species solve to `solver_log.csv`.
    pub solver_log: bool,
    /// Also write the reaction-rate fields into every snapshot.
    pub dump_rates: bool,
    pub params: ModelParams<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            h: 10.0,
            tau: 1.0,
            n_steps: 1600,
            n1: 2,
            n2: 200,
            seed: 0,
            replica: 0,
            snapshot_every: 400,
            reaction_mode: ReactionMode::default(),
            drift_cutoff: true,
            drift_fields: DriftFields::default(),
            hertz_in_strain: false,
            output_dir: PathBuf::from("output"),
            linear_tol: 1e-14,
            linear_max_iter: 10_000,
            solver_log: false,
            dump_rates: false,
            params: default_params(),
        }
    }
}

impl SimConfig {
    /// Grid half-width k = R/h.
    pub fn grid_half_width(&self) -> Result<usize, ConfigError> {
        let radius = self.params.domain_radius;
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(invalid("h", "must be finite and strictly positive"));
        }
        let ratio = radius / self.h;
        let k = ratio.round();
        if k < 1.0 || (k * self.h - radius).abs() > 1e-9 * radius {
            return Err(invalid("h", format!("{} does not divide the domain radius {radius}", self.h)));
        }
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        self.grid_half_width()?;
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(invalid("tau", "must be finite and strictly positive"));
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return Err(invalid("linear_tol", "must lie in (0, 1)"));
        }
        if self.linear_max_iter == 0 {
            return Err(invalid("linear_max_iter", "must be at least 1"));
        }
        if self.snapshot_every == 0 {
            return Err(invalid("snapshot_every", "must be at least 1"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses a JSON config document; missing keys take defaults, unknown keys are rejected.
pub fn load_config(document: &str) -> Result<SimConfig, ConfigError> {
    let config: SimConfig =
        if document.trim().is_empty() { SimConfig::default() } else { serde_json::from_str(document)? };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_table_golden() {
        let p = default_params();
        assert_eq!(p.b_i, 0.02);
        assert_eq!(p.force, 1000.0);
        assert_eq!(p.mu, 0.2);
        assert_eq!(p.lambda_tilde, 15.0);
        assert_eq!(p.cell_radius, 11.25);
        assert_eq!((p.rho_b, p.rho_f, p.rho_e), (1.06e-3, 1.06e-3, 0.9933e-3));
        assert_eq!(p.d_vegf, PhaseValues { b: 100.0, e: 10.0, f: 200.0 });
        assert_eq!(p.d_dll4, PhaseValues { b: 0.51, e: 0.051, f: 1.02 });
        assert_eq!(p.d_mmp, PhaseValues { b: 1.23, e: 0.123, f: 2.46 });
        assert_eq!(p.d_upa, PhaseValues { b: 0.53, e: 0.053, f: 1.06 });
        assert_eq!((p.r_d, p.r_m, p.r_u), (10.0, 10.0, 10.0));
        assert_eq!((p.s_v, p.s_d, p.s_m, p.s_u), (0.024, 0.024, 0.024, 0.024));
        assert_eq!((p.s_b, p.s_f), (1.21, 1.21));
        assert_eq!(p.domain_radius, 500.0);
        assert_eq!(p.mollifier_radius, 12.5);
        assert_eq!(p.fibrin_radius, 375.0);
        assert_eq!(p.vegf_radius, 375.0);
        p.validate().unwrap();
    }

    #[test]
    fn empty_document_gives_defaults() {
        for doc in ["", "  \n", "{}"] {
            let c = load_config(doc).unwrap();
            assert_eq!(c, SimConfig::default());
            assert_eq!((c.h, c.tau, c.n1, c.n2), (10.0, 1.0, 2, 200));
        }
    }

    #[test]
    fn non_dividing_h_rejected() {
        let err = load_config(r#"{"h": 7}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "h", .. }), "{err}");
    }

    #[test]
    fn negative_tau_rejected() {
        let err = load_config(r#"{"tau": -1}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "tau", .. }), "{err}");
    }

    #[test]
    fn unknown_and_malformed_rejected() {
        assert!(matches!(load_config(r#"{"hh": 10}"#), Err(ConfigError::Parse(_))));
        assert!(matches!(load_config(r#"{"h": "#), Err(ConfigError::Parse(_))));
        assert!(matches!(load_config(r#"{"params": {"nope": 1}}"#), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn partial_params_override() {
        let c = load_config(r#"{"params": {"fibrin_radius": 300}, "reaction_mode": "implicit-sinks"}"#).unwrap();
        assert_eq!(c.params.fibrin_radius, 300.0);
        assert_eq!(c.params.d_vegf.f, 200.0);
        assert_eq!(c.reaction_mode, ReactionMode::ImplicitSinks);
    }

    #[test]
    fn param_constraints() {
        let err = load_config(r#"{"params": {"fibrin_radius": 600}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "params.fibrin_radius", .. }));
        let err = load_config(r#"{"params": {"d_mmp": {"b": 0, "e": 1, "f": 1}}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "params.d_mmp", .. }));
        let err = load_config(r#"{"linear_tol": 1.5}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "linear_tol", .. }));
    }

    #[test]
    fn f32_cast_keeps_table() {
        let p: ModelParams<f32> = default_params().cast();
        assert_eq!(p.d_vegf.f, 200.0f32);
        assert_eq!(p.mollifier_radius, 12.5f32);
    }
}
