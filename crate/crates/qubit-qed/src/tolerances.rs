//! Numerical tolerances, grouped in one place so tests and the verification
//! suite agree on what "equal" means.

/// Relative target for every adaptive k-integral.
pub const QUAD_REL_TOL: f64 = 1e-10;

/// Absolute floor for adaptive k-integrals.
pub const QUAD_ABS_TOL: f64 = 1e-14;

/// Check 1: quadrature h against the closed hydrogen form.
pub const H_CLOSED_REL: f64 = 1e-8;

/// Check 2: Σ at the renormalization point, scaled by max(1, |m_e|).
pub const RENORMALIZATION_ABS: f64 = 1e-10;

/// Check 3: δm_g/δm_e against −3.
pub const MASS_RATIO_ABS: f64 = 4.0 * f64::EPSILON;

/// Check 4: time reversal for quadrature-bearing diagrams.
pub const TIME_REVERSAL_QUAD: f64 = 1e-10;

/// Check 4: closed forms and atom evenness.
pub const TIME_REVERSAL_EXACT: f64 = 4.0 * f64::EPSILON;

/// Check 5: spread of the fourth/second order ratio around 1 − b.
pub const PROPORTIONALITY_REL: f64 = 1e-12;

/// Check 6: oracle against closed forms.
pub const ORACLE_REL: f64 = 1e-3;

/// Check 6: absolute bound for identically vanishing channels.
pub const ORACLE_ZERO_ABS: f64 = 1e-6;

/// Check 7: crossing residual.
pub const CROSSING_ABS: f64 = 1e-12;

/// Check 8: |Im pole| against Γ̂(2m), relative.
pub const POLE_WIDTH_REL: f64 = 0.2;

/// Check 9: fitted truncation exponent against N.
pub const DYSON_EXPONENT_ABS: f64 = 0.3;

/// Check 10: normalized Kramers-Kronig residual.
pub const KRAMERS_KRONIG_REL: f64 = 1e-2;

/// Check 10: the negative control must exceed this.
pub const KRAMERS_KRONIG_CONTROL: f64 = 0.1;

/// Oracle ε sequence.
pub const ORACLE_EPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Oracle relative target for each nested line integral.
pub const ORACLE_LINE_REL: f64 = 1e-6;

/// Newton: maximum iterations and step tolerance (relative to |seed|).
pub const NEWTON_MAX_ITER: usize = 100;
pub const NEWTON_STEP_REL: f64 = 1e-14;
