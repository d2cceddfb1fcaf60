//! Barotropic equations of state `P(ρ)` and the convex internal-energy
//! density `Φ` tied to them by `P'(ρ) = ρ Φ''(ρ)`, `Φ(0) = Φ'(0) = 0`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;

/// Absolute tolerance of the nested quadratures used for generalized laws.
const QUAD_TOL: f64 = 1e-12;

/// Fitted exponents closer than this to the admissibility boundary `3` count as
/// violations, so a `γ = 4/3` polytrope is rejected despite rounding.
const EXPONENT_MARGIN: f64 = 1e-6;

pub type PPrimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum EosKind {
    /// `P = c ρ^γ`.
    Polytrope { c: f64, gamma: f64 },
    /// Supplied through `P'`; `Φ'` and `Φ` are obtained by quadrature.
    Generalized {
        name: String,
        p_prime: PPrimeFn,
        /// Declared large-density exponent `n` (`P' ≳ τ^{1/n}`).
        n_large: f64,
        /// Declared small-density exponent `n'` (`P' ≲ τ^{1/n'}`).
        n_small: f64,
    },
}

impl fmt::Debug for EosKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EosKind::Polytrope { c, gamma } => write!(f, "Polytrope {{ c: {c}, gamma: {gamma} }}"),
            EosKind::Generalized { name, n_large, n_small, .. } => write!(
                f,
                "Generalized {{ name: {name}, n_large: {n_large}, n_small: {n_small} }}"
            ),
        }
    }
}

/// An immutable barotropic equation of state.
#[derive(Clone, Debug)]
pub struct EosSpec {
    kind: EosKind,
}

impl EosSpec {
    /// `P = c ρ^γ`. Any `γ > 1` is accepted so that inadmissible laws such as
    /// `γ = 4/3` or `γ = 6/5` can still be examined; [`EosSpec::validate_assumptions`]
    /// reports whether the variational theory covers them.
    pub fn polytrope(c: f64, gamma: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("polytrope coefficient must be positive, got {c}")));
        }
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("adiabatic exponent must exceed 1, got {gamma}")));
        }
        Ok(Self { kind: EosKind::Polytrope { c, gamma } })
    }

    pub fn generalized(
        name: impl Into<String>,
        p_prime: PPrimeFn,
        n_large: f64,
        n_small: f64,
    ) -> Result<Self> {
        if !(n_large > 0.0 && n_small > 0.0) {
            return Err(Error::Domain("growth exponents must be positive".into()));
        }
        Ok(Self {
            kind: EosKind::Generalized { name: name.into(), p_prime, n_large, n_small },
        })
    }

    /// Built-in law with different exponents at small and large density:
    /// `P'(τ) = c τ^{1/n'} (1 + τ)^{1/n - 1/n'}`.
    pub fn blended(c: f64, n_small: f64, n_large: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("blended coefficient must be positive, got {c}")));
        }
        let (a, b) = (1.0 / n_small, 1.0 / n_large - 1.0 / n_small);
        let p_prime: PPrimeFn = Arc::new(move |t: f64| c * t.powf(a) * (1.0 + t).powf(b));
        Self::generalized(format!("blended(c={c}, n_small={n_small}, n_large={n_large})"), p_prime, n_large, n_small)
    }

    pub fn kind(&self) -> &EosKind {
        &self.kind
    }

    /// Polytropic index `n = 1/(γ-1)` for polytropes.
    pub fn polytropic_index(&self) -> Option<f64> {
        match self.kind {
            EosKind::Polytrope { gamma, .. } => Some(1.0 / (gamma - 1.0)),
            EosKind::Generalized { .. } => None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            EosKind::Polytrope { c, gamma } => format!("polytrope(c={c}, gamma={gamma})"),
            EosKind::Generalized { name, .. } => name.clone(),
        }
    }

    fn check_rho(rho: f64) -> Result<()> {
        if rho < 0.0 || rho.is_nan() {
            Err(Error::Domain(format!("density must be nonnegative, got {rho}")))
        } else {
            Ok(())
        }
    }

    /// `P'(ρ)`.
    pub fn p_prime(&self, rho: f64) -> Result<f64> {
        Self::check_rho(rho)?;
        Ok(match &self.kind {
            EosKind::Polytrope { c, gamma } => c * gamma * rho.powf(gamma - 1.0),
            EosKind::Generalized { p_prime, .. } => p_prime(rho),
        })
    }

    /// Adiabatic sound speed `√P'(ρ)`.
    pub fn sound_speed(&self, rho: f64) -> Result<f64> {
        Ok(self.p_prime(rho)?.max(0.0).sqrt())
    }

    /// `Φ(ρ)`.
    pub fn phi(&self, rho: f64) -> Result<f64> {
        Self::check_rho(rho)?;
        match &self.kind {
            EosKind::Polytrope { c, gamma } => Ok(c / (gamma - 1.0) * rho.powf(*gamma)),
            EosKind::Generalized { .. } => {
                if rho == 0.0 {
                    return Ok(0.0);
                }
                let failure = std::cell::RefCell::new(None);
                let v = quad::adaptive(
                    |s| match self.phi_prime(s) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.borrow_mut().get_or_insert(e);
                            f64::NAN
                        }
                    },
                    0.0,
                    rho,
                    QUAD_TOL,
                );
                if let Some(e) = failure.into_inner() {
                    return Err(e);
                }
                v.map_err(|e| Error::Config(format!("Phi integral failed: {e}")))
            }
        }
    }

    /// `Φ'(ρ) = ∫₀^ρ P'(τ)/τ dτ`.
    pub fn phi_prime(&self, rho: f64) -> Result<f64> {
        Self::check_rho(rho)?;
        match &self.kind {
            EosKind::Polytrope { c, gamma } => Ok(c * gamma / (gamma - 1.0) * rho.powf(gamma - 1.0)),
            EosKind::Generalized { p_prime, .. } => {
                if rho == 0.0 {
                    return Ok(0.0);
                }
                quad::adaptive(|t| if t > 0.0 { p_prime(t) / t } else { 0.0 }, 0.0, rho, QUAD_TOL)
                    .map_err(|e| {
                        Error::Config(format!(
                            "P'(tau)/tau is not integrable near 0 for {}: {e}",
                            self.describe()
                        ))
                    })
            }
        }
    }

    /// `Φ''(ρ) = P'(ρ)/ρ`.
    pub fn phi_second(&self, rho: f64) -> Result<f64> {
        Self::check_rho(rho)?;
        if rho == 0.0 {
            return Err(Error::Domain("Phi'' is evaluated at positive density only".into()));
        }
        Ok(self.p_prime(rho)? / rho)
    }

    /// `P(ρ)`.
    pub fn pressure(&self, rho: f64) -> Result<f64> {
        Self::check_rho(rho)?;
        match &self.kind {
            EosKind::Polytrope { c, gamma } => Ok(c * rho.powf(*gamma)),
            EosKind::Generalized { p_prime, .. } => {
                if rho == 0.0 {
                    return Ok(0.0);
                }
                quad::adaptive(|t| p_prime(t), 0.0, rho, QUAD_TOL)
            }
        }
    }

    /// Inverse of `Φ'` extended by zero: returns `0` for `z ≤ 0`.
    pub fn phi_prime_inv(&self, z: f64) -> Result<f64> {
        if z.is_nan() {
            return Err(Error::Domain("phi_prime_inv of NaN".into()));
        }
        if z <= 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            EosKind::Polytrope { c, gamma } => {
                let k = c * gamma / (gamma - 1.0);
                Ok((z / k).powf(1.0 / (gamma - 1.0)))
            }
            EosKind::Generalized { .. } => {
                let mut hi = 1.0;
                let mut guard = 0;
                while self.phi_prime(hi)? < z {
                    hi *= 2.0;
                    guard += 1;
                    if guard > 2000 {
                        return Err(Error::Numeric(format!("cannot bracket (Phi')^-1({z}): Phi' bounded?")));
                    }
                }
                let mut lo = hi / 2.0;
                while self.phi_prime(lo)? > z {
                    lo /= 2.0;
                    guard += 1;
                    if guard > 4000 {
                        return Err(Error::Numeric(format!("cannot bracket (Phi')^-1({z}) from below")));
                    }
                }
                let (llo, lhi) = (lo.ln(), hi.ln());
                let mut err = None;
                let t = quad::brent(
                    llo,
                    lhi,
                    |t| match self.phi_prime(t.exp()) {
                        Ok(v) => v / z - 1.0,
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    },
                    1e-13,
                )
                .map_err(|e| Error::Numeric(format!("(Phi')^-1({z}) in bracket [{lo:e}, {hi:e}]: {e}")))?;
                if let Some(e) = err {
                    return Err(e);
                }
                Ok(t.exp())
            }
        }
    }

    /// Derivative of `(Φ')⁻¹` at `z > 0`, equal to `1/Φ''(ρ)`.
    pub fn phi_prime_inv_derivative(&self, z: f64) -> Result<f64> {
        let rho = self.phi_prime_inv(z)?;
        if rho == 0.0 {
            return Ok(0.0);
        }
        Ok(1.0 / self.phi_second(rho)?)
    }

    /// Checks strict convexity and the growth bounds on `Φ` by sampling.
    pub fn validate_assumptions(&self, range: &SampleRange) -> ValidationReport {
        let samples = quad::logspace(range.small.0, range.large.1, range.samples.max(8));
        let mut min_second = f64::INFINITY;
        let mut p1 = true;
        let mut errors = Vec::new();
        for &r in &samples {
            let delta = 1e-4;
            match (self.phi_prime(r * (1.0 + delta)), self.phi_prime(r * (1.0 - delta)), self.p_prime(r)) {
                (Ok(a), Ok(b), Ok(pp)) => {
                    let second = (a - b) / (2.0 * delta * r);
                    min_second = min_second.min(second);
                    p1 &= pp > 0.0;
                }
                (a, b, c) => {
                    for e in [a.err(), b.err(), c.err()].into_iter().flatten() {
                        errors.push(e.to_string());
                    }
                }
            }
        }
        let fit = |lo: f64, hi: f64| -> Option<(f64, f64)> {
            let xs = quad::logspace(lo, hi, range.samples.max(8));
            let ys: Option<Vec<f64>> = xs.iter().map(|&x| self.phi(x).ok()).collect();
            let ys = ys?;
            if ys.iter().any(|&y| !(y > 0.0)) {
                return None;
            }
            let (slope, intercept) = quad::fit_power_law(&xs, &ys);
            Some((1.0 / (slope - 1.0), intercept.exp()))
        };
        let large = fit(range.large.0, range.large.1);
        let small = fit(range.small.0, range.small.1);
        let admissible = |n: f64| n > 0.0 && n < 3.0 - EXPONENT_MARGIN;
        let convex = errors.is_empty() && min_second > 0.0;
        let phi2 = large.is_some_and(|(n, _)| admissible(n));
        let phi3 = small.is_some_and(|(n, _)| admissible(n));
        ValidationReport {
            eos: self.describe(),
            convex,
            min_second_derivative: min_second,
            p_prime_positive: p1 && errors.is_empty(),
            n_large: large.map(|v| v.0),
            c_large: large.map(|v| v.1),
            n_small: small.map(|v| v.0),
            c_small: small.map(|v| v.1),
            phi2_pass: phi2,
            phi3_pass: phi3,
            pass: convex && p1 && phi2 && phi3,
            errors,
        }
    }
}

/// Density ranges on which the growth exponents are fitted.
#[derive(Debug, Clone)]
pub struct SampleRange {
    pub small: (f64, f64),
    pub large: (f64, f64),
    pub samples: usize,
}

impl Default for SampleRange {
    fn default() -> Self {
        Self { small: (1e-6, 1e-2), large: (1e2, 1e6), samples: 24 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub eos: String,
    pub convex: bool,
    pub min_second_derivative: f64,
    pub p_prime_positive: bool,
    /// Fitted `n` from `Φ ~ C ρ^{1+1/n}` at large density.
    pub n_large: Option<f64>,
    pub c_large: Option<f64>,
    /// Fitted `n'` from `Φ ~ C ρ^{1+1/n'}` at small density.
    pub n_small: Option<f64>,
    pub c_small: Option<f64>,
    pub phi2_pass: bool,
    pub phi3_pass: bool,
    pub pass: bool,
    pub errors: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_pprime() -> EosSpec {
        EosSpec::generalized("2tau", Arc::new(|t| 2.0 * t), 1.0, 1.0).unwrap()
    }

    #[test]
    fn polytrope_values() {
        let e = EosSpec::polytrope(1.0, 2.0).unwrap();
        assert_eq!(e.phi(0.0).unwrap(), 0.0);
        assert!((e.phi(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((e.phi_prime(1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((e.phi_prime_inv(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(e.phi_prime_inv(-3.0).unwrap(), 0.0);
        assert!((e.pressure(0.5).unwrap() - 0.25).abs() < 1e-15);
        let e53 = EosSpec::polytrope(1.0, 5.0 / 3.0).unwrap();
        assert!((e53.phi_prime(8.0).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn generalized_matches_polytrope() {
        let g = linear_pprime();
        let p = EosSpec::polytrope(1.0, 2.0).unwrap();
        for &r in &[0.5, 1e-3, 3.0] {
            assert!((g.phi(r).unwrap() - p.phi(r).unwrap()).abs() < 1e-11 * (1.0 + p.phi(r).unwrap()));
            assert!((g.phi_prime(r).unwrap() - p.phi_prime(r).unwrap()).abs() < 1e-11);
            assert!((g.pressure(r).unwrap() - p.pressure(r).unwrap()).abs() < 1e-11);
        }
        let z = 1.7;
        assert!((g.phi_prime_inv(z).unwrap() - p.phi_prime_inv(z).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn negative_density_is_a_domain_error() {
        let e = EosSpec::polytrope(1.0, 2.0).unwrap();
        assert!(matches!(e.phi(-1.0), Err(Error::Domain(_))));
        assert!(matches!(linear_pprime().phi_prime(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn non_integrable_pprime_is_a_config_error() {
        let e = EosSpec::generalized("const", Arc::new(|_| 1.0), 1.0, 1.0).unwrap();
        assert!(matches!(e.phi_prime(1.0), Err(Error::Config(_))));
    }

    #[test]
    fn validation_reports() {
        let r = EosSpec::polytrope(1.0, 2.0).unwrap().validate_assumptions(&SampleRange::default());
        assert!(r.pass, "{r:?}");
        assert!((r.n_large.unwrap() - 1.0).abs() < 1e-9);
        assert!((r.n_small.unwrap() - 1.0).abs() < 1e-9);

        let r = EosSpec::polytrope(1.0, 4.0 / 3.0).unwrap().validate_assumptions(&SampleRange::default());
        assert!(!r.phi2_pass && !r.pass);

        let r = EosSpec::polytrope(1.0, 3.0).unwrap().validate_assumptions(&SampleRange::default());
        assert!(r.pass);
        assert!((r.n_small.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn blended_law_has_two_regimes() {
        let e = EosSpec::blended(1.0, 1.0, 2.0).unwrap();
        let r = e.validate_assumptions(&SampleRange { samples: 10, ..Default::default() });
        assert!(r.pass, "{r:?}");
        assert!((r.n_small.unwrap() - 1.0).abs() < 1e-2);
        // lower-order terms from the small-density regime bias the fit at ρ ~ 1e2
        assert!((r.n_large.unwrap() - 2.0).abs() < 0.2, "{r:?}");
    }
}
