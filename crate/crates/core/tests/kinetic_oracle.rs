//! The internal energy of the reduced problem is the infimum, over velocity
//! distributions of fixed density, of the Casimir plus kinetic energy. The
//! library evaluates it through the conjugate formula; here it is computed by
//! a direct projected-gradient minimization in velocity space at three radii
//! of a lifted star and compared with the induced equation of state.

use std::f64::consts::PI;

use epstar::kinetic::{self, Casimir, KineticAnsatz};
use epstar::steady;
use epstar::EosSpec;

/// `min Σ w_j [Q(g_j) + ½ s_j² g_j]` subject to `g ≥ 0`, `Σ w_j g_j = ρ` on the
/// speed nodes `s`, for `Q(f) = f²/(2A)` (the `k = 1` Casimir).
fn direct_minimum(casimir: &Casimir, rho: f64, s: &[f64], w: &[f64]) -> (f64, Vec<f64>) {
    assert!((casimir.k - 1.0).abs() < 1e-12);
    let a = casimir.a;
    let project = |y: &[f64]| -> Vec<f64> {
        // (y - θ)₊ with θ fixed by the density constraint
        let mass = |t: f64| y.iter().zip(w).map(|(yi, wi)| wi * (yi - t).max(0.0)).sum::<f64>();
        let (mut lo, mut hi) = (y.iter().copied().fold(f64::MAX, f64::min) - rho, y.iter().copied().fold(f64::MIN, f64::max));
        while mass(lo) < rho {
            lo -= (hi - lo).abs() + 1.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) > rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        y.iter().map(|yi| (yi - theta).max(0.0)).collect()
    };
    let total: f64 = w.iter().sum();
    let mut g = project(&vec![rho / total; s.len()]);
    let tau = 0.5 * a; // half the inverse Lipschitz constant of Q'
    for _ in 0..200 {
        let y: Vec<f64> = g.iter().zip(s).map(|(gi, si)| gi - tau * (gi / a + 0.5 * si * si)).collect();
        g = project(&y);
    }
    let value = g.iter().zip(s).zip(w).map(|((gi, si), wi)| wi * (casimir.q(*gi) + 0.5 * si * si * gi)).sum();
    (value, g)
}

#[test]
fn conjugate_formula_matches_direct_velocity_space_minimum() {
    // c = 1, γ = 7/5 star, lifted by the k = 1 ansatz
    let eos = EosSpec::polytrope(1.0, 1.4).unwrap();
    let profile = steady::shoot(&eos, 1.0).unwrap();
    let ansatz = KineticAnsatz::matching(&profile).unwrap();
    let casimir = ansatz.casimir().unwrap();
    let lifted = kinetic::lift_minimizer(&profile, &ansatz, 48).unwrap();
    let lifted_rho = lifted.density().unwrap();

    let nodes = profile.grid().nodes();
    for frac in [0.0, 0.3, 0.7] {
        let i = nodes.iter().position(|&r| r >= frac * profile.r_support()).unwrap();
        let rho = profile.rho0()[i];
        assert!(((lifted_rho.values()[i] - rho) / rho).abs() < 1e-6);

        // speeds cover the support √(2(E₀ - V₀)) with room to spare
        let s_max = 1.3 * (2.0 * eos.phi_prime(rho).unwrap()).sqrt();
        let m = 2000;
        let h = s_max / m as f64;
        let s: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) * h).collect();
        let w: Vec<f64> = s.iter().map(|si| 4.0 * PI * si * si * h).collect();
        let (direct, g) = direct_minimum(&casimir, rho, &s, &w);

        let phi = eos.phi(rho).unwrap();
        assert!(((direct - phi) / phi).abs() < 1e-5, "r = {}: direct {direct} vs Φ {phi}", nodes[i]);
        // the minimizer is the lifted distribution (Q')⁻¹(E₀ - E) at this radius
        let z = profile.z()[i];
        for (gi, si) in g.iter().zip(&s) {
            let f0 = casimir.q_prime_inv(z - 0.5 * si * si);
            assert!((gi - f0).abs() <= 1e-3 * casimir.q_prime_inv(z), "s = {si}: {gi} vs {f0}");
        }
    }
}
