//! Exponent arithmetic on the critical hyperbola
//! `1/(p+1) + 1/(q+1) = (N-2)/N`, the Sobolev/Hölder conjugates, the
//! Green normalization constants, blow-up rate exponents, and the
//! algebraic validity predicates the rest of the laboratory relies on.

use crate::error::Error;
use crate::Result;

/// Surface area of the unit sphere in `R^n`, `2 pi^{n/2} / Gamma(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// `Gamma(n/2)` for integer `n >= 1`, evaluated exactly as a product.
fn gamma_half(n: usize) -> f64 {
    if n % 2 == 0 {
        // Gamma(m) = (m-1)!
        let m = n / 2;
        (1..m).map(|k| k as f64).product()
    } else {
        // Gamma(m + 1/2) = (2m-1)!! / 2^m * sqrt(pi)
        let m = n / 2;
        let mut acc = std::f64::consts::PI.sqrt();
        for k in 0..m {
            acc *= (2 * k + 1) as f64 / 2.0;
        }
        acc
    }
}

/// Dimension/exponent bundle for a point `(p, q)` on the critical
/// hyperbola with `p <= (N+2)/(N-2) <= q`, together with the derived
/// conjugates and Green normalizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPair {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub p_star: f64,
    pub q_star: f64,
    pub gamma_n: f64,
}

/// Conjugate exponent `q` on the critical hyperbola.
pub fn critical_q(n: usize, p: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Regime(format!("dimension N={n} < 3")));
    }
    let nd = n as f64;
    if p <= 2.0 / (nd - 2.0) {
        return Err(Error::Regime(format!(
            "p={p} <= 2/(N-2)={}, conjugate exponent undefined",
            2.0 / (nd - 2.0)
        )));
    }
    let inv_q1 = (nd - 2.0) / nd - 1.0 / (p + 1.0);
    Ok(1.0 / inv_q1 - 1.0)
}

impl CriticalPair {
    /// Build the bundle from `(N, p)`; `q` is solved from the hyperbola
    /// relation. Requires `2/(N-2) < p <= (N+2)/(N-2)`.
    pub fn new(n: usize, p: f64) -> Result<Self> {
        let q = critical_q(n, p)?;
        let nd = n as f64;
        if p > (nd + 2.0) / (nd - 2.0) + 1e-12 {
            return Err(Error::Regime(format!(
                "p={p} exceeds the Sobolev exponent (N+2)/(N-2)"
            )));
        }
        let p_star = 1.0 / (p / (p + 1.0) - 1.0 / nd);
        let q_star = 1.0 / (q / (q + 1.0) - 1.0 / nd);
        let gamma_n = 1.0 / ((nd - 2.0) * unit_sphere_area(n));
        Ok(CriticalPair { n, p, q, p_star, q_star, gamma_n })
    }

    pub fn nd(&self) -> f64 {
        self.n as f64
    }

    /// Decay exponent of the first bubble component, `(N-2)p - 2`.
    pub fn u_decay_exponent(&self) -> f64 {
        (self.nd() - 2.0) * self.p - 2.0
    }

    /// Decay exponent of the second component, `N - 2`.
    pub fn v_decay_exponent(&self) -> f64 {
        self.nd() - 2.0
    }

    /// `N / (q+1)`, the scaling power of the first component.
    pub fn u_scale_exponent(&self) -> f64 {
        self.nd() / (self.q + 1.0)
    }

    /// `N / (p+1)`, the scaling power of the second component.
    pub fn v_scale_exponent(&self) -> f64 {
        self.nd() / (self.p + 1.0)
    }

    /// `Np / (q+1)`, the order of the leading projection correction.
    pub fn np_over_q1(&self) -> f64 {
        self.nd() * self.p / (self.q + 1.0)
    }

    /// True when `p < N/(N-2)`, the range where the bubble's first
    /// component decays slower than `|x|^{2-N}` and the nonlinear Green
    /// machinery is meaningful.
    pub fn in_nonlinear_range(&self) -> bool {
        self.p < self.nd() / (self.nd() - 2.0)
    }

    /// True when `p < (N-1)/(N-2)`, the range where the regular part of
    /// the nonlinear Green function is C^1 and its critical points are
    /// well-defined.
    pub fn in_regular_range(&self) -> bool {
        self.p < (self.nd() - 1.0) / (self.nd() - 2.0)
    }

    /// Normalization `gamma_tilde` of the nonlinear singular profile,
    /// `gamma_N^p / ([(N-2)p-2][N-(N-2)p])`. Only defined for
    /// `p < N/(N-2)`.
    pub fn gamma_tilde(&self) -> Result<f64> {
        if !self.in_nonlinear_range() {
            return Err(Error::Regime(format!(
                "gamma_tilde requires p < N/(N-2), got p={}",
                self.p
            )));
        }
        let s = self.u_decay_exponent();
        let t = self.nd() - (self.nd() - 2.0) * self.p;
        Ok(self.gamma_n.powf(self.p) / (s * t))
    }

    /// Hyperbola residual `1/(p+1) + 1/(q+1) - (N-2)/N`.
    pub fn hyperbola_residual(&self) -> f64 {
        1.0 / (self.p + 1.0) + 1.0 / (self.q + 1.0) - (self.nd() - 2.0) / self.nd()
    }

    /// Residual of the identity `(N-2)p - 2 = N(p+1)/(q+1)`.
    pub fn identity_residual(&self) -> f64 {
        self.u_decay_exponent() - self.nd() * (self.p + 1.0) / (self.q + 1.0)
    }
}

/// Perturbation structure selecting a blow-up rate. The three critical
/// cases mirror the mutually exclusive coupling conditions (i)-(iii);
/// the subcritical variant moves both exponents instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateScenario {
    /// `beta1 > 0`.
    CaseIBeta1 { alpha: f64, beta1: f64, beta2: f64 },
    /// `beta1 = 0`, `alpha > 0`.
    CaseIIAlpha { alpha: f64, beta2: f64 },
    /// `beta1 = alpha = 0`, `beta2 > 0`.
    CaseIIIBeta2 { beta2: f64 },
    /// Exponents `p - alpha_sub*eps`, `q - beta_sub*eps`, both couplings
    /// positive.
    Subcritical { alpha_sub: f64, beta_sub: f64 },
}

impl RateScenario {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RateScenario::CaseIBeta1 { beta1, .. } if beta1 > 0.0 => Ok(()),
            RateScenario::CaseIBeta1 { .. } => {
                Err(Error::Regime("case (i) requires beta1 > 0".into()))
            }
            RateScenario::CaseIIAlpha { alpha, .. } if alpha > 0.0 => Ok(()),
            RateScenario::CaseIIAlpha { .. } => {
                Err(Error::Regime("case (ii) requires alpha > 0".into()))
            }
            RateScenario::CaseIIIBeta2 { beta2 } if beta2 > 0.0 => Ok(()),
            RateScenario::CaseIIIBeta2 { .. } => {
                Err(Error::Regime("case (iii) requires beta2 > 0".into()))
            }
            RateScenario::Subcritical { alpha_sub, beta_sub } if alpha_sub > 0.0 && beta_sub > 0.0 => {
                Ok(())
            }
            RateScenario::Subcritical { .. } => {
                Err(Error::Regime("subcritical scenario requires alpha_sub, beta_sub > 0".into()))
            }
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            RateScenario::CaseIBeta1 { alpha, .. } => alpha,
            RateScenario::CaseIIAlpha { alpha, .. } => alpha,
            _ => 0.0,
        }
    }

    pub fn beta1(&self) -> f64 {
        match *self {
            RateScenario::CaseIBeta1 { beta1, .. } => beta1,
            _ => 0.0,
        }
    }

    pub fn beta2(&self) -> f64 {
        match *self {
            RateScenario::CaseIBeta1 { beta2, .. } => beta2,
            RateScenario::CaseIIAlpha { beta2, .. } => beta2,
            RateScenario::CaseIIIBeta2 { beta2 } => beta2,
            _ => 0.0,
        }
    }
}

/// Exponent `r` of the concentration scale `mu = eps^r` for the given
/// scenario. Signals a regime error when the scenario's dimension or
/// exponent condition fails.
pub fn mu_rate(scenario: &RateScenario, pair: &CriticalPair) -> Result<f64> {
    scenario.validate()?;
    let n = pair.n;
    let nd = pair.nd();
    let p = pair.p;
    let q = pair.q;
    match scenario {
        RateScenario::CaseIBeta1 { .. } => {
            if n < 4 {
                return Err(Error::Regime("case (i) rate needs N >= 4".into()));
            }
            let den = (nd - 2.0) * p * p - 4.0 * p + (nd - 2.0);
            debug_assert!(den > 0.0);
            Ok((p + 1.0) / den)
        }
        RateScenario::CaseIIAlpha { .. } => {
            if n < 6 {
                return Err(Error::Regime("case (ii) rate needs N >= 6".into()));
            }
            let den = (nd - 2.0) * p - 4.0;
            if den <= 0.0 {
                return Err(Error::Regime(format!("case (ii) rate needs (N-2)p > 4, got {den}")));
            }
            Ok(1.0 / den)
        }
        RateScenario::CaseIIIBeta2 { .. } => {
            if n < 8 {
                return Err(Error::Regime("case (iii) rate needs N >= 8".into()));
            }
            let den = nd * (p - q + 2.0);
            if den <= 0.0 {
                return Err(Error::Regime(format!(
                    "case (iii) rate needs p - q + 2 > 0, got {}",
                    p - q + 2.0
                )));
            }
            Ok((q + 1.0) / den)
        }
        RateScenario::Subcritical { .. } => {
            if n < 4 {
                return Err(Error::Regime("subcritical rate needs N >= 4".into()));
            }
            let den = (nd - 2.0) * p - 2.0;
            debug_assert!(den > 0.0);
            Ok(1.0 / den)
        }
    }
}

/// One evaluated predicate with its numeric slack (positive = satisfied
/// with that margin; residual-type checks pass when the slack is below
/// tolerance instead).
#[derive(Debug, Clone)]
pub struct PredicateCheck {
    pub name: &'static str,
    pub pass: bool,
    pub margin: f64,
}

/// Report of all algebraic lemma predicates at a given pair.
#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub checks: Vec<PredicateCheck>,
}

impl LemmaReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&PredicateCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Evaluate the algebraic inequalities and identities underpinning the
/// expansions: the two superlinearity inequalities, the exponent gap
/// `p + 2 > q`, both defining identities, and the finiteness thresholds
/// of the bubble integrals.
pub fn validate_exponent_lemmas(pair: &CriticalPair) -> LemmaReport {
    let nd = pair.nd();
    let (p, q, q_star) = (pair.p, pair.q, pair.q_star);
    let mut checks = Vec::new();
    let mut ineq = |name: &'static str, margin: f64| {
        checks.push(PredicateCheck { name, pass: margin > 0.0, margin });
    };
    ineq("superlinear_uq", pair.u_decay_exponent() * q - (nd + 2.0));
    ineq("superlinear_pqqstar", p * q * q_star - (p + 1.0));
    ineq("exponent_gap", p + 2.0 - q);
    ineq("a3_finite", nd - (2.0 + 4.0 / p));
    ineq("a4_finite", nd * (2.0 * p - 1.0) - 4.0 * (p + 1.0));
    ineq("a5_finite", nd - 4.0);
    ineq("qstar_in_interval", (q_star - 1.0).min(2.0 - q_star));
    let mut resid = |name: &'static str, r: f64| {
        checks.push(PredicateCheck { name, pass: r.abs() < 1e-12, margin: r });
    };
    resid("hyperbola_residual", pair.hyperbola_residual());
    resid("scaling_identity", pair.identity_residual());
    resid(
        "conjugate_duality",
        1.0 / pair.p_star + 1.0 / pair.q_star - 1.0,
    );
    LemmaReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert!((unit_sphere_area(2) - 2.0 * pi).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * pi).abs() < 1e-13);
        // |S^7| = pi^4 / 3
        assert!((unit_sphere_area(8) - pi.powi(4) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn conjugate_exponent_examples() {
        // symmetric point of the hyperbola
        let q = critical_q(8, 5.0 / 3.0).unwrap();
        assert!((q - 5.0 / 3.0).abs() < 1e-14);
        // algebraic solve for p = 1.1: q = 61/23
        let q = critical_q(8, 1.1).unwrap();
        assert!((q - 61.0 / 23.0).abs() < 1e-12);
        // p = 1 gives q = 3
        let q = critical_q(8, 1.0).unwrap();
        assert!((q - 3.0).abs() < 1e-14);
        // below the admissible range
        assert!(critical_q(8, 0.3).is_err());
    }

    #[test]
    fn constants_examples() {
        let pi = std::f64::consts::PI;
        let pair3 = CriticalPair::new(3, 3.0).unwrap();
        assert!((pair3.gamma_n - 1.0 / (4.0 * pi)).abs() < 1e-15);

        let pair8 = CriticalPair::new(8, 1.1).unwrap();
        assert!((pair8.gamma_n - 1.0 / (2.0 * pi.powi(4))).abs() < 1e-15);
        assert!((pair8.gamma_n - 0.0051330).abs() < 1e-7);
        assert!((pair8.q_star - 168.0 / 101.0).abs() < 1e-12);
        assert!((pair8.p_star - 168.0 / 67.0).abs() < 1e-12);

        // gamma_tilde positive in the nonlinear range
        let gt = pair8.gamma_tilde().unwrap();
        let expect = pair8.gamma_n.powf(1.1) / (4.6 * 1.4);
        assert!((gt - expect).abs() / expect < 1e-12);

        // regime error beyond N/(N-2)
        let sym = CriticalPair::new(8, 5.0 / 3.0).unwrap();
        assert!(sym.gamma_tilde().is_err());
    }

    #[test]
    fn rate_examples() {
        let pair = CriticalPair::new(8, 1.1).unwrap();
        let sc1 = RateScenario::CaseIBeta1 { alpha: 0.0, beta1: 1.0, beta2: 0.0 };
        let r1 = mu_rate(&sc1, &pair).unwrap();
        assert!((r1 - 2.1 / 8.86).abs() < 1e-12);
        assert!((r1 - 0.2370203).abs() < 1e-6);

        let sc2 = RateScenario::CaseIIAlpha { alpha: 1.0, beta2: 0.0 };
        let r2 = mu_rate(&sc2, &pair).unwrap();
        assert!((r2 - 1.0 / 2.6).abs() < 1e-12);

        let sub = RateScenario::Subcritical { alpha_sub: 1.0, beta_sub: 1.0 };
        let rs = mu_rate(&sub, &pair).unwrap();
        assert!((rs - 1.0 / 4.6).abs() < 1e-12);

        // invalid coupling signs are rejected
        assert!(RateScenario::CaseIBeta1 { alpha: 1.0, beta1: 0.0, beta2: 0.0 }
            .validate()
            .is_err());
        assert!(RateScenario::Subcritical { alpha_sub: -1.0, beta_sub: 1.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn lemma_examples_at_8_11() {
        let pair = CriticalPair::new(8, 1.1).unwrap();
        let report = validate_exponent_lemmas(&pair);
        assert!(report.all_pass());

        let uq = pair.u_decay_exponent() * pair.q;
        assert!((uq - 12.2).abs() < 1e-12);
        let pqq = pair.p * pair.q * pair.q_star;
        assert!((pqq - 4.8528).abs() < 1e-3);
        assert!(pair.p + 2.0 > pair.q);

        // finiteness thresholds
        assert!((2.0f64 + 4.0 / 1.1 - 5.636364).abs() < 1e-6);
        assert!((4.0f64 * 2.1 / 1.2 - 7.0).abs() < 1e-12);

        // scaling identity evaluated on both sides
        assert!((pair.u_decay_exponent() - 4.6).abs() < 1e-12);
        assert!(pair.identity_residual().abs() < 1e-12);
    }

    #[test]
    fn randomized_identities() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1ab);
        for _ in 0..1000 {
            let n = rng.gen_range(4..=12usize);
            let nd = n as f64;
            let lo = 1.0;
            let hi = (nd - 1.0) / (nd - 2.0);
            let p = lo + (hi - lo) * rng.gen::<f64>();
            let pair = CriticalPair::new(n, p).unwrap();
            assert!(pair.hyperbola_residual().abs() < 1e-12);
            assert!((1.0 / pair.p_star + 1.0 / pair.q_star - 1.0).abs() < 1e-12);
            assert!(pair.identity_residual().abs() < 1e-12);
            assert!(pair.q_star > 1.0 && pair.q_star < 2.0);
            assert!(pair.p <= (nd + 2.0) / (nd - 2.0) && pair.q >= (nd + 2.0) / (nd - 2.0) - 1e-12);
            if n >= 8 {
                let report = validate_exponent_lemmas(&pair);
                assert!(report.all_pass(), "predicates failed at N={n}, p={p}");
            }
        }
    }

    #[test]
    fn rate_ordering_case_i_below_case_ii() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = 1.0 + rng.gen::<f64>() * (7.0 / 6.0 - 1.0);
            let pair = CriticalPair::new(8, p).unwrap();
            let r1 = mu_rate(
                &RateScenario::CaseIBeta1 { alpha: 0.0, beta1: 1.0, beta2: 0.0 },
                &pair,
            )
            .unwrap();
            let r2 = mu_rate(&RateScenario::CaseIIAlpha { alpha: 1.0, beta2: 0.0 }, &pair).unwrap();
            assert!(r1 < r2, "rate ordering violated at p={p}");
        }
    }
}
