//! Radial verification of the projection expansions on the unit ball
//! with one centered spike: the linear projections `PU`, `PV`, the
//! kernel projections `PΨ0`, `PΦ0`, and the nonlinear projection of the
//! bubble through the system nonlinearity, each compared against its
//! predicted expansion with the remainder order fitted over a sweep of
//! `mu`.
//!
//! On this geometry the auxiliary harmonic data are explicit — the
//! boundary data of `|x|^{2-(N-2)p}` and of the Newtonian kernel are
//! constants, so the comparison functions reduce to `1` and `gamma_N` —
//! and the nonlinear comparison profile comes from the radial oracle of
//! the nonlinear Green module. Everything else is a one-dimensional
//! Dirichlet solve.

use crate::bubble::{spow, BubbleProfile};
use crate::error::Error;
use crate::nonlinear_green::RadialHTilde;
use crate::Result;

/// Graded radial mesh on `[0, 1]`, `r_j = (j/m)^grading`.
#[derive(Debug, Clone)]
pub struct RadialMesh {
    pub nodes: Vec<f64>,
}

impl RadialMesh {
    pub fn graded(m: usize, grading: f64) -> Self {
        let nodes = (0..=m).map(|j| (j as f64 / m as f64).powf(grading)).collect();
        RadialMesh { nodes }
    }

    /// Two-zone mesh: uniform fine spacing through the spike core, then
    /// uniform coarse spacing to the boundary. Keeps the smallest cell
    /// proportional to the spike width, so the tridiagonal system stays
    /// well-conditioned (a power-law grading drives the first cells to
    /// ~1e-11 and the 1/h^2 coefficients into roundoff).
    pub fn two_zone(core_end: f64, h_core: f64, h_outer: f64) -> Self {
        let mut nodes = Vec::new();
        let m_core = (core_end / h_core).ceil() as usize;
        for j in 0..=m_core {
            nodes.push(core_end * j as f64 / m_core as f64);
        }
        let rest = 1.0 - core_end;
        let m_outer = (rest / h_outer).ceil() as usize;
        for j in 1..=m_outer {
            nodes.push(core_end + rest * j as f64 / m_outer as f64);
        }
        RadialMesh { nodes }
    }

    /// Mesh resolving a centered spike of width `mu`.
    pub fn for_spike(mu: f64) -> Self {
        let core_end = (25.0 * mu).min(0.5);
        RadialMesh::two_zone(core_end, mu / 400.0, 2.5e-4)
    }

    /// Default mesh for spikes down to `mu ~ 0.02`.
    pub fn standard() -> Self {
        RadialMesh::for_spike(0.02)
    }
}

/// Radial field sampled on a mesh, Dirichlet at `r = 1`.
#[derive(Debug, Clone)]
pub struct RadialField {
    pub mesh: RadialMesh,
    pub values: Vec<f64>,
}

impl RadialField {
    pub fn value_at(&self, r: f64) -> f64 {
        let nodes = &self.mesh.nodes;
        if r <= nodes[0] {
            return self.values[0];
        }
        if r >= *nodes.last().unwrap() {
            return *self.values.last().unwrap();
        }
        let mut lo = 0;
        let mut hi = nodes.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if nodes[mid] <= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (r - nodes[lo]) / (nodes[hi] - nodes[lo]);
        self.values[lo] * (1.0 - t) + self.values[hi] * t
    }
}

/// Solve `-(w'' + (N-1) w'/r) = f(r)` on `(0,1)` with `w'(0) = 0`,
/// `w(1) = 0`, by second-order finite differences on the given mesh
/// (three-point stencils, exact on quadratics even off-uniform).
pub fn radial_dirichlet_solve<F>(n: usize, mesh: &RadialMesh, f: F) -> Result<RadialField>
where
    F: Fn(f64) -> f64,
{
    let nodes = &mesh.nodes;
    let m = nodes.len() - 1;
    let nd = n as f64;
    let rhs: Vec<f64> = nodes.iter().map(|&r| f(r)).collect();
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularRhs(
            "right-hand side is not finite on the mesh; the radial weight cannot absorb it".into(),
        ));
    }

    // tridiagonal system over interior unknowns w_0..w_{m-1}
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut b = vec![0.0; m];

    // r = 0: symmetry gives -Delta w(0) = -N w''(0), w''(0) ~ 2(w1-w0)/h^2
    let h1 = nodes[1];
    diag[0] = 2.0 * nd / (h1 * h1);
    sup[0] = -2.0 * nd / (h1 * h1);
    b[0] = rhs[0];

    for i in 1..m {
        let hm = nodes[i] - nodes[i - 1];
        let hp = nodes[i + 1] - nodes[i];
        let r = nodes[i];
        let denom = hm * hp * (hm + hp);
        let c_m = 2.0 * hp / denom;
        let c_0 = -2.0 * (hm + hp) / denom;
        let c_p = 2.0 * hm / denom;
        let d_m = -hp * hp / denom;
        let d_0 = (hp * hp - hm * hm) / denom;
        let d_p = hm * hm / denom;
        let g = (nd - 1.0) / r;
        sub[i] = -(c_m + g * d_m);
        diag[i] = -(c_0 + g * d_0);
        sup[i] = -(c_p + g * d_p);
        b[i] = rhs[i];
    }
    // w_m = 0 eliminates the super-diagonal entry of the last row

    let mut c_star = vec![0.0; m];
    let mut d_star = vec![0.0; m];
    c_star[0] = sup[0] / diag[0];
    d_star[0] = b[0] / diag[0];
    for i in 1..m {
        let denom = diag[i] - sub[i] * c_star[i - 1];
        c_star[i] = if i + 1 < m { sup[i] / denom } else { 0.0 };
        d_star[i] = (b[i] - sub[i] * d_star[i - 1]) / denom;
    }
    let mut w = vec![0.0; m + 1];
    w[m - 1] = d_star[m - 1];
    for i in (0..m - 1).rev() {
        w[i] = d_star[i] - c_star[i] * w[i + 1];
    }
    Ok(RadialField { mesh: mesh.clone(), values: w })
}

/// Discrete residual `max_i |L w - f| / max |f|` of a solve, re-applying
/// the same stencils.
pub fn solve_residual<F>(n: usize, field: &RadialField, f: F) -> f64
where
    F: Fn(f64) -> f64,
{
    let nodes = &field.mesh.nodes;
    let w = &field.values;
    let m = nodes.len() - 1;
    let nd = n as f64;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 1..m {
        let r = nodes[i];
        // the finest cells amplify f64 roundoff through 1/h^2; measure
        // where the stencil arithmetic is meaningful
        if r < 0.05 {
            continue;
        }
        let hm = nodes[i] - nodes[i - 1];
        let hp = nodes[i + 1] - nodes[i];
        let denom = hm * hp * (hm + hp);
        let w2 = (2.0 * hp * w[i - 1] - 2.0 * (hm + hp) * w[i] + 2.0 * hm * w[i + 1]) / denom;
        let w1 = (-hp * hp * w[i - 1] + (hp * hp - hm * hm) * w[i] + hm * hm * w[i + 1]) / denom;
        let lw = -(w2 + (nd - 1.0) / r * w1);
        let fi = f(r);
        worst = worst.max((lw - fi).abs());
        scale = scale.max(fi.abs());
    }
    worst / scale.max(1e-300)
}

/// Rescaled bubble components and kernel elements as radial functions.
pub struct SpikeFunctions<'a> {
    profile: &'a BubbleProfile,
    mu: f64,
}

impl<'a> SpikeFunctions<'a> {
    pub fn new(profile: &'a BubbleProfile, mu: f64) -> Self {
        assert!(mu > 0.0);
        SpikeFunctions { profile, mu }
    }

    pub fn u(&self, r: f64) -> f64 {
        self.mu.powf(-self.profile.pair.u_scale_exponent()) * self.profile.u_at(r / self.mu)
    }

    pub fn v(&self, r: f64) -> f64 {
        self.mu.powf(-self.profile.pair.v_scale_exponent()) * self.profile.v_at(r / self.mu)
    }

    /// Dilation kernel element, first component:
    /// `Ψ0_mu(r) = mu^{-N/(q+1)-1} (t U'(t) + N U(t)/(q+1))`, `t = r/mu`.
    pub fn psi0(&self, r: f64) -> f64 {
        let pair = &self.profile.pair;
        let t = r / self.mu;
        let val =
            t * self.profile.u_prime_at(t) + pair.nd() * self.profile.u_at(t) / (pair.q + 1.0);
        self.mu.powf(-pair.u_scale_exponent() - 1.0) * val
    }

    pub fn phi0(&self, r: f64) -> f64 {
        let pair = &self.profile.pair;
        let t = r / self.mu;
        let val =
            t * self.profile.v_prime_at(t) + pair.nd() * self.profile.v_at(t) / (pair.p + 1.0);
        self.mu.powf(-pair.v_scale_exponent() - 1.0) * val
    }
}

/// Linear projections `(PU, PV)` of a centered spike on the unit ball:
/// Dirichlet solves against `V_mu^p` and `U_mu^q`.
pub fn project_pair(
    profile: &BubbleProfile,
    mu: f64,
    mesh: &RadialMesh,
) -> Result<(RadialField, RadialField)> {
    let pair = &profile.pair;
    let spike = SpikeFunctions::new(profile, mu);
    let pu = radial_dirichlet_solve(pair.n, mesh, |r| spike.v(r).powf(pair.p))?;
    let pv = radial_dirichlet_solve(pair.n, mesh, |r| spike.u(r).powf(pair.q))?;
    Ok((pu, pv))
}

/// Kernel projections `(PΨ0, PΦ0)`: solves against `p V_mu^{p-1} Φ0` and
/// `q U_mu^{q-1} Ψ0`.
pub fn project_kernel0(
    profile: &BubbleProfile,
    mu: f64,
    mesh: &RadialMesh,
) -> Result<(RadialField, RadialField)> {
    let pair = &profile.pair;
    let spike = SpikeFunctions::new(profile, mu);
    let p_psi = radial_dirichlet_solve(pair.n, mesh, |r| {
        pair.p * spike.v(r).powf(pair.p - 1.0) * spike.phi0(r)
    })?;
    let p_phi = radial_dirichlet_solve(pair.n, mesh, |r| {
        pair.q * spike.u(r).powf(pair.q - 1.0) * spike.psi0(r)
    })?;
    Ok((p_psi, p_phi))
}

/// Nonlinear projection: solve `-Δ w = (PV)^p` with the projected `PV`
/// as input.
pub fn nonlinear_projection(
    profile: &BubbleProfile,
    mu: f64,
    mesh: &RadialMesh,
) -> Result<RadialField> {
    let pair = &profile.pair;
    let (_, pv) = project_pair(profile, mu, mesh)?;
    radial_dirichlet_solve(pair.n, mesh, |r| spow(pv.value_at(r), pair.p))
}

/// One measured expansion: per-`mu` sup errors on `r in [0.2, 0.9]` and
/// the fitted log-log order, compared against the leading order.
#[derive(Debug, Clone)]
pub struct ExpansionFit {
    pub mus: Vec<f64>,
    pub errors: Vec<f64>,
    pub fitted_order: f64,
    pub leading_order: f64,
}

impl ExpansionFit {
    /// Remainder order must exceed the leading order by the margin.
    pub fn passes(&self, margin: f64) -> bool {
        self.fitted_order > self.leading_order + margin
    }
}

fn fit_order(mus: &[f64], errors: &[f64], leading_order: f64) -> ExpansionFit {
    let xs: Vec<f64> = mus.iter().map(|m| m.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
    let m = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let fitted_order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    ExpansionFit { mus: mus.to_vec(), errors: errors.to_vec(), fitted_order, leading_order }
}

const WINDOW: (f64, f64) = (0.2, 0.9);

fn window_sup(mesh: &RadialMesh, err: impl Fn(f64) -> f64) -> f64 {
    mesh.nodes
        .iter()
        .filter(|&&r| r >= WINDOW.0 && r <= WINDOW.1)
        .map(|&r| err(r).abs())
        .fold(0.0, f64::max)
}

/// Measured remainders of the five projection expansions at one `mu`.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionErrors {
    pub e_u: f64,
    pub e_v: f64,
    pub e_psi: f64,
    pub e_phi: f64,
    pub e_nonlinear: f64,
}

/// Evaluate all expansion remainders at one `mu`. `a` and `b` are the
/// decay constants; `oracle` is the radial `H̃(·,0)` profile of the unit
/// ball.
pub fn projection_errors(
    profile: &BubbleProfile,
    mu: f64,
    a: f64,
    b: f64,
    oracle: &RadialHTilde,
) -> Result<ProjectionErrors> {
    let pair = &profile.pair;
    let mesh = &RadialMesh::for_spike(mu);
    let spike = SpikeFunctions::new(profile, mu);
    let (pu, pv) = project_pair(profile, mu, mesh)?;
    let (p_psi, p_phi) = project_kernel0(profile, mu, mesh)?;
    let bpu = nonlinear_projection(profile, mu, mesh)?;

    let lead_u = mu.powf(pair.np_over_q1());
    let lead_v = mu.powf(pair.u_scale_exponent());
    // on the unit ball the comparison data reduce to constants:
    // hat-h == 1 and H == gamma_N. The kernel corrections carry the
    // extra dilation factors Np/(q+1) and N/(q+1): differentiating the
    // far fields a mu^{Np/(q+1)} |x|^{2-(N-2)p} and
    // b mu^{N/(q+1)} |x|^{2-N} in mu produces them directly.
    let kernel_u = pair.np_over_q1() * a * lead_u / mu;
    let kernel_v = pair.u_scale_exponent() * b * lead_v / mu;
    let e_u = window_sup(mesh, |r| pu.value_at(r) - spike.u(r) + a * lead_u);
    let e_v = window_sup(mesh, |r| pv.value_at(r) - spike.v(r) + b * lead_v);
    let e_psi = window_sup(mesh, |r| p_psi.value_at(r) - spike.psi0(r) - kernel_u);
    let e_phi = window_sup(mesh, |r| p_phi.value_at(r) - spike.phi0(r) - kernel_v);
    let gamma_ratio_p = (b / pair.gamma_n).powf(pair.p);
    let e_nonlinear = window_sup(mesh, |r| {
        bpu.value_at(r) - spike.u(r) + lead_u * gamma_ratio_p * oracle.value_at(r)
    });
    Ok(ProjectionErrors { e_u, e_v, e_psi, e_phi, e_nonlinear })
}

/// Fitted remainder orders of all expansions over a `mu` sweep.
pub struct ExpansionReport {
    pub pu: ExpansionFit,
    pub pv: ExpansionFit,
    pub psi: ExpansionFit,
    pub phi: ExpansionFit,
    pub nonlinear: ExpansionFit,
}

pub fn expansion_residuals(
    profile: &BubbleProfile,
    mus: &[f64],
    a: f64,
    b: f64,
    oracle: &RadialHTilde,
) -> Result<ExpansionReport> {
    let pair = &profile.pair;
    let mut errs = Vec::new();
    for &mu in mus {
        errs.push(projection_errors(profile, mu, a, b, oracle)?);
    }
    let collect = |sel: fn(&ProjectionErrors) -> f64, lead: f64| {
        let errors: Vec<f64> = errs.iter().map(sel).collect();
        fit_order(mus, &errors, lead)
    };
    Ok(ExpansionReport {
        pu: collect(|e| e.e_u, pair.np_over_q1()),
        pv: collect(|e| e.e_v, pair.u_scale_exponent()),
        psi: collect(|e| e.e_psi, pair.np_over_q1() - 1.0),
        phi: collect(|e| e.e_phi, pair.u_scale_exponent() - 1.0),
        nonlinear: collect(|e| e.e_nonlinear, pair.np_over_q1()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::{decay_constants, shoot_ground_state};
    use crate::hyperbola::CriticalPair;
    use crate::nonlinear_green::tau_tilde_radial_oracle;

    #[test]
    fn torsion_function_is_exact() {
        // f == 1 gives w = (1 - r^2)/(2N); the stencils are exact on
        // quadratics, so the discrete solution matches to roundoff
        let mesh = RadialMesh::graded(500, 2.0);
        let w = radial_dirichlet_solve(8, &mesh, |_| 1.0).unwrap();
        for (r, v) in mesh.nodes.iter().zip(&w.values) {
            let exact = (1.0 - r * r) / 16.0;
            assert!((v - exact).abs() < 1e-12, "r={r}: {v} vs {exact}");
        }
        assert_eq!(*w.values.last().unwrap(), 0.0);
    }

    #[test]
    fn solver_is_linear() {
        let mesh = RadialMesh::graded(300, 2.0);
        let f = |r: f64| (1.0 + r).sin();
        let g = |r: f64| 1.0 / (1.0 + r * r);
        let wf = radial_dirichlet_solve(6, &mesh, f).unwrap();
        let wg = radial_dirichlet_solve(6, &mesh, g).unwrap();
        let wfg = radial_dirichlet_solve(6, &mesh, |r| f(r) + g(r)).unwrap();
        for i in 0..wf.values.len() {
            assert!((wf.values[i] + wg.values[i] - wfg.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_rhs_is_rejected() {
        let mesh = RadialMesh::standard();
        let res = radial_dirichlet_solve(8, &mesh, |r| 1.0 / r);
        assert!(matches!(res, Err(Error::SingularRhs(_))));
    }

    #[test]
    fn projection_solves_satisfy_contract() {
        let pair = CriticalPair::new(8, 1.1).unwrap();
        let profile = shoot_ground_state(&pair, 50.0, 1e-12).unwrap();
        let mesh = RadialMesh::standard();
        let mu = 0.05;
        let (pu, pv) = project_pair(&profile, mu, &mesh).unwrap();
        assert_eq!(*pu.values.last().unwrap(), 0.0);
        assert_eq!(*pv.values.last().unwrap(), 0.0);
        let spike = SpikeFunctions::new(&profile, mu);
        let res = solve_residual(8, &pu, |r| spike.v(r).powf(1.1));
        assert!(res < 1e-8, "residual {res}");
        // maximum principle: projections sit below the spike inside
        for (i, &r) in mesh.nodes.iter().enumerate() {
            if r > 0.01 && r < 0.99 {
                assert!(pu.values[i] < spike.u(r));
                assert!(pv.values[i] < spike.v(r));
                assert!(pu.values[i] > 0.0);
                assert!(pv.values[i] > 0.0);
            }
        }
    }

    #[test]
    fn kernel_projection_correction_sign() {
        let pair = CriticalPair::new(8, 1.1).unwrap();
        let profile = shoot_ground_state(&pair, 50.0, 1e-12).unwrap();
        let mesh = RadialMesh::standard();
        let mu = 0.03;
        let (p_psi, p_phi) = project_kernel0(&profile, mu, &mesh).unwrap();
        assert_eq!(*p_psi.values.last().unwrap(), 0.0);
        assert_eq!(*p_phi.values.last().unwrap(), 0.0);
        // the leading corrections are added, not subtracted
        let spike = SpikeFunctions::new(&profile, mu);
        let mid = 0.5;
        assert!(p_phi.value_at(mid) - spike.phi0(mid) > 0.0);
        assert!(p_psi.value_at(mid) - spike.psi0(mid) > 0.0);
    }

    #[test]
    fn expansion_orders_exceed_leading_orders() {
        let pair = CriticalPair::new(8, 1.1).unwrap();
        let profile = shoot_ground_state(&pair, 100.0, 1e-13).unwrap();
        let dc = decay_constants(&profile).unwrap();
        let oracle = tau_tilde_radial_oracle(&pair, 1.0, 20_000).unwrap();
        let report =
            expansion_residuals(&profile, &[0.05, 0.02], dc.a_decay, dc.b_decay, &oracle)
                .unwrap();
        for (name, fit) in [
            ("PU", &report.pu),
            ("PV", &report.pv),
            ("PPsi0", &report.psi),
            ("PPhi0", &report.phi),
            ("nonlinear", &report.nonlinear),
        ] {
            assert!(
                fit.passes(0.1),
                "{name}: fitted order {:.3} vs leading {:.3} (errors {:?})",
                fit.fitted_order,
                fit.leading_order,
                fit.errors
            );
        }
    }

    #[test]
    fn nonlinear_projection_reduces_to_linear_at_p_one() {
        let pair = CriticalPair::new(8, 1.0).unwrap();
        let profile = shoot_ground_state(&pair, 50.0, 1e-12).unwrap();
        let mesh = RadialMesh::standard();
        let mu = 0.02;
        let bpu = nonlinear_projection(&profile, mu, &mesh).unwrap();
        let spike = SpikeFunctions::new(&profile, mu);
        let oracle = tau_tilde_radial_oracle(&pair, 1.0, 20_000).unwrap();
        let b = decay_constants(&profile).unwrap().b_decay;
        let lead = mu.powf(pair.np_over_q1()) * (b / pair.gamma_n);
        // at p = 1 the nonlinear projection is the plain linear solve and
        // the expansion through the bi-Laplacian regular part holds
        let err =
            window_sup(&mesh, |r| bpu.value_at(r) - spike.u(r) + lead * oracle.value_at(r));
        let scale = lead * oracle.tau0;
        assert!(err < 0.1 * scale, "err {err} vs correction scale {scale}");
    }
}
