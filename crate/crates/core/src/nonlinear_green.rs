//! The nonlinear Green objects: `G̃` solving `-Δ G̃ = G^p`, its regular
//! part `H̃`, the Robin-type function `tau_tilde(ξ) = H̃(ξ,ξ)`, their
//! gradients, and the multi-spike configuration field.
//!
//! Everything rests on the representation formula
//!
//! `H̃(x,y) = ∫_Ω [Γ(x-z) Γ^p(z-y) - G(x,z) G^p(z,y)] dz
//!          + ∫_{R^N \ Ω} Γ(x-z) Γ^p(z-y) dz`
//!
//! with `Γ` the Newtonian kernel. The exterior integral is mapped onto a
//! punctured ball by inversion (exact Jacobian, no truncation); both
//! integrals are importance-sampled near their singular points. On balls
//! `G` and `∇H` are closed-form; on dumbbells `G` is estimated by nested
//! walk-on-spheres with split walk batches so the outer product stays
//! unbiased.
//!
//! Value-type estimates accept the whole range `p < N/(N-2)`; gradient
//! estimates additionally require `p < (N-1)/(N-2)` — beyond that bound
//! the gradient integrand `|z-ξ|^{-(N-1)-(N-2)(p-1)}` stops being
//! integrable, the same threshold past which critical points of
//! `tau_tilde` lose meaning.

use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::geom::{Ball, DomainSpec, Point};
use crate::green::{ball_green, ball_robin_h_grad_x, newtonian, wos_exit};
use crate::hyperbola::CriticalPair;
use crate::mc::{self, McEstimate};
use crate::sampling::{invert_exterior, IsMixture};
use crate::Result;

/// Monte Carlo budget and nested-walk controls.
#[derive(Debug, Clone, Copy)]
pub struct NonlinearGreenParams {
    pub n_interior: u64,
    pub n_exterior: u64,
    pub seed: u64,
    /// Walks per volume sample for dumbbell Green evaluations.
    pub inner_walks: u64,
    pub shell_rel: f64,
    pub max_steps: usize,
    /// Relative-error threshold for the `variance` failure.
    pub variance_cap: f64,
}

impl NonlinearGreenParams {
    pub fn new(n_interior: u64, n_exterior: u64, seed: u64) -> Self {
        NonlinearGreenParams {
            n_interior,
            n_exterior,
            seed,
            inner_walks: 400,
            shell_rel: 1e-5,
            max_steps: 100_000,
            variance_cap: 0.2,
        }
    }

    fn sub_seed(&self, tag: u64) -> u64 {
        crate::mc::derive_stream_seed(self.seed, 0xA100 + tag)
    }
}

fn add_estimates(a: McEstimate, b: McEstimate) -> McEstimate {
    McEstimate {
        value: a.value + b.value,
        std_error: (a.std_error * a.std_error + b.std_error * b.std_error).sqrt(),
        n_samples: a.n_samples + b.n_samples,
        seed: a.seed,
    }
}

fn check_value_regime(pair: &CriticalPair) -> Result<()> {
    if !pair.in_nonlinear_range() {
        return Err(Error::Regime(format!(
            "nonlinear Green objects need p < N/(N-2), got p={}",
            pair.p
        )));
    }
    Ok(())
}

fn check_gradient_regime(pair: &CriticalPair) -> Result<()> {
    check_value_regime(pair)?;
    if !pair.in_regular_range() {
        return Err(Error::Regime(format!(
            "gradients of the regular part need p < (N-1)/(N-2), got p={}",
            pair.p
        )));
    }
    Ok(())
}

fn check_variance(est: &McEstimate, cap: f64) -> Result<()> {
    if est.value != 0.0 && est.std_error / est.value.abs() > cap {
        return Err(Error::Variance(format!(
            "relative error {:.1}% exceeds {:.0}% at full budget",
            100.0 * est.std_error / est.value.abs(),
            100.0 * cap
        )));
    }
    Ok(())
}

/// Pointwise Green evaluation: exact on balls, nested walk-on-spheres on
/// dumbbells. Separate walk batches keep the nonlinear `f`-factor and
/// the linear `G(x,·)`-factor independent, so their product stays
/// unbiased.
enum PointGreen<'a> {
    Ball { ball: &'a Ball, gamma_n: f64 },
    Dumbbell { domain: &'a DomainSpec, gamma_n: f64, inner: u64, shell: f64, max_steps: usize },
}

impl<'a> PointGreen<'a> {
    fn new(domain: &'a DomainSpec, gamma_n: f64, params: &NonlinearGreenParams) -> Self {
        match domain {
            DomainSpec::Ball(ball) => PointGreen::Ball { ball, gamma_n },
            DomainSpec::Dumbbell { .. } => PointGreen::Dumbbell {
                domain,
                gamma_n,
                inner: params.inner_walks,
                shell: params.shell_rel * domain.diameter(),
                max_steps: params.max_steps,
            },
        }
    }

    /// `G(z, t_i)` for all targets; dumbbells share one walk batch across
    /// the targets.
    fn greens_multi(&self, z: &Point, targets: &[Point], rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            PointGreen::Ball { ball, gamma_n } => {
                for (slot, t) in out.iter_mut().zip(targets) {
                    *slot = ball_green(*gamma_n, ball, z, t).unwrap_or(0.0);
                }
            }
            PointGreen::Dumbbell { domain, gamma_n, inner, shell, max_steps } => {
                let nd = domain.dim() as f64;
                out.iter_mut().for_each(|v| *v = 0.0);
                for _ in 0..*inner {
                    if let Ok(exit) = wos_exit(domain, z, *shell, *max_steps, rng) {
                        for (slot, t) in out.iter_mut().zip(targets) {
                            *slot += newtonian(*gamma_n, nd, exit.dist(t));
                        }
                    }
                }
                for (slot, t) in out.iter_mut().zip(targets) {
                    *slot = newtonian(*gamma_n, nd, z.dist(t)) - *slot / *inner as f64;
                }
            }
        }
    }

    fn green_single(&self, z: &Point, x: &Point, rng: &mut ChaCha8Rng) -> f64 {
        let mut out = [0.0];
        self.greens_multi(z, std::slice::from_ref(x), rng, &mut out);
        out[0]
    }
}

/// Regular part `H̃(x,y)` by the representation formula.
pub fn h_tilde_mc(
    domain: &DomainSpec,
    pair: &CriticalPair,
    x: &Point,
    y: &Point,
    params: &NonlinearGreenParams,
) -> Result<McEstimate> {
    check_value_regime(pair)?;
    domain.require_interior(x, "first argument")?;
    domain.require_interior(y, "second argument")?;
    let nd = pair.nd();
    let gamma = pair.gamma_n;
    let p = pair.p;
    let cover = domain.bounding_ball();
    let pg = PointGreen::new(domain, gamma, params);

    // interior integral; the pointwise difference cancels the strongest
    // singularity, the mixture covers what remains at z -> x and z -> y
    let mut mix = IsMixture::uniform(cover.clone()).with_component(*x, nd - 2.0, 0.4);
    mix = if x.dist(y) > 1e-12 {
        mix.with_component(*y, (nd - 2.0) * p, 0.4)
    } else {
        mix.with_component(*y, (nd - 2.0) * p, 0.2)
    };
    let mix = mix.build();
    let interior = mc::estimate(params.sub_seed(1), params.n_interior, |rng| {
        let z = mix.sample(rng);
        if !domain.contains(&z) {
            return 0.0;
        }
        let whole = newtonian(gamma, nd, x.dist(&z)) * newtonian(gamma, nd, z.dist(y)).powf(p);
        let mut g_zy = [0.0];
        pg.greens_multi(&z, std::slice::from_ref(y), rng, &mut g_zy);
        let g_xz = pg.green_single(&z, x, rng);
        (whole - g_xz * crate::bubble::spow(g_zy[0], p)) / mix.pdf(&z)
    });

    // exterior: complement of the bounding ball by inversion, plus (for
    // dumbbells) the gap between the domain and its cover
    let ext_exp = 2.0 * nd - (nd - 2.0) * (p + 1.0);
    let ext_mix = IsMixture::uniform(cover.clone())
        .with_component(cover.center, ext_exp.max(0.0), 2.0)
        .build();
    let far = mc::estimate(params.sub_seed(2), params.n_exterior, |rng| {
        let w = ext_mix.sample(rng);
        let (z, jac) = invert_exterior(&cover, &w);
        let f = newtonian(gamma, nd, x.dist(&z)) * newtonian(gamma, nd, z.dist(y)).powf(p);
        f * jac / ext_mix.pdf(&w)
    });
    let mut total = add_estimates(interior, far);
    if !matches!(domain, DomainSpec::Ball(_)) {
        let gap_mix = IsMixture::uniform(cover.clone()).build();
        let gap = mc::estimate(params.sub_seed(3), params.n_exterior, |rng| {
            let z = gap_mix.sample(rng);
            if domain.contains(&z) {
                return 0.0;
            }
            let f = newtonian(gamma, nd, x.dist(&z)) * newtonian(gamma, nd, z.dist(y)).powf(p);
            f / gap_mix.pdf(&z)
        });
        total = add_estimates(total, gap);
    }
    check_variance(&total, params.variance_cap)?;
    Ok(total)
}

/// Robin-type function `tau_tilde(ξ) = H̃(ξ, ξ)`.
pub fn tau_tilde(
    domain: &DomainSpec,
    pair: &CriticalPair,
    xi: &Point,
    params: &NonlinearGreenParams,
) -> Result<McEstimate> {
    h_tilde_mc(domain, pair, xi, xi, params)
}

/// Radial profile of `H̃(·, center)` on a centered ball, with the finite
/// part `tau0` at the origin.
#[derive(Debug, Clone)]
pub struct RadialHTilde {
    pub radius: f64,
    pub tau0: f64,
    pub r: Vec<f64>,
    pub h: Vec<f64>,
}

impl RadialHTilde {
    /// Linear interpolation; constant continuation at the endpoints.
    pub fn value_at(&self, r: f64) -> f64 {
        if r <= self.r[0] {
            return self.h[0];
        }
        if r >= *self.r.last().unwrap() {
            return *self.h.last().unwrap();
        }
        let mut lo = 0;
        let mut hi = self.r.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.r[mid] <= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (r - self.r[lo]) / (self.r[hi] - self.r[lo]);
        self.h[lo] * (1.0 - t) + self.h[hi] * t
    }
}

/// Independent ODE oracle for `tau_tilde` at the center of a ball.
///
/// With `G(r) = gamma (r^{2-N} - R^{2-N})` the radial problem reduces to
/// explicit quadratures once the whole-space profile
/// `gamma_tilde r^{2-(N-2)p}` is subtracted; the remainder
/// `rho = G^p - gamma^p r^{-(N-2)p}` is integrable, so the finite part at
/// the origin needs no cancellation-prone limit:
///
/// `tau0 = gamma_tilde R^{2-(N-2)p} - ∫_0^R t^{1-N} P(t) dt`,
/// `P(t) = ∫_0^t s^{N-1} rho(s) ds`,
/// `H̃(r) = tau0 + ∫_0^r t^{1-N} P(t) dt`.
pub fn tau_tilde_radial_oracle(
    pair: &CriticalPair,
    radius: f64,
    m_nodes: usize,
) -> Result<RadialHTilde> {
    check_value_regime(pair)?;
    let nd = pair.nd();
    let p = pair.p;
    let gamma = pair.gamma_n;
    let gamma_tilde = pair.gamma_tilde()?;

    // graded nodes t_j = R (j/m)^3 absorb the fractional powers at 0
    let m = m_nodes.max(1000);
    let node = |j: usize| radius * (j as f64 / m as f64).powi(3);
    let rho = |t: f64| -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let x = (t / radius).powf(nd - 2.0);
        // (1-x)^p - 1 evaluated without cancellation for small x
        let factor = (p * (-x).ln_1p()).exp_m1();
        gamma.powf(p) * t.powf(-(nd - 2.0) * p) * factor
    };

    // P(t) = ∫_0^t s^{N-1} rho(s) ds, cumulative trapezoid
    let mut p_cum = vec![0.0f64; m + 1];
    let mut prev_val = 0.0;
    let mut prev_t = 0.0;
    for j in 1..=m {
        let t = node(j);
        let val = t.powf(nd - 1.0) * rho(t);
        p_cum[j] = p_cum[j - 1] + 0.5 * (val + prev_val) * (t - prev_t);
        prev_val = val;
        prev_t = t;
    }

    // Q(r) = ∫_0^r t^{1-N} P(t) dt
    let mut q_cum = vec![0.0f64; m + 1];
    let mut prev_val = 0.0;
    let mut prev_t = 0.0;
    for j in 1..=m {
        let t = node(j);
        let val = t.powf(1.0 - nd) * p_cum[j];
        q_cum[j] = q_cum[j - 1] + 0.5 * (val + prev_val) * (t - prev_t);
        prev_val = val;
        prev_t = t;
    }

    let tau0 = gamma_tilde * radius.powf(2.0 - (nd - 2.0) * p) - q_cum[m];
    if !tau0.is_finite() {
        return Err(Error::Quadrature("finite-part extraction returned non-finite value".into()));
    }
    let r: Vec<f64> = (0..=m).map(node).collect();
    let h: Vec<f64> = (0..=m).map(|j| tau0 + q_cum[j]).collect();
    Ok(RadialHTilde { radius, tau0, r, h })
}

/// Gradient of `tau_tilde` via `∇τ̃(ξ) = (p+1) ∇_x H̃(x,ξ)|_{x=ξ}`, with
/// the differentiated representation formula (balls; the ball is the
/// only domain with closed-form `∇_x H`).
pub fn grad_tau(
    domain: &DomainSpec,
    pair: &CriticalPair,
    xi: &Point,
    params: &NonlinearGreenParams,
) -> Result<Vec<McEstimate>> {
    check_gradient_regime(pair)?;
    domain.require_interior(xi, "gradient probe")?;
    let ball = match domain {
        DomainSpec::Ball(b) => b,
        _ => {
            return Err(Error::Regime(
                "gradient integrands need the closed-form ball Green function".into(),
            ))
        }
    };
    let interior = interior_grad_x(ball, pair, xi, params, 11)?;
    let exterior = exterior_grad_x(ball, pair, xi, params, 12);
    Ok((0..ball.center.dim())
        .map(|k| add_estimates(interior[k], exterior[k]).scale(pair.p + 1.0))
        .collect())
}

/// Interior part of `∇_x H̃(x,ξ)|_{x=ξ}` on a ball.
fn interior_grad_x(
    ball: &Ball,
    pair: &CriticalPair,
    xi: &Point,
    params: &NonlinearGreenParams,
    tag: u64,
) -> Result<Vec<McEstimate>> {
    let nd = pair.nd();
    let dim = ball.center.dim();
    let gamma = pair.gamma_n;
    let p = pair.p;
    let sing = nd - 1.0 + (nd - 2.0) * (p - 1.0);
    let mix = IsMixture::uniform(ball.clone())
        .with_component(*xi, sing, 0.5)
        .with_component(*xi, (nd - 2.0) * p, 0.2)
        .build();
    let xi_c = *xi;
    let ball_c = ball.clone();
    Ok(mc::estimate_many(params.sub_seed(tag), params.n_interior, dim, move |rng, out| {
        let z = mix.sample(rng);
        if !ball_c.contains(&z) {
            return;
        }
        let dxz = xi_c.sub(&z);
        let dist = dxz.norm();
        if dist < 1e-14 {
            return;
        }
        let g = ball_green(gamma, &ball_c, &z, &xi_c).unwrap_or(0.0);
        let kernel = (nd - 2.0) * gamma * dist.powf(-nd);
        let bracket = g.powf(p) - newtonian(gamma, nd, dist).powf(p);
        let grad_h = ball_robin_h_grad_x(gamma, &ball_c, &xi_c, &z);
        let w = 1.0 / mix.pdf(&z);
        for k in 0..out.len() {
            out[k] = (kernel * dxz.coord(k) * bracket + grad_h.coord(k) * g.powf(p)) * w;
        }
    }))
}

/// Exterior part of `∇_x H̃(x,ξ)|_{x=ξ}` on a ball. The same expression
/// is the exterior part of `∇_y H̃(ξ,y)|_{y=ξ}/p`, so it drops out of the
/// symmetry residual.
fn exterior_grad_x(
    ball: &Ball,
    pair: &CriticalPair,
    xi: &Point,
    params: &NonlinearGreenParams,
    tag: u64,
) -> Vec<McEstimate> {
    let nd = pair.nd();
    let dim = ball.center.dim();
    let gamma = pair.gamma_n;
    let p = pair.p;
    let ext_mix = IsMixture::uniform(ball.clone())
        .with_component(ball.center, (2.0 * nd - (nd - 1.0 + (nd - 2.0) * p)).max(0.0), 2.0)
        .build();
    let ball_c = ball.clone();
    let xi_c = *xi;
    mc::estimate_many(params.sub_seed(tag), params.n_exterior, dim, move |rng, out| {
        let w = ext_mix.sample(rng);
        let (z, jac) = invert_exterior(&ball_c, &w);
        let dxz = xi_c.sub(&z);
        let dist = dxz.norm();
        let pref = -(nd - 2.0) * gamma.powf(p + 1.0) * dist.powf(-nd - (nd - 2.0) * p);
        let wgt = jac / ext_mix.pdf(&w);
        for k in 0..out.len() {
            out[k] = pref * dxz.coord(k) * wgt;
        }
    })
}

/// Residual and scale of the symmetry identity
/// `p ∇_x H̃(x,ξ)|_{x=ξ} = ∇_y H̃(ξ,y)|_{y=ξ}`.
pub struct SymmetryReport {
    /// `p ∇_x H̃ - ∇_y H̃` per component.
    pub residual: Vec<McEstimate>,
    /// `∇_x H̃` per component, for normalization.
    pub grad_x: Vec<McEstimate>,
}

/// Estimate both sides of the identity through genuinely different
/// routes and return the componentwise difference `p ∇_x H̃ - ∇_y H̃`.
/// On balls the x-gradient uses the differentiated kernel representation
/// and the y-gradient is recovered from diagonal difference quotients;
/// on dumbbells both sides fall back to central differences of `H̃`.
pub fn symmetry_residual(
    domain: &DomainSpec,
    pair: &CriticalPair,
    xi: &Point,
    params: &NonlinearGreenParams,
) -> Result<SymmetryReport> {
    check_gradient_regime(pair)?;
    domain.require_interior(xi, "symmetry probe")?;
    match domain {
        DomainSpec::Ball(ball) => symmetry_residual_ball(ball, pair, xi, params),
        DomainSpec::Dumbbell { .. } => symmetry_residual_fd(domain, pair, xi, params),
    }
}

/// When both gradient representations are written with the same
/// closed-form (symmetric) `H`, their integrands coincide term by term
/// at the diagonal — that is precisely how the identity is proved — so
/// subtracting them samplewise would verify nothing. The contentful
/// numerical form uses the chain rule on the diagonal,
/// `∇τ̃ = ∇_x H̃ + ∇_y H̃`, which turns the identity into
/// `(p+1) ∇_x H̃ = ∇τ̃`: the left side comes from the differentiated
/// kernel route, the right side from difference quotients of independent
/// `tau_tilde` values.
fn symmetry_residual_ball(
    ball: &Ball,
    pair: &CriticalPair,
    xi: &Point,
    params: &NonlinearGreenParams,
) -> Result<SymmetryReport> {
    let dim = ball.center.dim();
    let interior = interior_grad_x(ball, pair, xi, params, 21)?;
    let ext = exterior_grad_x(ball, pair, xi, params, 22);
    let grad_x: Vec<McEstimate> =
        (0..dim).map(|k| add_estimates(interior[k], ext[k])).collect();
    let fd_h = 0.05 * (ball.radius - xi.dist(&ball.center)).min(ball.radius * 0.5);
    let mut residual = Vec::with_capacity(dim);
    for k in 0..dim {
        let diag = diagonal_derivative(ball, pair, xi, k, fd_h, params)?;
        // p grad_x - grad_y = (p+1) grad_x - dtau/dksi_k
        residual.push(grad_x[k].scale(pair.p + 1.0).sub_independent(&diag));
    }
    Ok(SymmetryReport { residual, grad_x })
}

/// Difference quotient of `tau_tilde` in coordinate `k` with common
/// random numbers: both diagonal values are evaluated on the same
/// samples, so the quotient's standard error comes out of the batch
/// means directly.
fn diagonal_derivative(
    ball: &Ball,
    pair: &CriticalPair,
    xi: &Point,
    k: usize,
    fd_h: f64,
    params: &NonlinearGreenParams,
) -> Result<McEstimate> {
    let nd = pair.nd();
    let gamma = pair.gamma_n;
    let p = pair.p;
    let mut xp = *xi;
    xp.set_coord(k, xi.coord(k) + fd_h);
    let mut xm = *xi;
    xm.set_coord(k, xi.coord(k) - fd_h);
    if !ball.contains(&xp) || !ball.contains(&xm) {
        return Err(Error::Outside("difference-quotient stencil left the domain".into()));
    }
    let mix = IsMixture::uniform(ball.clone())
        .with_component(xp, (nd - 2.0) * p, 0.3)
        .with_component(xm, (nd - 2.0) * p, 0.3)
        .build();
    let ball_c = ball.clone();
    let diag = move |pt: &Point, z: &Point| -> f64 {
        let dist = pt.dist(z);
        if dist < 1e-14 {
            return 0.0;
        }
        let newt = newtonian(gamma, nd, dist);
        let g = ball_green(gamma, &ball_c, z, pt).unwrap_or(0.0);
        newt.powf(p + 1.0) - g.powf(p + 1.0)
    };
    let interior = mc::estimate(params.sub_seed(0x40 + k as u64), params.n_interior, {
        let mix = mix.clone();
        let ball_c = ball.clone();
        move |rng| {
            let z = mix.sample(rng);
            if !ball_c.contains(&z) {
                return 0.0;
            }
            (diag(&xp, &z) - diag(&xm, &z)) / (2.0 * fd_h * mix.pdf(&z))
        }
    });
    // exterior part of the difference quotient
    let ext_exp = 2.0 * nd - (nd - 2.0) * (p + 1.0);
    let ext_mix = IsMixture::uniform(ball.clone())
        .with_component(ball.center, ext_exp.max(0.0), 2.0)
        .build();
    let ball_c = ball.clone();
    let exterior = mc::estimate(params.sub_seed(0x60 + k as u64), params.n_exterior, move |rng| {
        let w = ext_mix.sample(rng);
        let (z, jac) = invert_exterior(&ball_c, &w);
        let fp = newtonian(gamma, nd, xp.dist(&z)).powf(p + 1.0);
        let fm = newtonian(gamma, nd, xm.dist(&z)).powf(p + 1.0);
        (fp - fm) / (2.0 * fd_h) * jac / ext_mix.pdf(&w)
    });
    Ok(add_estimates(interior, exterior))
}

/// Central-difference fallback for domains without closed-form `∇H`.
fn symmetry_residual_fd(
    domain: &DomainSpec,
    pair: &CriticalPair,
    xi: &Point,
    params: &NonlinearGreenParams,
) -> Result<SymmetryReport> {
    let dim = domain.dim();
    let h = 0.02 * domain.bounding_ball().radius;
    let mut residual = Vec::with_capacity(dim);
    let mut grad_x = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut xp = *xi;
        xp.set_coord(k, xi.coord(k) + h);
        let mut xm = *xi;
        xm.set_coord(k, xi.coord(k) - h);
        let hp_x = h_tilde_mc(domain, pair, &xp, xi, params)?;
        let hm_x = h_tilde_mc(domain, pair, &xm, xi, params)?;
        let hp_y = h_tilde_mc(domain, pair, xi, &xp, params)?;
        let hm_y = h_tilde_mc(domain, pair, xi, &xm, params)?;
        let gx = hp_x.sub_independent(&hm_x).scale(1.0 / (2.0 * h));
        let gy = hp_y.sub_independent(&hm_y).scale(1.0 / (2.0 * h));
        residual.push(gx.scale(pair.p).sub_independent(&gy));
        grad_x.push(gx);
    }
    Ok(SymmetryReport { residual, grad_x })
}

/// Spike configuration `(d, ξ, λ)` with admissibility bounds.
#[derive(Debug, Clone)]
pub struct SpikeConfig {
    pub d: Vec<f64>,
    pub xi: Vec<Point>,
    pub lambda: Vec<f64>,
    pub delta1: f64,
    pub delta2: f64,
}

impl SpikeConfig {
    /// Positive spikes with default bounds `delta1 = 0.1`,
    /// `delta2 = 0.1 * diameter`.
    pub fn positive(d: Vec<f64>, xi: Vec<Point>, domain: &DomainSpec) -> Self {
        let k = d.len();
        SpikeConfig { d, xi, lambda: vec![1.0; k], delta1: 0.1, delta2: 0.1 * domain.diameter() }
    }

    pub fn k(&self) -> usize {
        self.d.len()
    }

    /// Membership in the admissible set: heights in `(delta1, 1/delta1)`,
    /// boundary distances and pairwise separations at least `delta2`.
    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        let k = self.k();
        if k == 0 || self.xi.len() != k || self.lambda.len() != k {
            return Err(Error::Config("configuration arrays must share a positive length".into()));
        }
        for &d in &self.d {
            if !(d > self.delta1 && d < 1.0 / self.delta1) {
                return Err(Error::Config(format!(
                    "height {d} outside ({}, {})",
                    self.delta1,
                    1.0 / self.delta1
                )));
            }
        }
        for xi in &self.xi {
            if domain.signed_dist(xi) < self.delta2 {
                return Err(Error::Config("spike too close to the boundary".into()));
            }
        }
        for i in 0..k {
            for j in 0..i {
                if self.xi[i].dist(&self.xi[j]) < self.delta2 {
                    return Err(Error::Config("spikes too close to each other".into()));
                }
            }
        }
        for &l in &self.lambda {
            if l != 1.0 && l != -1.0 {
                return Err(Error::Config("spike signs must be +1 or -1".into()));
            }
        }
        Ok(())
    }
}

/// Regular part of the configuration field,
/// `H̃_{d,ξ}(x) = Σ_i λ_i d_i^{Np/(q+1)} γ̃ |x-ξ_i|^{2-(N-2)p} - G̃_{d,ξ}(x)`
/// with `G̃_{d,ξ}` the Dirichlet solve against
/// `|Σ_i λ_i d_i^{N/(q+1)} G(·,ξ_i)|^{p-1} (Σ ...)`.
///
/// The singular superposition is the whole-space potential of
/// `Σ_i spow(c_i, p) Γ^p(·-ξ_i)` with `c_i = λ_i d_i^{N/(q+1)}`, so the
/// whole field is one difference integral plus an exterior term — the
/// same cancellation-free structure as the two-point formula. Computing
/// `G̃` on its own and subtracting afterwards would lose several digits
/// to cancellation near the spikes.
pub fn h_tilde_config(
    domain: &DomainSpec,
    pair: &CriticalPair,
    config: &SpikeConfig,
    x: &Point,
    params: &NonlinearGreenParams,
) -> Result<McEstimate> {
    check_value_regime(pair)?;
    config.validate(domain)?;
    domain.require_interior(x, "evaluation point")?;
    let nd = pair.nd();
    let gamma = pair.gamma_n;
    let p = pair.p;
    let coef: Vec<f64> = config
        .d
        .iter()
        .zip(&config.lambda)
        .map(|(d, l)| l * d.powf(pair.u_scale_exponent()))
        .collect();
    let coef_p: Vec<f64> = coef.iter().map(|c| crate::bubble::spow(*c, p)).collect();

    // linear superposition of whole-space spike profiles
    let targets = config.xi.clone();
    let superposed = {
        let targets = targets.clone();
        let coef_p = coef_p.clone();
        move |z: &Point| -> f64 {
            let mut s = 0.0;
            for (cp, xi) in coef_p.iter().zip(&targets) {
                let dist = z.dist(xi);
                if dist < 1e-14 {
                    return f64::INFINITY;
                }
                s += cp * newtonian(gamma, nd, dist).powf(p);
            }
            s
        }
    };

    let cover = domain.bounding_ball();
    let mut mix = IsMixture::uniform(cover.clone()).with_component(*x, nd - 2.0, 0.4);
    for xi in &config.xi {
        if xi.dist(x) > 1e-12 {
            mix = mix.with_component(*xi, (nd - 2.0) * p, 0.4 / config.k() as f64);
        } else {
            mix = mix.with_component(*xi, (nd - 2.0) * p, 0.2);
        }
    }
    let mix = mix.build();
    let pg = PointGreen::new(domain, gamma, params);
    let interior = mc::estimate(params.sub_seed(31), params.n_interior, {
        let superposed = superposed.clone();
        let targets = targets.clone();
        let coef = coef.clone();
        let pg = &pg;
        move |rng| {
            let z = mix.sample(rng);
            if !domain.contains(&z) {
                return 0.0;
            }
            let s = superposed(&z);
            if !s.is_finite() {
                return 0.0;
            }
            let mut greens = [0.0f64; 8];
            pg.greens_multi(&z, &targets, rng, &mut greens[..targets.len()]);
            let mut sum = 0.0;
            for (i, g) in greens[..targets.len()].iter().enumerate() {
                sum += coef[i] * g;
            }
            let g_xz = pg.green_single(&z, x, rng);
            (newtonian(gamma, nd, x.dist(&z)) * s - g_xz * crate::bubble::spow(sum, p))
                / mix.pdf(&z)
        }
    });

    // exterior of the cover ball by inversion
    let ext_exp = 2.0 * nd - (nd - 2.0) * (p + 1.0);
    let ext_mix = IsMixture::uniform(cover.clone())
        .with_component(cover.center, ext_exp.max(0.0), 2.0)
        .build();
    let far = mc::estimate(params.sub_seed(32), params.n_exterior, {
        let superposed = superposed.clone();
        let ext_mix = &ext_mix;
        let cover = &cover;
        move |rng| {
            let w = ext_mix.sample(rng);
            let (z, jac) = invert_exterior(&cover, &w);
            newtonian(gamma, nd, x.dist(&z)) * superposed(&z) * jac / ext_mix.pdf(&w)
        }
    });
    let mut total = add_estimates(interior, far);
    if !matches!(domain, DomainSpec::Ball(_)) {
        let gap_mix = IsMixture::uniform(cover.clone()).build();
        let gap = mc::estimate(params.sub_seed(33), params.n_exterior, |rng| {
            let z = gap_mix.sample(rng);
            if domain.contains(&z) {
                return 0.0;
            }
            newtonian(gamma, nd, x.dist(&z)) * superposed(&z) / gap_mix.pdf(&z)
        });
        total = add_estimates(total, gap);
    }
    check_variance(&total, params.variance_cap)?;
    Ok(total)
}

/// One row of the boundary-growth table.
#[derive(Debug, Clone)]
pub struct BoundaryGrowthRow {
    pub dist: f64,
    pub tau: McEstimate,
    pub radial_derivative: McEstimate,
}

/// Report of the boundary-growth probe.
#[derive(Debug, Clone)]
pub struct BoundaryGrowthReport {
    pub rows: Vec<BoundaryGrowthRow>,
    /// Fitted log-log slope of the outward derivative vs boundary distance.
    pub derivative_slope: f64,
    /// The growth-bound exponent `1 - (N-2)p`.
    pub predicted: f64,
    pub tau_monotone: bool,
}

/// Probe `tau_tilde` and its outward radial derivative along the first
/// coordinate ray of a centered ball at the given boundary distances.
pub fn boundary_growth_probe(
    ball_domain: &DomainSpec,
    pair: &CriticalPair,
    dists: &[f64],
    params: &NonlinearGreenParams,
) -> Result<BoundaryGrowthReport> {
    check_gradient_regime(pair)?;
    let ball = match ball_domain {
        DomainSpec::Ball(b) => b,
        _ => return Err(Error::Regime("boundary growth probe runs on balls".into())),
    };
    let mut rows = Vec::new();
    for (j, &dist) in dists.iter().enumerate() {
        if !(dist >= 0.05 * ball.radius && dist <= 0.5 * ball.radius) {
            return Err(Error::Regime("probe distances must lie in [0.05 R, 0.5 R]".into()));
        }
        let xi = ball.center.axpy(ball.radius - dist, &Point::axis(ball.center.dim(), 1.0));
        let sub = NonlinearGreenParams {
            seed: crate::mc::derive_stream_seed(params.seed, 0xB0 + j as u64),
            ..*params
        };
        let tau = tau_tilde(ball_domain, pair, &xi, &sub)?;
        let grad = grad_tau(ball_domain, pair, &xi, &sub)?;
        rows.push(BoundaryGrowthRow { dist, tau, radial_derivative: grad[0] });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in &rows {
        if row.radial_derivative.value > 0.0 {
            xs.push(row.dist.ln());
            ys.push(row.radial_derivative.value.ln());
        }
    }
    let m = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let derivative_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| b.dist.total_cmp(&a.dist));
    let tau_monotone = sorted.windows(2).all(|w| {
        let slack = 3.0 * (w[0].tau.std_error + w[1].tau.std_error);
        w[1].tau.value + slack > w[0].tau.value
    });
    Ok(BoundaryGrowthReport {
        rows,
        derivative_slope,
        predicted: 1.0 - (pair.nd() - 2.0) * pair.p,
        tau_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair8() -> CriticalPair {
        CriticalPair::new(8, 1.1).unwrap()
    }

    fn quick_params(seed: u64) -> NonlinearGreenParams {
        NonlinearGreenParams::new(60_000, 30_000, seed)
    }

    #[test]
    fn radial_oracle_refinement_and_scaling() {
        let pair = pair8();
        let a = tau_tilde_radial_oracle(&pair, 1.0, 20_000).unwrap();
        let b = tau_tilde_radial_oracle(&pair, 1.0, 40_000).unwrap();
        assert!((a.tau0 - b.tau0).abs() / b.tau0 < 1e-3, "{} vs {}", a.tau0, b.tau0);
        // dilation law: tau(R) = R^{2-(N-2)p} tau(1)
        let c = tau_tilde_radial_oracle(&pair, 2.0, 20_000).unwrap();
        let predicted = a.tau0 * 2.0f64.powf(2.0 - 6.0 * 1.1);
        assert!((c.tau0 - predicted).abs() / predicted < 1e-3);
        assert!(a.tau0 > 0.0);
    }

    #[test]
    fn radial_oracle_matches_bilaplacian_at_p_one() {
        // p = 1: the nonlinear Green function becomes the Navier
        // bi-Laplacian Green function; at the ball center
        // tau0 = gamma_N (N-2) / (N (N-4)) R^{4-N}
        let pair = CriticalPair::new(8, 1.0).unwrap();
        let oracle = tau_tilde_radial_oracle(&pair, 1.0, 30_000).unwrap();
        let exact = pair.gamma_n * 6.0 / 32.0;
        assert!((oracle.tau0 - exact).abs() / exact < 1e-6, "{} vs {exact}", oracle.tau0);
    }

    #[test]
    fn tau_tilde_mc_matches_radial_oracle() {
        let pair = pair8();
        let domain = DomainSpec::unit_ball(8);
        let oracle = tau_tilde_radial_oracle(&pair, 1.0, 20_000).unwrap();
        let est = tau_tilde(&domain, &pair, &Point::zeros(8), &quick_params(40)).unwrap();
        assert!(
            (est.value - oracle.tau0).abs() < 3.0 * est.std_error,
            "mc {} +- {} vs oracle {}",
            est.value,
            est.std_error,
            oracle.tau0
        );
        assert!(est.value > 3.0 * est.std_error, "tau must be positive at 3 sigma");
    }

    #[test]
    fn tau_tilde_rotational_symmetry() {
        let pair = pair8();
        let domain = DomainSpec::unit_ball(8);
        let a = tau_tilde(&domain, &pair, &Point::axis(8, 0.4), &quick_params(41)).unwrap();
        let mut probe = Point::zeros(8);
        probe.set_coord(3, 0.4);
        let b = tau_tilde(&domain, &pair, &probe, &quick_params(42)).unwrap();
        let sigma = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.value - b.value).abs() < 3.0 * sigma);
    }

    #[test]
    fn h_tilde_positive_and_radius_decreasing() {
        let pair = pair8();
        let x = Point::axis(8, 0.2);
        let y = Point::axis(8, -0.3);
        let small = DomainSpec::ball(Point::zeros(8), 1.0);
        let big = DomainSpec::ball(Point::zeros(8), 2.0);
        let a = h_tilde_mc(&small, &pair, &x, &y, &quick_params(43)).unwrap();
        let b = h_tilde_mc(&big, &pair, &x, &y, &quick_params(44)).unwrap();
        assert!(a.value > 3.0 * a.std_error);
        assert!(b.value > 0.0);
        assert!(b.value < a.value, "regular part shrinks as the domain grows");
    }

    #[test]
    fn grad_tau_zero_at_center_and_outward_off_center() {
        let pair = pair8();
        let domain = DomainSpec::unit_ball(8);
        let at_center = grad_tau(&domain, &pair, &Point::zeros(8), &quick_params(45)).unwrap();
        for comp in &at_center {
            assert!(comp.value.abs() <= 3.0 * comp.std_error.max(1e-12));
        }
        let probe = Point::axis(8, 0.5);
        let off = grad_tau(&domain, &pair, &probe, &quick_params(46)).unwrap();
        assert!(off[0].value > 3.0 * off[0].std_error, "outward derivative must be positive");
    }

    #[test]
    fn grad_tau_matches_central_differences() {
        let pair = pair8();
        let domain = DomainSpec::unit_ball(8);
        let probe = Point::axis(8, 0.4);
        let grad = grad_tau(&domain, &pair, &probe, &quick_params(47)).unwrap();
        let h = 0.02;
        let tp = tau_tilde(&domain, &pair, &Point::axis(8, 0.4 + h), &quick_params(48)).unwrap();
        let tm = tau_tilde(&domain, &pair, &Point::axis(8, 0.4 - h), &quick_params(49)).unwrap();
        let fd = tp.sub_independent(&tm).scale(1.0 / (2.0 * h));
        let sigma = (grad[0].std_error.powi(2) + fd.std_error.powi(2)).sqrt();
        assert!(
            (grad[0].value - fd.value).abs() < 3.0 * sigma + 0.05 * grad[0].value.abs(),
            "{} vs fd {} (sigma {})",
            grad[0].value,
            fd.value,
            sigma
        );
    }

    #[test]
    fn symmetry_identity_on_ball() {
        let pair = pair8();
        let domain = DomainSpec::unit_ball(8);
        let report =
            symmetry_residual(&domain, &pair, &Point::axis(8, 0.45), &quick_params(50)).unwrap();
        let grad_norm: f64 = report.grad_x.iter().map(|g| g.value * g.value).sum::<f64>().sqrt();
        for comp in &report.residual {
            assert!(
                comp.value.abs() <= 3.0 * comp.std_error + 1e-3 * grad_norm,
                "residual {} +- {}",
                comp.value,
                comp.std_error
            );
        }
        // at the center both sides vanish
        let center =
            symmetry_residual(&domain, &pair, &Point::zeros(8), &quick_params(51)).unwrap();
        for comp in &center.residual {
            assert!(comp.value.abs() <= 3.0 * comp.std_error.max(1e-12));
        }
    }

    #[test]
    fn config_field_scales_like_single_spike() {
        let pair = pair8();
        let domain = DomainSpec::unit_ball(8);
        let x = Point::axis(8, 0.35);
        let xi = Point::zeros(8);
        let single = h_tilde_mc(&domain, &pair, &x, &xi, &quick_params(52)).unwrap();
        let config = SpikeConfig::positive(vec![1.7], vec![xi], &domain);
        let field = h_tilde_config(&domain, &pair, &config, &x, &quick_params(53)).unwrap();
        let scale = 1.7f64.powf(pair.np_over_q1());
        let sigma = (field.std_error.powi(2) + (scale * single.std_error).powi(2)).sqrt();
        assert!(
            (field.value - scale * single.value).abs() < 3.0 * sigma,
            "{} vs {}",
            field.value,
            scale * single.value
        );
    }

    #[test]
    fn config_field_linear_superposition_at_p_one() {
        let pair = CriticalPair::new(8, 1.0).unwrap();
        let domain = DomainSpec::unit_ball(8);
        let xi1 = Point::axis(8, 0.4);
        let xi2 = Point::axis(8, -0.4);
        let x = Point::axis(8, 0.1);
        let config = SpikeConfig::positive(vec![1.3, 0.6], vec![xi1, xi2], &domain);
        let both = h_tilde_config(&domain, &pair, &config, &x, &quick_params(54)).unwrap();
        let one = h_tilde_mc(&domain, &pair, &x, &xi1, &quick_params(55)).unwrap();
        let two = h_tilde_mc(&domain, &pair, &x, &xi2, &quick_params(56)).unwrap();
        let u_scale = pair.u_scale_exponent();
        let lin = 1.3f64.powf(u_scale) * one.value + 0.6f64.powf(u_scale) * two.value;
        let sigma = (both.std_error.powi(2)
            + (1.3f64.powf(u_scale) * one.std_error).powi(2)
            + (0.6f64.powf(u_scale) * two.std_error).powi(2))
        .sqrt();
        assert!((both.value - lin).abs() < 3.0 * sigma, "{} vs {}", both.value, lin);
    }

    #[test]
    fn config_validation_rejects_bad_configs() {
        let domain = DomainSpec::unit_ball(8);
        let mut config = SpikeConfig::positive(vec![1.0], vec![Point::axis(8, 0.95)], &domain);
        assert!(config.validate(&domain).is_err(), "boundary margin");
        config.xi[0] = Point::zeros(8);
        config.d[0] = 50.0;
        assert!(config.validate(&domain).is_err(), "height bound");
    }

    #[test]
    fn far_separated_points_small_positive() {
        let pair = pair8();
        let x = Point::axis(8, 0.8);
        let y = Point::axis(8, -0.8);
        let domain = DomainSpec::ball(Point::zeros(8), 1.2);
        let est = h_tilde_mc(&domain, &pair, &x, &y, &quick_params(57)).unwrap();
        let near =
            h_tilde_mc(&domain, &pair, &Point::axis(8, 0.1), &Point::zeros(8), &quick_params(58))
                .unwrap();
        assert!(est.value > 0.0);
        assert!(est.value < near.value);
    }
}
