//! Dirichlet Green's function `G` of `-Δ` and its regular part `H`:
//! closed-form image formulas on balls, walk-on-spheres estimation on
//! dumbbells, and the neck-limit convergence probe.

use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::geom::{Ball, DomainSpec, Point};
use crate::mc::{self, McEstimate};
use crate::Result;

/// Walk-on-spheres controls. `shell_rel` is the terminal shell thickness
/// relative to the domain diameter; bias is O(shell), far below the
/// statistical error at the default sample sizes.
#[derive(Debug, Clone, Copy)]
pub struct WosParams {
    pub n_walks: u64,
    pub shell_rel: f64,
    pub max_steps: usize,
    pub seed: u64,
}

impl WosParams {
    pub fn new(n_walks: u64, seed: u64) -> Self {
        WosParams { n_walks, shell_rel: 1e-5, max_steps: 100_000, seed }
    }

    pub fn shell(&self, domain: &DomainSpec) -> f64 {
        self.shell_rel * domain.diameter()
    }
}

/// Standard normal via Box-Muller (pair-at-a-time, deterministic).
fn normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    use rand::Rng;
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = 2.0 * std::f64::consts::PI * u2;
    (r * t.cos(), r * t.sin())
}

/// Uniform direction on the unit sphere of `R^dim`.
pub fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Point {
    let mut p = Point::zeros(dim);
    let mut i = 0;
    while i < dim {
        let (a, b) = normal_pair(rng);
        p.set_coord(i, a);
        if i + 1 < dim {
            p.set_coord(i + 1, b);
        }
        i += 2;
    }
    let n = p.norm();
    if n == 0.0 {
        // astronomically unlikely; retry keeps the sampler total
        return random_direction(rng, dim);
    }
    p.scale(1.0 / n)
}

/// Fundamental solution `gamma_N d^{2-N}` evaluated from a distance.
pub fn newtonian(gamma_n: f64, nd: f64, dist: f64) -> f64 {
    gamma_n * dist.powf(2.0 - nd)
}

/// Closed-form regular part on a ball, symmetric in `(x, y)`:
/// `H(x,y) = gamma_N R^{N-2} (|x-c|^2 |y-c|^2 - 2 R^2 (x-c)·(y-c) + R^4)^{-(N-2)/2}`.
pub fn ball_robin_h(gamma_n: f64, ball: &Ball, x: &Point, y: &Point) -> f64 {
    let nd = x.dim() as f64;
    let dx = x.sub(&ball.center);
    let dy = y.sub(&ball.center);
    let r2 = ball.radius * ball.radius;
    let d = dx.norm2() * dy.norm2() - 2.0 * r2 * dx.dot(&dy) + r2 * r2;
    gamma_n * ball.radius.powf(nd - 2.0) * d.powf(-(nd - 2.0) / 2.0)
}

/// `∇_x H(x,y)` on a ball, from the closed form above.
pub fn ball_robin_h_grad_x(gamma_n: f64, ball: &Ball, x: &Point, y: &Point) -> Point {
    let nd = x.dim() as f64;
    let dx = x.sub(&ball.center);
    let dy = y.sub(&ball.center);
    let r2 = ball.radius * ball.radius;
    let d = dx.norm2() * dy.norm2() - 2.0 * r2 * dx.dot(&dy) + r2 * r2;
    let pref = gamma_n * ball.radius.powf(nd - 2.0) * (-(nd - 2.0) / 2.0) * d.powf(-nd / 2.0);
    // ∇_x D = 2 |y-c|^2 (x-c) - 2 R^2 (y-c)
    dx.scale(2.0 * dy.norm2()).axpy(-2.0 * r2, &dy).scale(pref)
}

/// Closed-form Green's function on a ball.
pub fn ball_green(gamma_n: f64, ball: &Ball, x: &Point, y: &Point) -> Result<f64> {
    if !ball.contains(x) || !ball.contains(y) {
        return Err(Error::Outside("Green evaluation point".into()));
    }
    let d = x.dist(y);
    if d == 0.0 {
        return Err(Error::Degenerate("Green function on the diagonal".into()));
    }
    let nd = x.dim() as f64;
    Ok(newtonian(gamma_n, nd, d) - ball_robin_h(gamma_n, ball, x, y))
}

/// One walk-on-spheres trajectory; returns the boundary exit point.
pub fn wos_exit(
    domain: &DomainSpec,
    start: &Point,
    shell: f64,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Point> {
    let mut x = *start;
    for _ in 0..max_steps {
        let d = domain.signed_dist(&x);
        if d <= shell {
            return Ok(domain.project_boundary(&x));
        }
        let dir = random_direction(rng, x.dim());
        x = x.axpy(d, &dir);
        debug_assert!(domain.signed_dist(&x) > -shell);
    }
    Err(Error::MaxSteps(max_steps))
}

/// Estimate the harmonic extension of `boundary_data` at `x` by
/// walk-on-spheres. Deterministic per-stream sub-seeds; bit-identical
/// results for any worker count.
pub fn wos_harmonic<F>(
    domain: &DomainSpec,
    x: &Point,
    boundary_data: F,
    params: &WosParams,
) -> Result<McEstimate>
where
    F: Fn(&Point) -> f64 + Sync + Send,
{
    domain.require_interior(x, "walk start")?;
    let shell = params.shell(domain);
    let overflow = std::sync::atomic::AtomicUsize::new(0);
    let est = mc::estimate(params.seed, params.n_walks, |rng| {
        match wos_exit(domain, x, shell, params.max_steps, rng) {
            Ok(exit) => boundary_data(&exit),
            Err(_) => {
                overflow.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                0.0
            }
        }
    });
    let lost = overflow.load(std::sync::atomic::Ordering::Relaxed);
    if lost > 0 {
        return Err(Error::MaxSteps(params.max_steps));
    }
    Ok(est)
}

/// Regular part `H(x,y)`: exact on balls (zero variance), estimated by
/// walk-on-spheres on dumbbells (the boundary data of `H(·,y)` is the
/// Newtonian kernel centered at `y`).
pub fn robin_h(
    domain: &DomainSpec,
    gamma_n: f64,
    x: &Point,
    y: &Point,
    params: &WosParams,
) -> Result<McEstimate> {
    domain.require_interior(x, "first argument")?;
    domain.require_interior(y, "second argument")?;
    let nd = domain.dim() as f64;
    match domain {
        DomainSpec::Ball(b) => Ok(McEstimate::exact(ball_robin_h(gamma_n, b, x, y), params.seed)),
        DomainSpec::Dumbbell { .. } => {
            let yy = *y;
            wos_harmonic(domain, x, move |z| newtonian(gamma_n, nd, z.dist(&yy)), params)
        }
    }
}

/// Averages of `H(x, target_i)` for several targets sharing the same
/// walks from `x`; the workhorse of nested dumbbell estimates. The caller
/// supplies the generator, so this fits inside outer Monte Carlo loops.
#[allow(clippy::too_many_arguments)]
pub fn robin_h_multi_with_rng(
    domain: &DomainSpec,
    gamma_n: f64,
    x: &Point,
    targets: &[Point],
    m_walks: u64,
    shell: f64,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) -> Result<()> {
    let nd = domain.dim() as f64;
    out.iter_mut().for_each(|v| *v = 0.0);
    for _ in 0..m_walks {
        let exit = wos_exit(domain, x, shell, max_steps, rng)?;
        for (slot, t) in out.iter_mut().zip(targets) {
            *slot += newtonian(gamma_n, nd, exit.dist(t));
        }
    }
    out.iter_mut().for_each(|v| *v /= m_walks as f64);
    Ok(())
}

/// One row of the neck-limit table.
#[derive(Debug, Clone)]
pub struct NeckProbeRow {
    pub eta: f64,
    pub pair_index: usize,
    pub estimate: McEstimate,
}

/// Estimate `H^eta(x,y)` for each neck width and probe pair. For probe
/// pairs inside one lobe the estimates increase as the neck shrinks and
/// approach the single-lobe closed form.
pub fn neck_limit_check(
    dim: usize,
    gamma_n: f64,
    gap: f64,
    etas: &[f64],
    pairs: &[(Point, Point)],
    params: &WosParams,
) -> Result<Vec<NeckProbeRow>> {
    let mut rows = Vec::new();
    for &eta in etas {
        let domain = DomainSpec::two_lobe(dim, gap, eta)?;
        for (pair_index, (x, y)) in pairs.iter().enumerate() {
            let estimate = robin_h(&domain, gamma_n, x, y, params)?;
            rows.push(NeckProbeRow { eta, pair_index, estimate });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbola::CriticalPair;
    use rand::Rng;
    use rand::SeedableRng;

    fn gamma8() -> f64 {
        CriticalPair::new(8, 1.1).unwrap().gamma_n
    }

    #[test]
    fn ball_regular_part_examples() {
        let g8 = gamma8();
        let ball = Ball::unit(8);
        // center source: H(x, 0) = gamma_N for every x
        for r in [0.0, 0.3, 0.8, 0.99] {
            let x = Point::axis(8, r);
            assert!((ball_robin_h(g8, &ball, &x, &Point::zeros(8)) - g8).abs() < 1e-15);
        }
        assert!(
            (ball_robin_h(g8, &ball, &Point::zeros(8), &Point::zeros(8)) - 0.0051330).abs() < 1e-6
        );
    }

    #[test]
    fn green_symmetry_and_sign() {
        let g8 = gamma8();
        let ball = Ball::unit(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let mut draw = || {
                let dir = random_direction(&mut rng, 8);
                let r: f64 = rng.gen::<f64>().powf(1.0 / 8.0) * 0.999;
                dir.scale(r)
            };
            let x = draw();
            let y = draw();
            if x.dist(&y) < 1e-6 {
                continue;
            }
            let gxy = ball_green(g8, &ball, &x, &y).unwrap();
            let gyx = ball_green(g8, &ball, &y, &x).unwrap();
            assert!((gxy - gyx).abs() <= 1e-13 * gxy.abs().max(1.0));
            assert!(gxy > 0.0);
            assert!(gxy < newtonian(g8, 8.0, x.dist(&y)));
        }
        // boundary: G vanishes linearly as x approaches the sphere
        let y = Point::axis(8, 0.2);
        let g_near = ball_green(g8, &ball, &Point::axis(8, 1.0 - 1e-6), &y).unwrap();
        let g_far = ball_green(g8, &ball, &Point::axis(8, 1.0 - 2e-6), &y).unwrap();
        assert!(g_near > 0.0 && g_near < 1e-6);
        assert!((g_far / g_near - 2.0).abs() < 1e-3);
        assert!(ball_green(g8, &ball, &y, &y).is_err());
    }

    #[test]
    fn ball_grad_matches_finite_differences() {
        let g8 = gamma8();
        let ball = Ball::unit(8);
        let x = Point::from_slice(&[0.3, -0.2, 0.1, 0.0, 0.0, 0.4, 0.0, -0.1]);
        let y = Point::from_slice(&[-0.1, 0.25, 0.0, 0.2, 0.0, 0.0, 0.1, 0.0]);
        let grad = ball_robin_h_grad_x(g8, &ball, &x, &y);
        let h = 1e-6;
        for k in 0..8 {
            let mut xp = x;
            xp.set_coord(k, x.coord(k) + h);
            let mut xm = x;
            xm.set_coord(k, x.coord(k) - h);
            let fd =
                (ball_robin_h(g8, &ball, &xp, &y) - ball_robin_h(g8, &ball, &xm, &y)) / (2.0 * h);
            assert!((fd - grad.coord(k)).abs() < 1e-8, "component {k}: {fd} vs {}", grad.coord(k));
        }
    }

    #[test]
    fn wos_constant_data_is_exact() {
        let domain = DomainSpec::unit_ball(8);
        let params = WosParams::new(200, 9);
        let est = wos_harmonic(&domain, &Point::axis(8, 0.4), |_| 3.25, &params).unwrap();
        assert_eq!(est.value, 3.25);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn wos_linear_data_recovers_coordinate() {
        let domain = DomainSpec::unit_ball(8);
        let x = Point::axis(8, 0.35);
        let params = WosParams::new(40_000, 12);
        let est = wos_harmonic(&domain, &x, |z| z.coord(0), &params).unwrap();
        assert!(
            (est.value - 0.35).abs() < 3.0 * est.std_error,
            "{} +- {}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn wos_matches_closed_form_regular_part() {
        let g8 = gamma8();
        let domain = DomainSpec::unit_ball(8);
        let ball = Ball::unit(8);
        let x = Point::axis(8, 0.5);
        let mut y = Point::zeros(8);
        y.set_coord(1, 0.3);
        let params = WosParams::new(30_000, 21);
        let est =
            wos_harmonic(&domain, &x, |z| newtonian(g8, 8.0, z.dist(&y)), &params).unwrap();
        let exact = ball_robin_h(g8, &ball, &x, &y);
        assert!(
            (est.value - exact).abs() < 3.0 * est.std_error,
            "{} vs {exact} ({})",
            est.value,
            est.std_error
        );
        // center source really is the constant-data case
        let center = wos_harmonic(
            &domain,
            &x,
            |z| newtonian(g8, 8.0, z.dist(&Point::zeros(8))),
            &WosParams::new(500, 3),
        )
        .unwrap();
        assert!((center.value - g8).abs() < 1e-12 * g8);
    }

    #[test]
    fn wos_is_deterministic() {
        let domain = DomainSpec::two_lobe(6, 0.5, 0.15).unwrap();
        let x = Point::axis(6, 1.25);
        let params = WosParams::new(2_000, 77);
        let g6 = 1.0;
        let a = robin_h(&domain, g6, &x, &x, &params).unwrap();
        let b = robin_h(&domain, g6, &x, &x, &params).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn shell_halving_stays_within_noise() {
        let domain = DomainSpec::unit_ball(6);
        let x = Point::axis(6, 0.3);
        let g6 = CriticalPair::new(6, 1.15).unwrap().gamma_n;
        let data = |z: &Point| newtonian(g6, 6.0, z.dist(&Point::zeros(6)));
        let coarse = WosParams { shell_rel: 2e-5, ..WosParams::new(50_000, 31) };
        let fine = WosParams { shell_rel: 1e-5, ..WosParams::new(50_000, 32) };
        let a = wos_harmonic(&domain, &x, data, &coarse).unwrap();
        let b = wos_harmonic(&domain, &x, data, &fine).unwrap();
        assert!((a.value - b.value).abs() < a.std_error.max(b.std_error));
    }

    #[test]
    fn tiny_neck_approaches_single_lobe() {
        let g8 = gamma8();
        let domain = DomainSpec::two_lobe(8, 0.5, 1e-3).unwrap();
        // probes inside the right lobe, centered at +1.25 e1
        let lobe = Ball::new(Point::axis(8, 1.25), 1.0);
        let x = Point::axis(8, 1.05);
        let y = Point::axis(8, 1.45);
        let params = WosParams::new(30_000, 5);
        let est = robin_h(&domain, g8, &x, &y, &params).unwrap();
        let exact = ball_robin_h(g8, &lobe, &x, &y);
        assert!(
            (est.value - exact).abs() < 3.0 * est.std_error,
            "{} vs {} (sigma {})",
            est.value,
            exact,
            est.std_error
        );
        // positivity of G on the dumbbell: H < Newtonian kernel
        assert!(est.value < newtonian(g8, 8.0, x.dist(&y)));
    }

    #[test]
    fn neck_monotone_and_cross_lobe_decoupling() {
        let g6 = CriticalPair::new(6, 1.15).unwrap().gamma_n;
        let x = Point::axis(6, 1.05);
        let y = Point::axis(6, 1.45);
        let params = WosParams::new(25_000, 61);
        let rows = neck_limit_check(6, g6, 0.5, &[0.3, 0.1, 0.03], &[(x, y)], &params).unwrap();
        // H^eta increases as the neck shrinks (up to 3 sigma slack)
        for w in rows.windows(2) {
            let slack = 3.0 * (w[0].estimate.std_error + w[1].estimate.std_error);
            assert!(
                w[1].estimate.value + slack > w[0].estimate.value,
                "eta {} -> {}: {} vs {}",
                w[0].eta,
                w[1].eta,
                w[0].estimate.value,
                w[1].estimate.value
            );
        }
        // cross-lobe: G^eta -> 0, i.e. H approaches the Newtonian kernel
        let far = Point::axis(6, -1.25);
        let domain = DomainSpec::two_lobe(6, 0.5, 0.03).unwrap();
        let h = robin_h(&domain, g6, &far, &y, &params).unwrap();
        let newt = newtonian(g6, 6.0, far.dist(&y));
        let g = newt - h.value;
        assert!(g > 0.0, "Green function must stay positive");
        assert!(g < 0.05 * newt, "cross-lobe Green {} vs kernel {}", g, newt);
    }
}
