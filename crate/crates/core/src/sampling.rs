//! Importance sampling for singular integrals: power-law mixtures on
//! covering balls, and the Kelvin-type inversion that maps exterior
//! integrals onto a punctured ball with an explicit Jacobian.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::geom::{Ball, Point};
use crate::hyperbola::unit_sphere_area;

/// Volume of a ball of radius `r` in `R^n`.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    unit_sphere_area(n) * r.powf(n as f64) / n as f64
}

/// One power-law component: density proportional to
/// `|z - center|^{-exponent}` on `B(center, radius)`. Needs
/// `exponent < N` for normalizability.
#[derive(Debug, Clone)]
struct PowerComponent {
    center: Point,
    exponent: f64,
    radius: f64,
    /// Normalization constant of the unweighted density.
    norm: f64,
}

impl PowerComponent {
    fn new(n: usize, center: Point, exponent: f64, radius: f64) -> Self {
        let nd = n as f64;
        assert!(exponent < nd, "power component exponent must be below the dimension");
        let norm = unit_sphere_area(n) * radius.powf(nd - exponent) / (nd - exponent);
        PowerComponent { center, exponent, radius, norm }
    }

    fn pdf(&self, z: &Point) -> f64 {
        let d = z.dist(&self.center);
        if d >= self.radius || d == 0.0 {
            // the point mass at d == 0 has measure zero; returning 0 there
            // keeps pdf() total
            return if d == 0.0 { f64::INFINITY } else { 0.0 };
        }
        d.powf(-self.exponent) / self.norm
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        let nd = self.center.dim() as f64;
        let u: f64 = rng.gen();
        let r = self.radius * u.powf(1.0 / (nd - self.exponent));
        let dir = crate::green::random_direction(rng, self.center.dim());
        self.center.axpy(r, &dir)
    }
}

/// Mixture of a uniform density on a covering ball and any number of
/// power-law components. The uniform part guarantees strictly positive
/// density on the whole cover, so `f/pdf` estimators stay unbiased for
/// any integrand supported inside it.
#[derive(Debug, Clone)]
pub struct IsMixture {
    cover: Ball,
    cover_volume: f64,
    comps: Vec<PowerComponent>,
    /// First entry is the uniform weight; the rest align with `comps`.
    weights: Vec<f64>,
}

impl IsMixture {
    pub fn uniform(cover: Ball) -> Self {
        let n = cover.center.dim();
        let cover_volume = ball_volume(n, cover.radius);
        IsMixture { cover, cover_volume, comps: Vec::new(), weights: vec![1.0] }
    }

    /// Add a power-law component centered at `center` with the given
    /// radial exponent and unnormalized weight. The component radius is
    /// chosen to cover the whole cover ball.
    pub fn with_component(mut self, center: Point, exponent: f64, weight: f64) -> Self {
        let radius = center.dist(&self.cover.center) + self.cover.radius;
        let comp = PowerComponent::new(center.dim(), center, exponent, radius * (1.0 + 1e-12));
        self.comps.push(comp);
        self.weights.push(weight);
        self
    }

    /// Normalize the weights; call once after assembling components.
    pub fn build(mut self) -> Self {
        let total: f64 = self.weights.iter().sum();
        assert!(total > 0.0);
        self.weights.iter_mut().for_each(|w| *w /= total);
        self
    }

    pub fn pdf(&self, z: &Point) -> f64 {
        let mut p = if self.cover.contains(z) { self.weights[0] / self.cover_volume } else { 0.0 };
        for (comp, w) in self.comps.iter().zip(&self.weights[1..]) {
            p += w * comp.pdf(z);
        }
        p
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        let u: f64 = rng.gen();
        let mut acc = self.weights[0];
        if u < acc {
            // uniform over the cover ball
            let nd = self.cover.center.dim() as f64;
            let v: f64 = rng.gen();
            let r = self.cover.radius * v.powf(1.0 / nd);
            let dir = crate::green::random_direction(rng, self.cover.center.dim());
            return self.cover.center.axpy(r, &dir);
        }
        for (comp, w) in self.comps.iter().zip(&self.weights[1..]) {
            acc += w;
            if u < acc {
                return comp.sample(rng);
            }
        }
        self.comps.last().unwrap().sample(rng)
    }
}

/// Inversion `omega -> z` mapping the punctured ball onto the exterior of
/// `ball`: `z = c + R^2 (omega - c)/|omega - c|^2`, with volume Jacobian
/// `(R/|omega - c|)^{2N}`.
pub fn invert_exterior(ball: &Ball, omega: &Point) -> (Point, f64) {
    let d = omega.sub(&ball.center);
    let r2 = d.norm2();
    let scale = ball.radius * ball.radius / r2;
    let z = ball.center.axpy(scale, &d);
    let jac = (ball.radius * ball.radius / r2).powf(omega.dim() as f64);
    (z, jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc;

    #[test]
    fn mixture_reproduces_ball_volume() {
        let cover = Ball::unit(8);
        let mix = IsMixture::uniform(cover.clone())
            .with_component(Point::axis(8, 0.3), 6.0, 1.0)
            .with_component(Point::axis(8, -0.2), 4.0, 1.0)
            .build();
        // integral of the indicator of a sub-ball
        let sub = Ball::new(Point::axis(8, 0.1), 0.7);
        let est = mc::estimate(19, 200_000, |rng| {
            let z = mix.sample(rng);
            if sub.contains(&z) {
                1.0 / mix.pdf(&z)
            } else {
                0.0
            }
        });
        let exact = ball_volume(8, 0.7);
        assert!(
            (est.value - exact).abs() < 4.0 * est.std_error,
            "{} vs {} ({})",
            est.value,
            exact,
            est.std_error
        );
    }

    #[test]
    fn mixture_handles_singular_integrand() {
        // integral of |z|^{-6} over the unit ball in R^8 equals |S^7|/2
        let mix = IsMixture::uniform(Ball::unit(8))
            .with_component(Point::zeros(8), 6.0, 2.0)
            .build();
        let est = mc::estimate(7, 100_000, |rng| {
            let z = mix.sample(rng);
            z.norm().powf(-6.0) / mix.pdf(&z)
        });
        let exact = unit_sphere_area(8) / 2.0;
        assert!((est.value - exact).abs() < 4.0 * est.std_error);
        assert!(est.std_error < 0.01 * exact, "IS should tame the singularity");
    }

    #[test]
    fn inversion_computes_exterior_integral() {
        // integral of |z|^{-m} over the exterior of the unit ball in R^8:
        // |S^7|/(m - 8); after inversion the integrand in omega is
        // |omega|^{m - 16}, sampled with a matched power component
        let m = 11.0;
        let ball = Ball::unit(8);
        let mix = IsMixture::uniform(ball.clone())
            .with_component(Point::zeros(8), 16.0 - m, 3.0)
            .build();
        let est = mc::estimate(23, 100_000, |rng| {
            let w = mix.sample(rng);
            let (z, jac) = invert_exterior(&ball, &w);
            z.norm().powf(-m) * jac / mix.pdf(&w)
        });
        let exact = unit_sphere_area(8) / (m - 8.0);
        assert!(
            (est.value - exact).abs() < 4.0 * est.std_error,
            "{} vs {} ({})",
            est.value,
            exact,
            est.std_error
        );
    }
}
