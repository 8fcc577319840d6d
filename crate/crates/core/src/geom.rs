//! Points and domain geometry: balls and dumbbells with the signed
//! distance queries the walk-on-spheres estimators need.

use crate::error::Error;
use crate::Result;

/// Maximum ambient dimension the fixed-capacity point type supports.
pub const MAX_DIM: usize = 12;

/// A point of `R^N` for `N <= 12`, stored inline so hot loops stay
/// allocation-free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl Point {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "dimension out of range");
        Point { coords: [0.0; MAX_DIM], dim }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut p = Point::zeros(v.len());
        p.coords[..v.len()].copy_from_slice(v);
        p
    }

    /// Point on the first coordinate axis, `(x1, 0, ..., 0)`.
    pub fn axis(dim: usize, x1: f64) -> Self {
        let mut p = Point::zeros(dim);
        p.coords[0] = x1;
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords[..self.dim]
    }

    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.coords[i] * other.coords[i];
        }
        s
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn add(&self, other: &Point) -> Point {
        let mut r = *self;
        for i in 0..self.dim {
            r.coords[i] += other.coords[i];
        }
        r
    }

    pub fn sub(&self, other: &Point) -> Point {
        let mut r = *self;
        for i in 0..self.dim {
            r.coords[i] -= other.coords[i];
        }
        r
    }

    pub fn scale(&self, s: f64) -> Point {
        let mut r = *self;
        for i in 0..self.dim {
            r.coords[i] *= s;
        }
        r
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Point) -> Point {
        let mut r = *self;
        for i in 0..self.dim {
            r.coords[i] += s * other.coords[i];
        }
        r
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.sub(other).norm()
    }

    pub fn coord(&self, i: usize) -> f64 {
        debug_assert!(i < self.dim);
        self.coords[i]
    }

    pub fn set_coord(&mut self, i: usize, v: f64) {
        debug_assert!(i < self.dim);
        self.coords[i] = v;
    }
}

/// Euclidean ball `{ |x - center| < radius }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Self {
        assert!(radius > 0.0, "ball radius must be positive");
        Ball { center, radius }
    }

    pub fn unit(dim: usize) -> Self {
        Ball::new(Point::zeros(dim), 1.0)
    }

    /// Signed distance to the boundary, positive inside.
    pub fn signed_dist(&self, x: &Point) -> f64 {
        self.radius - x.dist(&self.center)
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.signed_dist(x) > 0.0
    }

    /// Radial projection of `x` onto the sphere.
    pub fn project_boundary(&self, x: &Point) -> Point {
        let d = x.sub(&self.center);
        let n = d.norm();
        if n == 0.0 {
            // center maps to an arbitrary boundary point
            let mut e = Point::zeros(x.dim());
            e.set_coord(0, self.radius);
            return self.center.add(&e);
        }
        self.center.add(&d.scale(self.radius / n))
    }
}

/// Cylindrical neck `{ x1 in (a, b), |x'| < radius }` along the first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Neck {
    pub x1_min: f64,
    pub x1_max: f64,
    pub radius: f64,
}

impl Neck {
    /// Signed distance positive inside; conservative (inf of face
    /// distances), which is exactly what an inscribed-sphere query needs.
    pub fn signed_dist(&self, x: &Point) -> f64 {
        let mut cross2 = 0.0;
        for i in 1..x.dim() {
            cross2 += x.coord(i) * x.coord(i);
        }
        let lateral = self.radius - cross2.sqrt();
        let left = x.coord(0) - self.x1_min;
        let right = self.x1_max - x.coord(0);
        lateral.min(left).min(right)
    }
}

/// Computational domain: a single ball or a dumbbell built from collinear
/// ball lobes joined by a thin cylindrical neck along the first axis.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Ball(Ball),
    Dumbbell {
        lobes: Vec<Ball>,
        neck: Neck,
    },
}

impl DomainSpec {
    pub fn ball(center: Point, radius: f64) -> Self {
        DomainSpec::Ball(Ball::new(center, radius))
    }

    pub fn unit_ball(dim: usize) -> Self {
        DomainSpec::Ball(Ball::unit(dim))
    }

    /// Dumbbell from lobes centered on the first axis; the neck cylinder
    /// spans from the first to the last lobe center. Lobes must be
    /// pairwise disjoint and the neck thinner than every lobe.
    pub fn dumbbell(lobes: Vec<Ball>, neck_radius: f64) -> Result<Self> {
        if lobes.len() < 2 {
            return Err(Error::Config("dumbbell needs at least two lobes".into()));
        }
        for w in lobes.windows(2) {
            let gap = w[0].center.dist(&w[1].center) - w[0].radius - w[1].radius;
            if gap <= 0.0 {
                return Err(Error::Config("dumbbell lobes must be pairwise disjoint".into()));
            }
            if w[1].center.coord(0) <= w[0].center.coord(0) {
                return Err(Error::Config("lobe centers must increase along the first axis".into()));
            }
        }
        let min_r = lobes.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min);
        if neck_radius <= 0.0 || neck_radius >= min_r {
            return Err(Error::Config("neck radius must lie in (0, min lobe radius)".into()));
        }
        let neck = Neck {
            x1_min: lobes.first().unwrap().center.coord(0),
            x1_max: lobes.last().unwrap().center.coord(0),
            radius: neck_radius,
        };
        Ok(DomainSpec::Dumbbell { lobes, neck })
    }

    /// Two unit-ball lobes at first-axis positions `+-(1 + gap/2)`.
    pub fn two_lobe(dim: usize, gap: f64, neck_radius: f64) -> Result<Self> {
        let c = 1.0 + gap / 2.0;
        DomainSpec::dumbbell(
            vec![
                Ball::new(Point::axis(dim, -c), 1.0),
                Ball::new(Point::axis(dim, c), 1.0),
            ],
            neck_radius,
        )
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Ball(b) => b.center.dim(),
            DomainSpec::Dumbbell { lobes, .. } => lobes[0].center.dim(),
        }
    }

    /// Signed distance to the boundary, positive inside. For the dumbbell
    /// (a union of shapes) this is the max of the component signed
    /// distances: a valid inscribed-sphere radius at every interior point.
    pub fn signed_dist(&self, x: &Point) -> f64 {
        match self {
            DomainSpec::Ball(b) => b.signed_dist(x),
            DomainSpec::Dumbbell { lobes, neck } => {
                let mut d = neck.signed_dist(x);
                for lobe in lobes {
                    d = d.max(lobe.signed_dist(x));
                }
                d
            }
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.signed_dist(x) > 0.0
    }

    /// Nearest boundary point of the component shape realizing the signed
    /// distance. Exact for balls; for the dumbbell it projects onto the
    /// maximizing shape, which is within `O(sdf)` of the true closest
    /// boundary point when `x` sits in the terminal shell.
    pub fn project_boundary(&self, x: &Point) -> Point {
        match self {
            DomainSpec::Ball(b) => b.project_boundary(x),
            DomainSpec::Dumbbell { lobes, neck } => {
                let mut best = neck.signed_dist(x);
                let mut proj = {
                    // project onto the nearest cylinder face
                    let mut cross2 = 0.0;
                    for i in 1..x.dim() {
                        cross2 += x.coord(i) * x.coord(i);
                    }
                    let cross = cross2.sqrt();
                    let mut p = *x;
                    if cross > 0.0 {
                        let s = neck.radius / cross;
                        for i in 1..x.dim() {
                            p.set_coord(i, x.coord(i) * s);
                        }
                    } else {
                        p.set_coord(1, neck.radius);
                    }
                    p
                };
                for lobe in lobes {
                    let d = lobe.signed_dist(x);
                    if d > best {
                        best = d;
                        proj = lobe.project_boundary(x);
                    }
                }
                proj
            }
        }
    }

    /// Smallest ball centered on the domain's axis midpoint that contains
    /// the whole domain; used to split exterior integrals.
    pub fn bounding_ball(&self) -> Ball {
        match self {
            DomainSpec::Ball(b) => b.clone(),
            DomainSpec::Dumbbell { lobes, .. } => {
                let lo = lobes.first().unwrap();
                let hi = lobes.last().unwrap();
                let mid = lo.center.add(&hi.center).scale(0.5);
                let mut r: f64 = 0.0;
                for lobe in lobes {
                    r = r.max(mid.dist(&lobe.center) + lobe.radius);
                }
                Ball::new(mid, r * (1.0 + 1e-12))
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.bounding_ball().radius
    }

    pub fn require_interior(&self, x: &Point, what: &str) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Outside(format!("{what} is not an interior point")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_ops() {
        let a = Point::from_slice(&[1.0, 2.0, 2.0]);
        let b = Point::from_slice(&[0.0, 0.0, 0.0]);
        assert_eq!(a.norm(), 3.0);
        assert_eq!(a.dist(&b), 3.0);
        assert_eq!(a.axpy(2.0, &a).norm(), 9.0);
    }

    #[test]
    fn ball_sdf_and_projection() {
        let ball = Ball::unit(4);
        let x = Point::from_slice(&[0.5, 0.0, 0.0, 0.0]);
        assert!((ball.signed_dist(&x) - 0.5).abs() < 1e-15);
        let pb = ball.project_boundary(&x);
        assert!((pb.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dumbbell_union_sdf() {
        let d = DomainSpec::two_lobe(3, 0.4, 0.1).unwrap();
        // lobe centers at +-1.2
        let center_lobe = Point::axis(3, 1.2);
        assert!((d.signed_dist(&center_lobe) - 1.0).abs() < 1e-15);
        // a point mid-neck is inside with clearance = neck radius
        let mid = Point::zeros(3);
        assert!((d.signed_dist(&mid) - 0.1).abs() < 1e-15);
        // outside everything
        let far = Point::axis(3, 5.0);
        assert!(d.signed_dist(&far) < 0.0);
        // walk-on-spheres invariant: the inscribed ball stays inside
        let x = Point::from_slice(&[1.0, 0.3, 0.0]);
        let r = d.signed_dist(&x);
        assert!(r > 0.0);
        let probe = x.axpy(r * 0.999, &Point::axis(3, 1.0).sub(&Point::zeros(3)));
        assert!(d.contains(&probe));
    }

    #[test]
    fn dumbbell_validation() {
        // overlapping lobes rejected
        let bad = DomainSpec::dumbbell(
            vec![
                Ball::new(Point::axis(3, -0.5), 1.0),
                Ball::new(Point::axis(3, 0.5), 1.0),
            ],
            0.1,
        );
        assert!(bad.is_err());
        // fat neck rejected
        assert!(DomainSpec::two_lobe(3, 0.4, 1.5).is_err());
    }

    #[test]
    fn bounding_ball_contains_lobes() {
        let d = DomainSpec::two_lobe(5, 0.6, 0.2).unwrap();
        let bb = d.bounding_ball();
        assert!(bb.radius >= 2.3);
        assert!(bb.contains(&Point::axis(5, 2.29)));
    }
}
