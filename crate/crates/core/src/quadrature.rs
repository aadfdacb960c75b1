//! Line and triangle quadrature rules on reference domains.

use nalgebra::Point2;

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    /// `n`-point Gauss-Legendre rule, exact for degree `2n - 1`.
    pub fn gauss(n: usize) -> LineRule {
        assert!(n >= 1);
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton iteration on P_n from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points.push(0.5 * (1.0 - x));
            weights.push(0.5 * w);
        }
        LineRule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().cloned().zip(self.weights.iter().cloned())
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on the reference triangle; weights sum to its area ½.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<Point2<f64>>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Symmetric 6-point rule exact for degree 4.
    pub fn degree4() -> TriangleRule {
        let mut r = TriangleRule::empty(4);
        r.orbit3(0.445948490915965, 0.223381589678011);
        r.orbit3(0.091576213509771, 0.109951743655322);
        r
    }

    /// Symmetric 12-point rule exact for degree 6.
    pub fn degree6() -> TriangleRule {
        let mut r = TriangleRule::empty(6);
        r.orbit3(0.249286745170910, 0.116786275726379);
        r.orbit3(0.063089014491502, 0.050844906370207);
        r.orbit6(0.053145049844817, 0.310352451033784, 0.082851075618374);
        r
    }

    /// Collapsed (Duffy) Gauss rule with `n²` points, exact for degree `2n - 2`.
    pub fn collapsed(n: usize) -> TriangleRule {
        let g = LineRule::gauss(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (xi, wi) in g.iter() {
            for (eta, wj) in g.iter() {
                points.push(Point2::new(xi, eta * (1.0 - xi)));
                weights.push(wi * wj * (1.0 - xi));
            }
        }
        TriangleRule {
            points,
            weights,
            degree: 2 * n - 2,
        }
    }

    /// Cheapest available rule exact for at least `degree`.
    pub fn with_degree(degree: usize) -> TriangleRule {
        match degree {
            0..=4 => TriangleRule::degree4(),
            5..=6 => TriangleRule::degree6(),
            d => TriangleRule::collapsed(d.div_ceil(2) + 1),
        }
    }

    fn empty(degree: usize) -> TriangleRule {
        TriangleRule {
            points: Vec::new(),
            weights: Vec::new(),
            degree,
        }
    }

    fn orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for (x, y) in [(a, a), (b, a), (a, b)] {
            self.points.push(Point2::new(x, y));
            self.weights.push(0.5 * w);
        }
    }

    fn orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for (x, y) in [(a, b), (b, a), (a, c), (c, a), (b, c), (c, b)] {
            self.points.push(Point2::new(x, y));
            self.weights.push(0.5 * w);
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point2<f64>, f64)> + '_ {
        self.points.iter().zip(self.weights.iter().cloned())
    }
}
