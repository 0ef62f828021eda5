use crate::error::{Error, Result};

/// Cubic spline through a table with zero end slopes, continued as a
/// constant outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // Second derivatives at the knots.
    ms: Vec<f64>,
}

impl ClampedSpline {
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Validation("spline table needs at least two points".into()));
        }
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::Validation("spline table contains non-finite values".into()));
        }
        if let Some(w) = xs.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "spline abscissae must increase strictly (x1 = {} after {})",
                w[1], w[0]
            )));
        }
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        // Tridiagonal system for the knot second derivatives.
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0 * h[0];
        sup[0] = h[0];
        rhs[0] = 6.0 * (ys[1] - ys[0]) / h[0];
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            sup[i] = h[i];
            rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
        }
        sub[n - 1] = h[n - 2];
        diag[n - 1] = 2.0 * h[n - 2];
        rhs[n - 1] = -6.0 * (ys[n - 1] - ys[n - 2]) / h[n - 2];
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut ms = vec![0.0; n];
        ms[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            ms[i] = (rhs[i] - sup[i] * ms[i + 1]) / diag[i];
        }
        Ok(ClampedSpline { xs, ys, ms })
    }

    pub fn first_x(&self) -> f64 {
        self.xs[0]
    }

    pub fn last_x(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn first_value(&self) -> f64 {
        self.ys[0]
    }

    pub fn last_value(&self) -> f64 {
        self.ys[self.ys.len() - 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    /// Value, first and second derivative.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return [self.ys[0], 0.0, 0.0];
        }
        if x >= self.xs[n - 1] {
            return [self.ys[n - 1], 0.0, 0.0];
        }
        let i = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let (a, b) = (self.xs[i + 1] - x, x - self.xs[i]);
        let (m0, m1) = (self.ms[i], self.ms[i + 1]);
        let c0 = self.ys[i] / h - m0 * h / 6.0;
        let c1 = self.ys[i + 1] / h - m1 * h / 6.0;
        let v = m0 * a * a * a / (6.0 * h) + m1 * b * b * b / (6.0 * h) + c0 * a + c1 * b;
        let d1 = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - c0 + c1;
        let d2 = (m0 * a + m1 * b) / h;
        [v, d1, d2]
    }
}
