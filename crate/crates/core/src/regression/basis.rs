//! Clamped cubic B-spline bases with knots at empirical quantiles.

const DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    lower: f64,
    upper: f64,
    /// Strictly increasing, strictly inside (lower, upper).
    interior: Vec<f64>,
}

impl SplineBasis {
    /// Basis of (at most) `dim` cubic B-splines over the range of `values`.
    ///
    /// Interior knots sit at the `k/(dim-3)` quantiles; repeated quantiles
    /// (heavily tied data) are merged, which lowers the dimension. Returns
    /// `None` when the values are constant.
    pub fn from_data(values: &[f64], dim: usize) -> Option<Self> {
        assert!(dim > DEGREE, "cubic spline basis needs dim >= 4");
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lower, upper) = (*sorted.first()?, *sorted.last()?);
        if !(upper > lower) {
            return None;
        }
        let n_interior = dim - DEGREE - 1;
        let mut interior: Vec<f64> = (1..=n_interior)
            .map(|k| quantile_sorted(&sorted, k as f64 / (n_interior + 1) as f64))
            .filter(|q| *q > lower && *q < upper)
            .collect();
        interior.dedup();
        Some(Self { lower, upper, interior })
    }

    pub fn from_parts(lower: f64, upper: f64, interior: Vec<f64>) -> Self {
        Self { lower, upper, interior }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.interior
    }

    pub fn dim(&self) -> usize {
        self.interior.len() + DEGREE + 1
    }

    fn knot(&self, i: usize) -> f64 {
        if i <= DEGREE {
            self.lower
        } else if i - DEGREE - 1 < self.interior.len() {
            self.interior[i - DEGREE - 1]
        } else {
            self.upper
        }
    }

    /// All basis functions at `x`, clamped to the training range.
    pub fn eval(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        out.fill(0.0);
        let x = x.clamp(self.lower, self.upper);
        // Knot span: t[span] <= x < t[span+1], using the last non-empty span at the top.
        let n_basis = self.dim();
        let mut span = DEGREE;
        while span < n_basis - 1 && x >= self.knot(span + 1) {
            span += 1;
        }
        let mut n = [0.0f64; DEGREE + 1];
        let mut left = [0.0f64; DEGREE + 1];
        let mut right = [0.0f64; DEGREE + 1];
        n[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - self.knot(span + 1 - j);
            right[j] = self.knot(span + j) - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        for (r, v) in n.iter().enumerate() {
            out[span - DEGREE + r] = *v;
        }
    }
}

/// Linear-interpolation quantile (type 7) of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
