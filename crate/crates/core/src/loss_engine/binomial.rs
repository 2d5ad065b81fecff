/// Log binomial coefficients `ln C(n, k)` for `n` up to a fixed bound.
///
/// `C(125, 62)` is about `4e36`, so intensities are combined with binomials in
/// log space and only exponentiated once the product is back in a sane range.
#[derive(Debug, Clone)]
pub struct LogBinomial {
    ln_factorial: Vec<f64>,
}

impl LogBinomial {
    pub fn new(max_n: usize) -> Self {
        let mut ln_factorial = Vec::with_capacity(max_n + 1);
        ln_factorial.push(0.0);
        let mut acc = 0.0f64;
        for i in 1..=max_n {
            acc += (i as f64).ln();
            ln_factorial.push(acc);
        }
        Self { ln_factorial }
    }

    /// `ln C(n, k)`, or `-inf` when `k > n`.
    pub fn ln_choose(&self, n: usize, k: usize) -> f64 {
        if k > n {
            return f64::NEG_INFINITY;
        }
        self.ln_factorial[n] - self.ln_factorial[k] - self.ln_factorial[n - k]
    }

    pub fn choose(&self, n: usize, k: usize) -> f64 {
        self.ln_choose(n, k).exp()
    }

    /// `C(n - y, k) / C(n, k)`, the fraction of size-`k` clusters untouched by `y` defaults.
    pub fn surviving_fraction(&self, n: usize, y: usize, k: usize) -> f64 {
        if k + y > n {
            return 0.0;
        }
        (self.ln_choose(n - y, k) - self.ln_choose(n, k)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0f64, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn matches_multiplicative_formula() {
        let b = LogBinomial::new(125);
        for (n, k) in [(125, 0), (125, 1), (125, 3), (125, 62), (125, 125), (30, 7), (3, 2)] {
            let rel = (b.choose(n, k) - exact(n as u64, k as u64)).abs() / exact(n as u64, k as u64);
            assert!(rel < 1e-12, "C({n},{k}) rel err {rel}");
        }
        assert_eq!(b.choose(3, 4), 0.0);
    }

    #[test]
    fn surviving_fraction_edges() {
        let b = LogBinomial::new(125);
        assert_eq!(b.surviving_fraction(125, 0, 17), 1.0);
        assert_eq!(b.surviving_fraction(125, 1, 125), 0.0);
        assert!((b.surviving_fraction(125, 1, 1) - 124.0 / 125.0).abs() < 1e-14);
    }
}
