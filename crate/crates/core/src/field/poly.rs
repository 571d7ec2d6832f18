use super::PrimeField;

/// Dense univariate polynomial, coefficients in ascending degree.
///
/// Trailing zero coefficients are trimmed, so the zero polynomial has no
/// coefficients at all.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FieldPolynomial {
    coeffs: Vec<u64>,
}

impl FieldPolynomial {
    pub fn zero() -> Self {
        FieldPolynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        FieldPolynomial { coeffs: vec![1] }
    }

    pub fn from_coeffs(field: &PrimeField, coeffs: Vec<u64>) -> Self {
        let mut p = FieldPolynomial {
            coeffs: coeffs.into_iter().map(|c| field.reduce(c)).collect(),
        };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u64> {
        self.coeffs
    }

    /// Coefficient of `x^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> u64 {
        self.coeffs.get(k).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Horner evaluation.
    pub fn eval(&self, field: &PrimeField, x: u64) -> u64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0, |acc, &c| field.add(field.mul(acc, x), c))
    }

    pub fn mul(&self, field: &PrimeField, other: &FieldPolynomial) -> FieldPolynomial {
        if self.is_zero() || other.is_zero() {
            return FieldPolynomial::zero();
        }
        let mut out = vec![0u64; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] = field.add(out[i + j], field.mul(a, b));
            }
        }
        FieldPolynomial::from_coeffs(field, out)
    }

    /// Multiplies in place by the monic linear factor `(x - root)`.
    fn mul_linear(&mut self, field: &PrimeField, root: u64) {
        let neg_root = field.neg(root);
        self.coeffs.push(0);
        for k in (0..self.coeffs.len()).rev() {
            let lower = if k > 0 { self.coeffs[k - 1] } else { 0 };
            self.coeffs[k] = field.add(lower, field.mul(neg_root, self.coeffs[k]));
        }
        self.trim();
    }

    /// Expands `prod (x - root)^multiplicity`; the empty product is `1`.
    pub fn product_expand(field: &PrimeField, factors: &[(u64, usize)]) -> FieldPolynomial {
        let mut p = FieldPolynomial::one();
        for &(root, mult) in factors {
            for _ in 0..mult {
                p.mul_linear(field, root);
            }
        }
        p
    }
}
