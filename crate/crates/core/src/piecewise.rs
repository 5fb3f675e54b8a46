//! Exact integrals of sums of exponential-linear terms.
//!
//! Every built-in density and threshold weight is a finite sum of terms
//! `e^{-r t} (c0 + c1 t)` supported on `[lo, hi)`. Products of such sums stay
//! in the family, so `∫ e^{-st} f(t) w(t) dt` has a closed form that is
//! evaluated here without the `1/s` cancellation of the textbook formulas.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Term {
    pub lo: f64,
    pub hi: f64,
    pub rate: f64,
    pub c0: f64,
    pub c1: f64,
}

impl Term {
    pub fn constant(lo: f64, hi: f64, c0: f64) -> Self {
        Term {
            lo,
            hi,
            rate: 0.0,
            c0,
            c1: 0.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < self.lo || t >= self.hi {
            0.0
        } else {
            (-self.rate * t).exp() * (self.c0 + self.c1 * t)
        }
    }

    /// Product of two terms; `None` when the supports do not overlap.
    /// At least one factor must have `c1 == 0`.
    fn times(&self, other: &Term) -> Option<Term> {
        debug_assert!(self.c1 == 0.0 || other.c1 == 0.0);
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if hi <= lo {
            return None;
        }
        Some(Term {
            lo,
            hi,
            rate: self.rate + other.rate,
            c0: self.c0 * other.c0,
            c1: self.c0 * other.c1 + self.c1 * other.c0,
        })
    }

    /// `∫_lo^min(hi, upto) e^{-st} e^{-rt} (c0 + c1 t) dt`.
    fn laplace_upto(&self, s: Complex64, upto: f64) -> Complex64 {
        let hi = self.hi.min(upto);
        if hi <= self.lo {
            return Complex64::new(0.0, 0.0);
        }
        let c = s + self.rate;
        let (j0, j1) = if hi.is_infinite() {
            (c.inv(), (c * c).inv())
        } else {
            let len = hi - self.lo;
            let z = -c * len;
            (phi1(z) * len, psi(z) * (len * len))
        };
        (-c * self.lo).exp() * (j0 * (self.c0 + self.c1 * self.lo) + j1 * self.c1)
    }
}

/// `(e^z - 1) / z`, accurate near zero.
pub(crate) fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..24 {
            term = term * z / (n as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `∫_0^1 v e^{zv} dv = (e^z (z - 1) + 1) / z²`, accurate near zero.
pub(crate) fn psi(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        // Σ z^n / (n! (n + 2))
        let mut power = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.5, 0.0);
        for n in 1..24 {
            power = power * z / n as f64;
            sum += power / (n as f64 + 2.0);
        }
        sum
    } else {
        (z.exp() * (z - 1.0) + 1.0) / (z * z)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct TermSum(pub Vec<Term>);

impl TermSum {
    pub fn value(&self, t: f64) -> f64 {
        self.0.iter().map(|term| term.value(t)).sum()
    }

    pub fn times(&self, other: &TermSum) -> TermSum {
        TermSum(
            self.0
                .iter()
                .flat_map(|a| other.0.iter().filter_map(move |b| a.times(b)))
                .collect(),
        )
    }

    pub fn laplace(&self, s: Complex64) -> Complex64 {
        self.laplace_upto(s, f64::INFINITY)
    }

    pub fn laplace_upto(&self, s: Complex64, upto: f64) -> Complex64 {
        self.0.iter().map(|term| term.laplace_upto(s, upto)).sum()
    }

    /// `∫_0^upto` of the sum.
    pub fn integral_upto(&self, upto: f64) -> f64 {
        self.laplace_upto(Complex64::new(0.0, 0.0), upto).re
    }
}
