//! Compensated and double-double accumulation.
//!
//! The coupling-matrix assembly sums up to `N^2` signed terms per entry with
//! heavy cancellation, and the acceptance tolerances on the assembled matrix
//! sit close to the f64 representation limit. Summing through a double-double
//! accumulator keeps each stored entry correctly rounded; the cheaper Neumaier
//! accumulator covers the places where plain f64 error is already acceptable.

/// Error-free sum: returns `(s, e)` with `s = fl(a + b)` and `a + b = s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free product: returns `(p, e)` with `p = fl(a * b)` and `a * b = p + e` exactly.
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Unevaluated sum of two f64, `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact product of two f64 as a double-double.
    #[inline]
    pub fn prod(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let lo = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, x: f64) -> Dd {
        let (s, e) = two_sum(self.hi, x);
        let lo = e + self.lo;
        let (hi, lo) = two_sum(s, lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn scale(self, x: f64) -> Dd {
        let (p, e) = two_prod(self.hi, x);
        let lo = self.lo.mul_add(x, e);
        let (hi, lo) = two_sum(p, lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Dd {
        self.add(Dd {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    /// Full double-double product.
    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let lo = self.hi.mul_add(other.lo, self.lo * other.hi) + e;
        let (hi, lo) = two_sum(p, lo);
        Dd { hi, lo }
    }

    /// Double-double quotient (one Newton correction on the f64 estimate).
    #[inline]
    pub fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.scale(q1));
        let q2 = (r.hi + r.lo) / (other.hi + other.lo);
        let (hi, lo) = two_sum(q1, q2);
        Dd { hi, lo }
    }

    /// Double-double square root (one Newton correction); requires a
    /// nonnegative value.
    #[inline]
    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ZERO;
        }
        debug_assert!(self.hi > 0.0, "sqrt of negative double-double");
        let q1 = self.hi.sqrt();
        let r = self.sub(Dd::prod(q1, q1));
        let q2 = (r.hi + r.lo) / (2.0 * q1);
        let (hi, lo) = two_sum(q1, q2);
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Neumaier (improved Kahan) running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    pub fn new() -> Neumaier {
        Neumaier::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// The unevaluated `(sum, compensation)` pair, for callers that need the
    /// rounding residual of `value()` itself.
    #[inline]
    pub fn parts(&self) -> (f64, f64) {
        (self.sum, self.comp)
    }
}

/// Compensated sum of a slice.
pub fn sum(xs: &[f64]) -> f64 {
    let mut acc = Neumaier::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}
