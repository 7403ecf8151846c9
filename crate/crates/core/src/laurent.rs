//! Truncated Laurent series: elements of K_inf = F_q((1/t)) carried at an
//! explicit finite precision.
//!
//! A value stores the coefficients of t^i for -prec <= i <= top and promises
//! nothing below t^{-prec}; the tail is an unknown of absolute value
//! <= q^{-prec-1}. Operations propagate precision exactly and refuse to
//! produce answers that would depend on unknown coefficients.

use crate::error::{Error, Result};
use crate::field::{Fq, FqElem};
use crate::poly::Poly;

/// Precision marker for exactly known values (polynomials, exact rationals
/// expanded to full requested depth keep finite precision).
pub const EXACT: i64 = i64::MAX / 4;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Laurent {
    /// Exponent of the highest stored coefficient; `top = -prec - 1` with an
    /// empty window encodes "zero to this precision".
    top: i64,
    /// All coefficients at exponents >= -prec are known.
    prec: i64,
    /// Window, highest exponent first: coeffs[0] is the t^top coefficient.
    coeffs: Vec<FqElem>,
}

impl std::fmt::Debug for Laurent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.coeffs.is_empty() {
            if self.prec >= EXACT {
                return write!(f, "0");
            }
            return write!(f, "O(t^{})", -self.prec - 1);
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let e = self.top - i as i64;
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if e == 0 {
                write!(f, "{c}")?;
            } else if e == 1 && c == 1 {
                write!(f, "t")?;
            } else if c == 1 {
                write!(f, "t^{e}")?;
            } else {
                write!(f, "{c}t^{e}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        if self.prec < EXACT {
            write!(f, " + O(t^{})", -self.prec - 1)?;
        }
        Ok(())
    }
}

impl Laurent {
    fn normalized(top: i64, prec: i64, mut coeffs: Vec<FqElem>) -> Laurent {
        let mut t = top;
        while let Some(&0) = coeffs.first() {
            coeffs.remove(0);
            t -= 1;
        }
        if coeffs.is_empty() {
            return Laurent { top: -prec.min(EXACT) - 1, prec, coeffs };
        }
        // drop stored coefficients below the precision floor
        let lowest = t - coeffs.len() as i64 + 1;
        if prec < EXACT && lowest < -prec {
            let keep = (t + prec + 1).max(0) as usize;
            coeffs.truncate(keep);
            return Laurent::normalized(t, prec, coeffs);
        }
        // canonical form: no trailing zeros (coeff() defaults to 0 in-window)
        while let Some(&0) = coeffs.last() {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Laurent { top: -prec.min(EXACT) - 1, prec, coeffs };
        }
        Laurent { top: t, prec, coeffs }
    }

    /// Zero known to the given precision.
    pub fn zero_at(prec: i64) -> Laurent {
        Laurent { top: -prec.min(EXACT) - 1, prec, coeffs: vec![] }
    }

    pub fn zero() -> Laurent {
        Laurent::zero_at(EXACT)
    }

    pub fn from_poly(p: &Poly) -> Laurent {
        if p.is_zero() {
            return Laurent::zero();
        }
        let mut coeffs: Vec<FqElem> = p.coeffs().to_vec();
        coeffs.reverse();
        Laurent::normalized(p.degree(), EXACT, coeffs)
    }

    /// Monomial c * t^e, exact.
    pub fn monomial(c: FqElem, e: i64) -> Laurent {
        if c == 0 {
            Laurent::zero()
        } else {
            Laurent { top: e, prec: EXACT, coeffs: vec![c] }
        }
    }

    /// Build from an explicit window: coefficient of t^{top - i} is window[i];
    /// everything below t^{-prec} unknown.
    pub fn from_window(top: i64, prec: i64, window: Vec<FqElem>) -> Laurent {
        Laurent::normalized(top, prec, window)
    }

    /// Expansion of num/den correct in all exponents >= -precision.
    pub fn from_rational(num: &Poly, den: &Poly, precision: i64, fq: &Fq) -> Result<Laurent> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if precision < 0 {
            return Err(Error::invalid("precision must be >= 0"));
        }
        if num.is_zero() {
            return Ok(Laurent::zero());
        }
        let shift = num.degree() - den.degree();
        // series in u = 1/t: num*(u) / den*(u) with reversed coefficients,
        // where x*(u) = u^deg x(1/u). Then num/den = t^shift * (num*/den*)(1/t).
        let nrev = num.reversed();
        let drev = den.reversed();
        // need coefficients of u^0 .. u^{shift + precision}
        let terms = (shift + precision).max(0) as usize + 1;
        let mut series = vec![0 as FqElem; terms];
        let d0inv = fq.inv(drev.coeff(0));
        for k in 0..terms {
            let mut acc = nrev.coeff(k);
            for j in 0..k {
                let dj = drev.coeff(k - j);
                if dj != 0 && series[j] != 0 {
                    acc = fq.sub(acc, fq.mul(series[j], dj));
                }
            }
            series[k] = fq.mul(acc, d0inv);
        }
        // coefficient of u^k contributes to t^{shift-k}
        Ok(Laurent::normalized(shift, precision, series))
    }

    /// Are all coefficients known at exponents >= -m?
    pub fn has_precision(&self, m: i64) -> bool {
        self.prec >= m
    }

    pub fn precision(&self) -> i64 {
        self.prec
    }

    /// The coefficient of t^e; errors if it is below the precision floor.
    pub fn coeff(&self, e: i64) -> Result<FqElem> {
        if e > self.top {
            return Ok(0);
        }
        if self.prec < EXACT && e < -self.prec {
            return Err(Error::Precision { exp: e });
        }
        let idx = self.top - e;
        Ok(self.coeffs.get(idx as usize).copied().unwrap_or(0))
    }

    /// Exponent of |x|: Some(top) when a nonzero coefficient is known,
    /// None when the value is zero to stored precision (|x| <= q^{-prec-1}).
    pub fn val_exp(&self) -> Option<i64> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.top)
        }
    }

    /// True when the value is exactly zero (exact precision, no window).
    pub fn is_exactly_zero(&self) -> bool {
        self.coeffs.is_empty() && self.prec >= EXACT
    }

    /// |x| < q^e, decided exactly or an error if precision cannot decide.
    pub fn norm_lt(&self, e: i64) -> Result<bool> {
        match self.val_exp() {
            Some(t) => Ok(t < e),
            None => {
                if self.prec >= EXACT || -self.prec - 1 < e {
                    Ok(true)
                } else {
                    Err(Error::Precision { exp: e })
                }
            }
        }
    }

    pub fn add(&self, other: &Laurent, fq: &Fq) -> Laurent {
        let prec = self.prec.min(other.prec);
        let top = match (self.val_exp(), other.val_exp()) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => return Laurent::zero_at(prec),
        };
        if top < -prec.min(EXACT) {
            return Laurent::zero_at(prec);
        }
        let lo = if prec >= EXACT {
            // only nonempty windows bound the output (the zero sentinel
            // carries top = -prec - 1 and would blow the length up)
            let mut lo = top;
            if !self.coeffs.is_empty() {
                lo = lo.min(self.top - self.coeffs.len() as i64 + 1);
            }
            if !other.coeffs.is_empty() {
                lo = lo.min(other.top - other.coeffs.len() as i64 + 1);
            }
            lo
        } else {
            -prec
        };
        let len = (top - lo + 1) as usize;
        let mut out = vec![0 as FqElem; len];
        for (i, o) in out.iter_mut().enumerate() {
            let e = top - i as i64;
            let a = self.coeff(e).unwrap_or(0);
            let b = other.coeff(e).unwrap_or(0);
            *o = fq.add(a, b);
        }
        Laurent::normalized(top, prec, out)
    }

    pub fn neg(&self, fq: &Fq) -> Laurent {
        Laurent {
            top: self.top,
            prec: self.prec,
            coeffs: self.coeffs.iter().map(|&c| fq.neg(c)).collect(),
        }
    }

    pub fn sub(&self, other: &Laurent, fq: &Fq) -> Laurent {
        self.add(&other.neg(fq), fq)
    }

    pub fn mul(&self, other: &Laurent, fq: &Fq) -> Laurent {
        // precision of the product: min over error cross-terms
        let prec = {
            let p1 = match other.val_exp() {
                Some(tb) => self.prec.saturating_sub(tb),
                None => self.prec.saturating_add(other.prec).saturating_add(1),
            };
            let p2 = match self.val_exp() {
                Some(ta) => other.prec.saturating_sub(ta),
                None => self.prec.saturating_add(other.prec).saturating_add(1),
            };
            let p3 = self.prec.saturating_add(other.prec).saturating_add(1);
            p1.min(p2).min(p3).min(EXACT)
        };
        let (ta, tb) = match (self.val_exp(), other.val_exp()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Laurent::zero_at(prec),
        };
        let top = ta + tb;
        let mut out = vec![0 as FqElem; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                if b == 0 {
                    continue;
                }
                out[i + j] = fq.add(out[i + j], fq.mul(a, b));
            }
        }
        Laurent::normalized(top, prec, out)
    }

    pub fn mul_poly(&self, p: &Poly, fq: &Fq) -> Laurent {
        self.mul(&Laurent::from_poly(p), fq)
    }

    pub fn scale(&self, c: FqElem, fq: &Fq) -> Laurent {
        if c == 0 {
            return Laurent::zero_at(self.prec);
        }
        Laurent {
            top: self.top,
            prec: self.prec,
            coeffs: self.coeffs.iter().map(|&a| fq.mul(a, c)).collect(),
        }
    }

    /// Multiply by t^k (k may be negative).
    pub fn shift(&self, k: i64) -> Laurent {
        Laurent {
            top: self.top + k,
            prec: if self.prec >= EXACT { EXACT } else { self.prec - k },
            coeffs: self.coeffs.clone(),
        }
    }

    /// Forget coefficients below t^{-m}.
    pub fn truncate(&self, m: i64) -> Laurent {
        let prec = self.prec.min(m);
        Laurent::normalized(self.top, prec, self.coeffs.clone())
    }

    /// The polynomial part: sum of terms with exponent >= 0.
    pub fn poly_part(&self) -> Poly {
        if self.top < 0 {
            return Poly::zero();
        }
        let n = self.top as usize + 1;
        let mut coeffs = vec![0 as FqElem; n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            let e = self.top - i as i64;
            if e < 0 {
                break;
            }
            coeffs[e as usize] = c;
        }
        Poly::from_coeffs(coeffs)
    }

    /// The fractional part (|.| < 1), keeping the precision floor.
    pub fn frac_part(&self, fq: &Fq) -> Laurent {
        self.sub(&Laurent::from_poly(&self.poly_part()), fq)
    }

    /// The t^{-1} coefficient (errors below precision 1).
    pub fn c_minus1(&self) -> Result<FqElem> {
        if self.prec < 1 {
            return Err(Error::Precision { exp: -1 });
        }
        self.coeff(-1)
    }

    /// Do self and other agree in the coefficients of t^{-1} .. t^{-m}?
    /// Both must carry precision >= m.
    pub fn agrees_to(&self, other: &Laurent, m: i64, fq: &Fq) -> Result<bool> {
        for e in 1..=m {
            let a = self.coeff(-e)?;
            let b = other.coeff(-e)?;
            if fq.sub(a, b) != 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
