//! Exact arithmetic in Z[zeta] for zeta a primitive 4p-th root of unity.
//!
//! Every character-sum value in the crate lives here: 4p accommodates the
//! p-th roots of unity coming from the additive character psi together with
//! the fourth root of unity i. Elements are stored in the power basis
//! 1, zeta, ..., zeta^{phi-1} reduced modulo the cyclotomic polynomial
//! Phi_{4p}(x) = (x^{2p} + 1)/(x^2 + 1) = x^{2p-2} - x^{2p-4} + ... + 1,
//! so equality is decidable coefficient-wise.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Fq, FqElem};
use crate::laurent::Laurent;

/// Ring context for Z[zeta_{4p}].
#[derive(Debug, Clone)]
pub struct CycloCtx {
    pub p: u32,
    /// 4p.
    pub m: u32,
    /// phi(4p) = 2(p-1), the rank of the ring.
    pub phi: usize,
    /// reduction[k] = coefficients of zeta^{phi+k} in the power basis,
    /// for k in 0..phi (enough for products of reduced elements).
    reduction: Vec<Vec<i64>>,
}

impl CycloCtx {
    pub fn new(p: u32) -> CycloCtx {
        assert!(p >= 3 && p % 2 == 1, "p must be an odd prime");
        let m = 4 * p;
        let phi = 2 * (p as usize - 1);
        // Phi_{4p}(x) = x^{2p-2} - x^{2p-4} + x^{2p-6} - ... + 1 (alternating,
        // even powers only). zeta^phi = -(sum of lower terms of Phi)/1:
        // zeta^{2p-2} = x^{2p-4} - x^{2p-6} + ... - 1 * (-1)^{p-1}... derive by
        // long division: build iteratively.
        let mut reduction: Vec<Vec<i64>> = Vec::with_capacity(phi);
        // phi_{4p} coefficients c_0..c_phi: c_{2j} = (-1)^{p-1-j}, odd zero
        let mut modulus = vec![0i64; phi + 1];
        for j in 0..=(phi / 2) {
            modulus[2 * j] = if (phi / 2 - j) % 2 == 0 { 1 } else { -1 };
        }
        debug_assert_eq!(modulus[phi], 1);
        // zeta^phi = -sum_{i<phi} modulus[i] zeta^i
        let first: Vec<i64> = (0..phi).map(|i| -modulus[i]).collect();
        reduction.push(first);
        for _ in 1..phi {
            let prev = reduction.last().unwrap().clone();
            // multiply by zeta: shift and reduce the overflow via reduction[0]
            let mut next = vec![0i64; phi];
            let overflow = prev[phi - 1];
            for i in (1..phi).rev() {
                next[i] = prev[i - 1];
            }
            next[0] = 0;
            if overflow != 0 {
                for i in 0..phi {
                    next[i] += overflow * reduction[0][i];
                }
            }
            reduction.push(next);
        }
        CycloCtx { p, m, phi, reduction }
    }

    pub fn zero(&self) -> Cyclo {
        Cyclo { c: vec![0; self.phi] }
    }

    pub fn one(&self) -> Cyclo {
        self.from_int(1)
    }

    pub fn from_int(&self, v: i128) -> Cyclo {
        let mut c = vec![0; self.phi];
        c[0] = v;
        Cyclo { c }
    }

    /// zeta^e for any integer exponent.
    pub fn zeta_pow(&self, e: i64) -> Cyclo {
        let e = e.rem_euclid(self.m as i64) as usize;
        let mut c = vec![0i128; self.phi];
        if e < self.phi {
            c[e] = 1;
            return Cyclo { c };
        }
        // reduce zeta^e for phi <= e < 4p: repeated single-step reduction
        let mut acc = vec![0i128; self.phi];
        acc[self.phi - 1] = 1;
        let mut cur = self.phi - 1;
        while cur < e {
            // multiply acc by zeta
            let overflow = acc[self.phi - 1];
            for i in (1..self.phi).rev() {
                acc[i] = acc[i - 1];
            }
            acc[0] = 0;
            if overflow != 0 {
                for i in 0..self.phi {
                    acc[i] += overflow * self.reduction[0][i] as i128;
                }
            }
            cur += 1;
        }
        Cyclo { c: acc }
    }

    /// zeta_p^e = zeta^{4e}.
    pub fn zeta_p_pow(&self, e: i64) -> Cyclo {
        self.zeta_pow(4 * e.rem_euclid(self.p as i64))
    }

    /// The fourth root of unity i = zeta^p.
    pub fn i_unit(&self) -> Cyclo {
        self.zeta_pow(self.p as i64)
    }

    /// i_p = -1 when p = 1 mod 4, -i when p = 3 mod 4.
    pub fn i_p(&self) -> Cyclo {
        if self.p % 4 == 1 {
            self.from_int(-1)
        } else {
            self.neg(&self.i_unit())
        }
    }

    pub fn i_p_pow(&self, e: u64) -> Cyclo {
        // i_p has order dividing 4
        let e = (e % 4) as u32;
        let mut acc = self.one();
        for _ in 0..e {
            acc = self.mul(&acc, &self.i_p());
        }
        acc
    }

    /// The quadratic Gauss sum over F_p: g = sum_x zeta_p^{x^2}; equals
    /// sqrt(p) for p = 1 mod 4 and i*sqrt(p) for p = 3 mod 4.
    pub fn gauss_fp(&self) -> Cyclo {
        let mut acc = self.zero();
        for x in 0..self.p as i64 {
            acc = self.add(&acc, &self.zeta_p_pow(x * x));
        }
        acc
    }

    /// An exact representative of sqrt(p).
    pub fn sqrt_p(&self) -> Cyclo {
        let g = self.gauss_fp();
        if self.p % 4 == 1 {
            g
        } else {
            // sqrt(p) = -i * g
            self.mul(&self.neg(&self.i_unit()), &g)
        }
    }

    /// p^{e/2} exactly: integer power of p times sqrt(p) on odd e.
    pub fn p_half_pow(&self, e: u64) -> Cyclo {
        let whole = self.from_int((self.p as i128).pow((e / 2) as u32));
        if e % 2 == 0 {
            whole
        } else {
            self.mul(&whole, &self.sqrt_p())
        }
    }

    pub fn add(&self, a: &Cyclo, b: &Cyclo) -> Cyclo {
        Cyclo { c: a.c.iter().zip(&b.c).map(|(x, y)| x + y).collect() }
    }

    pub fn sub(&self, a: &Cyclo, b: &Cyclo) -> Cyclo {
        Cyclo { c: a.c.iter().zip(&b.c).map(|(x, y)| x - y).collect() }
    }

    pub fn neg(&self, a: &Cyclo) -> Cyclo {
        Cyclo { c: a.c.iter().map(|x| -x).collect() }
    }

    pub fn scale(&self, a: &Cyclo, k: i128) -> Cyclo {
        Cyclo { c: a.c.iter().map(|x| x * k).collect() }
    }

    pub fn mul(&self, a: &Cyclo, b: &Cyclo) -> Cyclo {
        let mut wide = vec![0i128; 2 * self.phi - 1];
        for (i, &x) in a.c.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.c.iter().enumerate() {
                if y == 0 {
                    continue;
                }
                wide[i + j] += x * y;
            }
        }
        let mut out = vec![0i128; self.phi];
        out.copy_from_slice(&wide[..self.phi]);
        for k in 0..self.phi - 1 {
            let v = wide[self.phi + k];
            if v == 0 {
                continue;
            }
            // reduction[k] holds zeta^{phi + k} in the power basis
            for i in 0..self.phi {
                out[i] += v * self.reduction[k][i] as i128;
            }
        }
        Cyclo { c: out }
    }

    /// Multiply by zeta^e.
    pub fn mul_zeta_pow(&self, a: &Cyclo, e: i64) -> Cyclo {
        self.mul(a, &self.zeta_pow(e))
    }

    pub fn pow(&self, a: &Cyclo, mut e: u64) -> Cyclo {
        let mut acc = self.one();
        let mut base = a.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// Galois action zeta -> zeta^s for gcd(s, 4p) = 1.
    pub fn galois(&self, a: &Cyclo, s: i64) -> Cyclo {
        let mut out = self.zero();
        for (j, &cj) in a.c.iter().enumerate() {
            if cj == 0 {
                continue;
            }
            let term = self.scale(&self.zeta_pow(s * j as i64), cj);
            out = self.add(&out, &term);
        }
        out
    }

    /// Complex conjugation (zeta -> zeta^{-1}).
    pub fn conj(&self, a: &Cyclo) -> Cyclo {
        self.galois(a, -1)
    }

    /// Is the value fixed by the full Galois group (hence a rational integer)?
    pub fn rational_part(&self, a: &Cyclo) -> Option<i128> {
        for s in 2..self.m as i64 {
            if num_integer_gcd(s, self.m as i64) != 1 {
                continue;
            }
            if self.galois(a, s) != *a {
                return None;
            }
        }
        // Galois-stable: must the constant coefficient with all others zero?
        // In the power basis, rational integers are exactly c[0] with rest 0.
        if a.c[1..].iter().all(|&x| x == 0) {
            Some(a.c[0])
        } else {
            None
        }
    }

    /// Embedding zeta -> exp(2 pi i / 4p) into C (for magnitudes/reports).
    pub fn embed(&self, a: &Cyclo) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &cj) in a.c.iter().enumerate() {
            if cj == 0 {
                continue;
            }
            let theta = 2.0 * std::f64::consts::PI * j as f64 / self.m as f64;
            acc += Complex64::new(theta.cos(), theta.sin()) * cj as f64;
        }
        acc
    }

    pub fn magnitude(&self, a: &Cyclo) -> f64 {
        self.embed(a).norm()
    }

    /// psi applied to a Laurent value: zeta_p^{Tr(c_{-1}(x))}. Errors when
    /// the t^{-1} coefficient is not determined at the stored precision.
    pub fn psi(&self, fq: &Fq, x: &Laurent) -> Result<Cyclo> {
        if fq.p != self.p {
            return Err(Error::invalid("cyclotomic context does not match the field"));
        }
        let c = x.c_minus1()?;
        Ok(self.zeta_p_pow(fq.trace(c) as i64))
    }

    /// psi of a residue-weight expression: zeta_p^{Tr(a)} for a in F_q.
    pub fn psi_fq(&self, fq: &Fq, a: FqElem) -> Cyclo {
        self.zeta_p_pow(fq.trace(a) as i64)
    }

    /// Assemble sum_h counts[h] * zeta_p^h from an F_p histogram.
    pub fn from_histogram(&self, counts: &[i128]) -> Cyclo {
        let mut acc = self.zero();
        for (h, &k) in counts.iter().enumerate() {
            if k == 0 {
                continue;
            }
            acc = self.add(&acc, &self.scale(&self.zeta_p_pow(h as i64), k));
        }
        acc
    }
}

fn num_integer_gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// An element of Z[zeta_{4p}] in the reduced power basis.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Cyclo {
    c: Vec<i128>,
}

impl Cyclo {
    pub fn coeffs(&self) -> &[i128] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0)
    }

    /// Serialized coefficient vector (length phi(4p)).
    pub fn to_vec(&self) -> Vec<i128> {
        self.c.clone()
    }
}

impl std::fmt::Debug for Cyclo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Cyclo{:?}", self.c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;

    #[test]
    fn zeta_orders() {
        for p in [3u32, 5, 7] {
            let ctx = CycloCtx::new(p);
            // zeta has exact order 4p
            let mut acc = ctx.one();
            for k in 1..=ctx.m {
                acc = ctx.mul(&acc, &ctx.zeta_pow(1));
                if k < ctx.m {
                    assert!(acc != ctx.one(), "zeta^{k} = 1 too early for p={p}");
                }
            }
            assert_eq!(acc, ctx.one());
            // i^2 = -1
            let i = ctx.i_unit();
            assert_eq!(ctx.mul(&i, &i), ctx.from_int(-1));
            // zeta_p has order p
            assert_eq!(ctx.pow(&ctx.zeta_p_pow(1), p as u64), ctx.one());
        }
    }

    #[test]
    fn sqrt_p_squares_to_p() {
        for p in [3u32, 5, 7] {
            let ctx = CycloCtx::new(p);
            let s = ctx.sqrt_p();
            assert_eq!(ctx.mul(&s, &s), ctx.from_int(p as i128), "sqrt({p})^2");
            let emb = ctx.embed(&s);
            assert!((emb.re - (p as f64).sqrt()).abs() < 1e-9);
            assert!(emb.im.abs() < 1e-9);
        }
    }

    #[test]
    fn psi_is_a_homomorphism() {
        let fq = FieldSpec::new(3, 1).build().unwrap();
        let ctx = CycloCtx::new(3);
        let xs = [
            Laurent::from_rational(&poly_one(), &crate::poly::Poly::t(), 4, &fq).unwrap(),
            Laurent::from_rational(
                &crate::poly::Poly::from_ints(&fq, &[1, 2]),
                &crate::poly::Poly::t_pow(2),
                4,
                &fq,
            )
            .unwrap(),
            Laurent::from_poly(&crate::poly::Poly::t()),
        ];
        for x in &xs {
            for y in &xs {
                let lhs = ctx.mul(&ctx.psi(&fq, x).unwrap(), &ctx.psi(&fq, y).unwrap());
                let rhs = ctx.psi(&fq, &x.add(y, &fq)).unwrap();
                assert_eq!(lhs, rhs);
            }
        }
        // integral values map to 1
        assert_eq!(ctx.psi(&fq, &Laurent::from_poly(&crate::poly::Poly::t())).unwrap(), ctx.one());
        // q=3: psi(t^{-1}) = zeta_3
        let l = Laurent::from_rational(&poly_one(), &crate::poly::Poly::t(), 2, &fq).unwrap();
        assert_eq!(ctx.psi(&fq, &l).unwrap(), ctx.zeta_p_pow(1));
        // insufficient precision refused
        let bad = Laurent::zero_at(0);
        assert!(ctx.psi(&fq, &bad).is_err());
    }

    fn poly_one() -> crate::poly::Poly {
        crate::poly::Poly::one()
    }

    #[test]
    fn galois_and_rationality() {
        let ctx = CycloCtx::new(3);
        let g = ctx.gauss_fp();
        // g * conj(g) = p for the F_p Gauss sum
        let n = ctx.mul(&g, &ctx.conj(&g));
        assert_eq!(ctx.rational_part(&n), Some(3));
        assert_eq!(ctx.rational_part(&g), None);
        assert_eq!(ctx.rational_part(&ctx.from_int(-7)), Some(-7));
    }

    #[test]
    fn orthogonality_sum_of_zeta_p() {
        for p in [3u32, 5, 7] {
            let ctx = CycloCtx::new(p);
            let mut acc = ctx.zero();
            for h in 0..p as i64 {
                acc = ctx.add(&acc, &ctx.zeta_p_pow(h));
            }
            assert!(acc.is_zero());
        }
    }
}
