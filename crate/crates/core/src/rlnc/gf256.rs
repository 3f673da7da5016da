//! GF(2⁸) arithmetic with reduction polynomial x⁸+x⁴+x³+x+1 (0x11B).
//!
//! Multiplication goes through log/antilog tables built at compile time
//! from the generator 0x03.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Sub};

pub const POLY: u16 = 0x11B;
const GENERATOR: u8 = 0x03;

/// Shift-and-add multiplication with modular reduction.
pub const fn mul_slow(mut a: u8, mut b: u8) -> u8 {
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= (POLY & 0xFF) as u8;
        }
        b >>= 1;
    }
    acc
}

const fn build_tables() -> ([u8; 512], [u8; 256]) {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x = 1u8;
    let mut i = 0;
    while i < 255 {
        exp[i] = x;
        log[x as usize] = i as u8;
        x = mul_slow(x, GENERATOR);
        i += 1;
    }
    // Duplicate so exp[log a + log b] needs no modulo.
    while i < 512 {
        exp[i] = exp[i - 255];
        i += 1;
    }
    (exp, log)
}

const TABLES: ([u8; 512], [u8; 256]) = build_tables();
static EXP: [u8; 512] = TABLES.0;
static LOG: [u8; 256] = TABLES.1;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    pub fn inverse(self) -> Option<Gf256> {
        if self.0 == 0 {
            None
        } else {
            Some(Gf256(EXP[255 - LOG[self.0 as usize] as usize]))
        }
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf256({:#04x})", self.0)
    }
}

impl From<u8> for Gf256 {
    fn from(v: u8) -> Self {
        Gf256(v)
    }
}

/// Table-driven product in GF(2⁸).
#[inline]
pub fn gf_mul(a: Gf256, b: Gf256) -> Gf256 {
    if a.0 == 0 || b.0 == 0 {
        return Gf256::ZERO;
    }
    Gf256(EXP[LOG[a.0 as usize] as usize + LOG[b.0 as usize] as usize])
}

impl Add for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl Sub for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn sub(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl AddAssign for Gf256 {
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    fn mul(self, rhs: Gf256) -> Gf256 {
        gf_mul(self, rhs)
    }
}

impl MulAssign for Gf256 {
    fn mul_assign(&mut self, rhs: Gf256) {
        *self = gf_mul(*self, rhs);
    }
}

impl Div for Gf256 {
    type Output = Gf256;
    /// Panics on division by zero.
    fn div(self, rhs: Gf256) -> Gf256 {
        self * rhs.inverse().expect("division by zero in GF(256)")
    }
}

/// `dst[k] ^= c * src[k]` for every byte.
pub fn mul_add_slice(dst: &mut [u8], src: &[u8], c: Gf256) {
    if c.0 == 0 {
        return;
    }
    if c.0 == 1 {
        for (d, s) in dst.iter_mut().zip(src) {
            *d ^= *s;
        }
        return;
    }
    let lc = LOG[c.0 as usize] as usize;
    for (d, &s) in dst.iter_mut().zip(src) {
        if s != 0 {
            *d ^= EXP[lc + LOG[s as usize] as usize];
        }
    }
}

/// `buf[k] = c * buf[k]` for every byte.
pub fn scale_slice(buf: &mut [u8], c: Gf256) {
    for b in buf.iter_mut() {
        *b = gf_mul(Gf256(*b), c).0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_zero() {
        for x in 0..=255u8 {
            assert_eq!(gf_mul(Gf256(x), Gf256::ONE), Gf256(x));
            assert_eq!(gf_mul(Gf256(x), Gf256::ZERO), Gf256::ZERO);
            assert_eq!(Gf256(x) + Gf256(x), Gf256::ZERO);
        }
    }

    #[test]
    fn known_product() {
        // Classic AES example: {53}·{CA} = {01}.
        assert_eq!(gf_mul(Gf256(0x53), Gf256(0xCA)), Gf256(0x01));
        assert_eq!(mul_slow(0x57, 0x83), 0xC1);
    }

    #[test]
    fn every_nonzero_element_has_inverse() {
        for x in 1..=255u8 {
            let inv = Gf256(x).inverse().unwrap();
            assert_eq!(gf_mul(Gf256(x), inv), Gf256::ONE);
        }
        assert!(Gf256(0).inverse().is_none());
    }

    #[test]
    fn generator_is_primitive() {
        let mut seen = [false; 256];
        for &e in &EXP[..255] {
            assert!(!seen[e as usize]);
            seen[e as usize] = true;
        }
        assert!(!seen[0]);
    }

    #[test]
    fn slice_helpers() {
        let src = [1u8, 2, 0x53, 0];
        let mut dst = [0u8; 4];
        mul_add_slice(&mut dst, &src, Gf256(0xCA));
        for k in 0..4 {
            assert_eq!(dst[k], mul_slow(src[k], 0xCA));
        }
        let mut buf = src;
        scale_slice(&mut buf, Gf256(7));
        for k in 0..4 {
            assert_eq!(buf[k], mul_slow(src[k], 7));
        }
    }
}
