use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A real number known to within an explicit radius: the true value lies in
/// `[value - radius, value + radius]`. A zero radius means the value is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct HpReal {
    pub value: BigRational,
    pub radius: BigRational,
    pub precision_bits: Option<u32>,
}

pub(crate) fn pow2(bits: u32) -> BigInt {
    BigInt::one() << bits as usize
}

impl HpReal {
    pub fn exact(value: BigRational) -> Self {
        HpReal { value, radius: BigRational::zero(), precision_bits: None }
    }

    /// `value` with an uncertainty of `2^-bits`.
    pub fn with_bits(value: BigRational, bits: u32) -> Self {
        HpReal { value, radius: BigRational::new(BigInt::one(), pow2(bits)), precision_bits: Some(bits) }
    }

    /// Exact binary value of an `f64`, with uncertainty one ulp at 52 bits.
    pub fn from_f64(x: f64) -> Self {
        let value = BigRational::from_float(x).expect("finite f64");
        let bits = 52 - x.abs().log2().floor().min(0.0) as i32;
        HpReal::with_bits(value, bits.max(1) as u32)
    }

    /// `sqrt(n)` to `bits` fractional bits (floor of the scaled root).
    pub fn sqrt(n: u64, bits: u32) -> Self {
        let scaled = BigUint::from(n) << (2 * bits as usize);
        let root = BigInt::from(scaled.sqrt());
        HpReal::with_bits(BigRational::new(root, pow2(bits)), bits)
    }

    /// The golden mean `(sqrt 5 - 1)/2`.
    pub fn golden_mean(bits: u32) -> Self {
        let s = HpReal::sqrt(5, bits + 1);
        let value = (s.value - BigRational::one()) / BigRational::from_integer(BigInt::from(2));
        HpReal::with_bits(value, bits)
    }

    /// `e - 2` from the factorial series, tail bounded by `2/(m+1)!`.
    pub fn e_minus_2(bits: u32) -> Self {
        let target = pow2(bits + 2);
        let mut sum = BigRational::zero();
        let mut fact = BigInt::one();
        let mut k: u64 = 1;
        loop {
            k += 1;
            fact *= BigInt::from(k);
            sum += BigRational::new(BigInt::one(), fact.clone());
            if fact > target {
                break;
            }
        }
        HpReal::with_bits(sum, bits)
    }

    pub fn lo(&self) -> BigRational {
        &self.value - &self.radius
    }

    pub fn hi(&self) -> BigRational {
        &self.value + &self.radius
    }

    pub fn is_exact(&self) -> bool {
        self.radius.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.value)
    }
}

/// Nearest-ish `f64` of a big rational without overflowing intermediate
/// conversions.
pub fn rational_to_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let sign = if x.is_negative() { -1.0 } else { 1.0 };
    let n = x.numer().abs();
    let d = x.denom().clone();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    // scale so the integer quotient carries ~64 significant bits
    let shift = 64 - (nb - db);
    let q = if shift >= 0 { (n << shift as usize) / d } else { n / (d << (-shift) as usize) };
    let qf = q.to_f64().unwrap_or(f64::INFINITY);
    sign * qf * 2f64.powi(-shift as i32)
}

/// Natural log of a positive big rational, robust to huge numerators and
/// denominators.
pub fn ln_rational(x: &BigRational) -> f64 {
    assert!(x.is_positive(), "ln of non-positive rational");
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

pub fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (n >> shift as usize).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}
