//! Extended-precision helpers over `dashu-float`.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::IBig;
use num_bigint::BigInt;

/// Binary big float with round-half-even.
pub type XFloat = FBig<HalfEven, 2>;

pub fn to_ibig(x: &BigInt) -> IBig {
    x.to_string().parse().expect("decimal integer")
}

pub fn from_ibig(x: &IBig) -> BigInt {
    x.to_string().parse().expect("decimal integer")
}

pub fn xf_int(x: &BigInt, precision: usize) -> XFloat {
    XFloat::from(to_ibig(x)).with_precision(precision).value()
}

pub fn xf_f64(x: f64, precision: usize) -> XFloat {
    XFloat::try_from(x).expect("finite f64").with_precision(precision).value()
}

pub fn xf_to_f64(x: &XFloat) -> f64 {
    x.to_f64().value()
}

/// `floor(x)` as a big integer.
pub fn xf_floor(x: &XFloat) -> BigInt {
    from_ibig(&x.floor().to_int().value())
}

/// Working precision (bits) for a quantity of about `magnitude_bits`
/// integer bits plus a fractional guard.
pub fn guard_precision(magnitude_bits: f64) -> usize {
    (magnitude_bits.max(0.0) as usize) + 128
}

/// `floor(c * e^q)` for a positive integer `q`.
pub fn floor_c_exp(c: u64, q: &BigInt) -> BigInt {
    let qf: f64 = q.to_string().parse().unwrap();
    let prec = guard_precision(qf * std::f64::consts::LOG2_E + 64.0);
    let e = xf_int(q, prec).exp();
    xf_floor(&(e * xf_int(&BigInt::from(c), prec)))
}

/// `floor(c * q^chi)` and whether the value is an exact integer.
pub fn floor_c_pow(c: u64, q: &BigInt, chi: f64) -> (BigInt, bool) {
    if chi.fract() == 0.0 && chi >= 0.0 {
        return (BigInt::from(c) * q.pow(chi as u32), true);
    }
    let lq = super::hpreal::ln_bigint(q);
    let prec = guard_precision(chi * lq / std::f64::consts::LN_2 + 64.0);
    let x = xf_int(q, prec).ln() * xf_f64(chi, prec);
    (xf_floor(&(x.exp() * xf_int(&BigInt::from(c), prec))), false)
}
