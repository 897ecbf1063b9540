use std::cmp::Ordering;
use std::collections::HashSet;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use super::cf::ContinuedFraction;
use super::hpreal::ln_bigint;
use super::ArithError;

/// Compare `x` with `y^e` for positive integers `x, y` and real `e > 0`.
///
/// Logarithms decide clear cases; near-ties with an integer exponent fall
/// back to exact big-integer powers.
pub fn cmp_pow(x: &BigInt, y: &BigInt, e: f64) -> Ordering {
    let lx = ln_bigint(x);
    let ly = ln_bigint(y);
    let diff = lx - e * ly;
    let scale = 1.0 + lx.abs() + (e * ly).abs();
    if diff.abs() > 1e-9 * scale {
        return if diff > 0.0 { Ordering::Greater } else { Ordering::Less };
    }
    if e.fract() == 0.0 && e <= 4096.0 {
        return x.cmp(&y.pow(e as u32));
    }
    diff.partial_cmp(&0.0).unwrap_or(Ordering::Equal)
}

/// Subsequence `Q_j = q_{n_j}`, `Qbar_j = q_{n_j + 1}` of denominators.
#[derive(Debug, Clone, Serialize)]
pub struct BridgeSelection {
    pub a_param: f64,
    pub indices: Vec<usize>,
    #[serde(serialize_with = "ser_big")]
    pub q: Vec<BigInt>,
    #[serde(serialize_with = "ser_big")]
    pub q_bar: Vec<BigInt>,
    pub u_estimate: f64,
}

fn ser_big<S: serde::Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&x.to_string())?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BridgeViolation {
    FirstNotOne,
    NotIncreasing { j: usize },
    GrowthCap { j: usize },
    NeitherJumpNorBridges { j: usize },
}

struct Denoms<'a> {
    q: &'a [BigInt],
    a: f64,
    jump: Vec<bool>,
}

impl<'a> Denoms<'a> {
    fn new(q: &'a [BigInt], a: f64) -> Self {
        let jump = (0..q.len().saturating_sub(1)).map(|n| cmp_pow(&q[n + 1], &q[n], a) != Ordering::Less).collect();
        Denoms { q, a, jump }
    }

    /// `(q_l, q_n)` is a CD(A, A, A^3) bridge.
    fn bridge(&self, l: usize, n: usize) -> bool {
        if n < l {
            return false;
        }
        let steps_ok = (l..n).all(|j| cmp_pow(&self.q[j + 1], &self.q[j], self.a) != Ordering::Greater);
        steps_ok
            && cmp_pow(&self.q[n], &self.q[l], self.a) != Ordering::Less
            && cmp_pow(&self.q[n], &self.q[l], self.a.powi(3)) != Ordering::Greater
    }

    fn transition(&self, from: usize, to: usize) -> bool {
        if to <= from || to + 1 >= self.q.len() {
            return false;
        }
        if cmp_pow(&self.q[to], &self.q[from + 1], self.a.powi(4)) == Ordering::Greater {
            return false;
        }
        if !self.jump[from] && !self.bridge(from, to) {
            return false;
        }
        if !self.jump[to] && !self.bridge(from + 1, to) {
            return false;
        }
        true
    }

    /// No successor exists inside the data, but one could exist beyond it.
    fn open_ended(&self, n: usize) -> bool {
        let last = self.q.len() - 1;
        if n + 1 >= last {
            return true;
        }
        if cmp_pow(&self.q[last], &self.q[n + 1], self.a.powi(4)) == Ordering::Greater {
            return false;
        }
        if self.jump[n] {
            return true;
        }
        (n..last).all(|j| cmp_pow(&self.q[j + 1], &self.q[j], self.a) != Ordering::Greater)
            && cmp_pow(&self.q[last], &self.q[n], self.a.powi(3)) != Ordering::Greater
    }
}

/// Select the working subsequence of denominators with parameter `A`.
///
/// Depth-first search over admissible successors (jump indices first, then
/// bridge indices from the far end), memoising dead ends. If the data does
/// not admit a selection reaching its end, the longest admissible prefix is
/// returned; [`validate_bridges`] reports on it independently.
pub fn select_cd_bridges(cf: &ContinuedFraction, a_param: f64) -> Result<BridgeSelection, ArithError> {
    let q = cf.denominators();
    if q.len() < 3 {
        return Err(ArithError::TooFewConvergents(q.len()));
    }
    if !(a_param >= 2.0) {
        return Err(ArithError::InvalidArgument("A must be >= 2".into()));
    }
    let d = Denoms::new(q, a_param);
    let mut dead: HashSet<usize> = HashSet::new();
    let mut best: Vec<usize> = vec![0];
    let mut path = vec![0usize];
    let complete = dfs(&d, &mut path, &mut dead, &mut best);
    let indices = if complete { path } else { best };
    let qs: Vec<BigInt> = indices.iter().map(|&n| q[n].clone()).collect();
    let qbar: Vec<BigInt> = indices.iter().map(|&n| q[n + 1].clone()).collect();
    let u = sup_lnln_ratio(&qs);
    Ok(BridgeSelection { a_param, indices, q: qs, q_bar: qbar, u_estimate: u })
}

fn dfs(d: &Denoms, path: &mut Vec<usize>, dead: &mut HashSet<usize>, best: &mut Vec<usize>) -> bool {
    let n = *path.last().unwrap();
    if path.len() > best.len() || (path.len() == best.len() && n > *best.last().unwrap()) {
        *best = path.clone();
    }
    let last = d.q.len() - 1;
    let mut jumps = Vec::new();
    let mut bridges = Vec::new();
    for m in n + 1..last {
        if d.transition(n, m) {
            if d.jump[m] {
                jumps.push(m);
            } else {
                bridges.push(m);
            }
        }
    }
    if jumps.is_empty() && bridges.is_empty() {
        return d.open_ended(n);
    }
    bridges.reverse();
    for m in jumps.into_iter().chain(bridges) {
        if dead.contains(&m) {
            continue;
        }
        path.push(m);
        if dfs(d, path, dead, best) {
            return true;
        }
        path.pop();
        dead.insert(m);
    }
    false
}

/// `sup ln ln Q_{j+1} / ln Q_j` over consecutive pairs with `Q_j > 1`;
/// negative `ln ln` terms are clamped at 0.
fn sup_lnln_ratio(q: &[BigInt]) -> f64 {
    let one = BigInt::one();
    let mut best: f64 = 0.0;
    for w in q.windows(2) {
        if w[0] <= one {
            continue;
        }
        let lnln = ln_bigint(&w[1]).ln().max(0.0);
        best = best.max(lnln / ln_bigint(&w[0]));
    }
    best
}

/// `sup_n ln ln q_{n+1} / ln q_n` over the stored denominators (clamped).
pub fn u_tilde(cf: &ContinuedFraction) -> f64 {
    sup_lnln_ratio(cf.denominators())
}

/// Check a selection against the definition, pair by pair.
pub fn validate_bridges(cf: &ContinuedFraction, sel: &BridgeSelection) -> Vec<BridgeViolation> {
    let q = cf.denominators();
    let a = sel.a_param;
    let d = Denoms::new(q, a);
    let idx = &sel.indices;
    let mut out = Vec::new();
    if idx.is_empty() || q[idx[0]].to_u64() != Some(1) {
        out.push(BridgeViolation::FirstNotOne);
    }
    for j in 0..idx.len() {
        if j + 1 < idx.len() {
            if idx[j + 1] <= idx[j] {
                out.push(BridgeViolation::NotIncreasing { j });
                continue;
            }
            if cmp_pow(&q[idx[j + 1]], &q[idx[j] + 1], a.powi(4)) == Ordering::Greater {
                out.push(BridgeViolation::GrowthCap { j });
            }
        }
        if j == 0 {
            continue;
        }
        let n = idx[j];
        let is_jump = cmp_pow(&q[n + 1], &q[n], a) != Ordering::Less;
        if is_jump {
            continue;
        }
        let back = d.bridge(idx[j - 1] + 1, n);
        let fwd = if j + 1 < idx.len() { d.bridge(n, idx[j + 1]) } else { true };
        if !(back && fwd) {
            out.push(BridgeViolation::NeitherJumpNorBridges { j });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cmp_pow_exact_ties() {
        let x = BigInt::from(81);
        let y = BigInt::from(3);
        assert_eq!(cmp_pow(&x, &y, 4.0), Ordering::Equal);
        assert_eq!(cmp_pow(&(x.clone() + 1), &y, 4.0), Ordering::Greater);
        assert_eq!(cmp_pow(&(x - 1), &y, 4.0), Ordering::Less);
    }

    #[test]
    fn fibonacci_selection_validates() {
        let cf = ContinuedFraction::from_u64(&[1; 40]);
        let sel = select_cd_bridges(&cf, 4.0).unwrap();
        assert!(validate_bridges(&cf, &sel).is_empty(), "{:?}", sel.indices);
        assert!(sel.indices.len() >= 3);
    }

    #[test]
    fn large_quotient_appears_as_qbar() {
        let mut qs = vec![1u64; 10];
        qs.push(1_000_000_000);
        qs.extend([1u64; 5]);
        let cf = ContinuedFraction::from_u64(&qs);
        let sel = select_cd_bridges(&cf, 4.0).unwrap();
        assert!(validate_bridges(&cf, &sel).is_empty());
        assert!(sel.q_bar.contains(cf.q(11)));
    }

    #[test]
    fn too_few() {
        let cf = ContinuedFraction::from_u64(&[2]);
        assert!(matches!(select_cd_bridges(&cf, 4.0), Err(ArithError::TooFewConvergents(2))));
    }
}
