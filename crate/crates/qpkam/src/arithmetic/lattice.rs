/// `|k|`, the l1 norm of a multi-index.
pub fn l1_norm(k: &[i64]) -> i64 {
    k.iter().map(|x| x.abs()).sum()
}

/// All `k` in `Z^d` with `|k| <= radius`, in lexicographic order.
pub fn lattice_ball(d: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; d];
    fill(&mut out, &mut cur, 0, radius);
    out
}

fn fill(out: &mut Vec<Vec<i64>>, cur: &mut Vec<i64>, j: usize, budget: i64) {
    if j == cur.len() {
        out.push(cur.clone());
        return;
    }
    for v in -budget..=budget {
        cur[j] = v;
        fill(out, cur, j + 1, budget - v.abs());
    }
    cur[j] = 0;
}

/// Representatives of `{k, -k}` pairs with `0 < |k| <= radius`: the first
/// nonzero coordinate is positive.
pub fn lattice_half_ball(d: usize, radius: i64) -> Vec<Vec<i64>> {
    lattice_ball(d, radius)
        .into_iter()
        .filter(|k| k.iter().find(|&&x| x != 0).map_or(false, |&x| x > 0))
        .collect()
}
