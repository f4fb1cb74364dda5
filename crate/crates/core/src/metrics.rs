//! Partition comparison.

use rustc_hash::FxHashMap;

fn entropy(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `2 I(a; b) / (H(a) + H(b))`. Two trivial
/// partitions are identical, so their NMI is 1.
pub fn nmi(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions of different sets");
    if a.is_empty() {
        return 1.0;
    }
    let n = a.len() as f64;
    let mut ca: FxHashMap<u32, u64> = FxHashMap::default();
    let mut cb: FxHashMap<u32, u64> = FxHashMap::default();
    let mut joint: FxHashMap<(u32, u32), u64> = FxHashMap::default();
    for (&x, &y) in a.iter().zip(b) {
        *ca.entry(x).or_insert(0) += 1;
        *cb.entry(y).or_insert(0) += 1;
        *joint.entry((x, y)).or_insert(0) += 1;
    }
    let ha = entropy(ca.values().copied(), n);
    let hb = entropy(cb.values().copied(), n);
    if ha + hb == 0.0 {
        return 1.0;
    }
    let hab = entropy(joint.values().copied(), n);
    (2.0 * (ha + hb - hab) / (ha + hb)).clamp(0.0, 1.0)
}
