//! Instance generators and independent brute-force oracles shared by the
//! integration tests. Oracles evaluate objectives straight from the rows
//! and curves, without going through the crate's `SetObjective` code.
#![allow(dead_code)]

use biasmax::{CategoryStructure, ConcaveCurve, GroupStructure, ObjectiveSpec, UtilityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CURVES: [ConcaveCurve; 7] = [
    ConcaveCurve::Linear,
    ConcaveCurve::Sqrt,
    ConcaveCurve::ScaledSqrt(2.5),
    ConcaveCurve::Log1p,
    ConcaveCurve::WeightedLog1p(0.7),
    ConcaveCurve::CubeRoot,
    ConcaveCurve::NegExpCoverage(0.8),
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense random rows in `[0, 1)`, with about a third of entries zeroed.
pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..m)
                .map(|_| if rng.random_bool(0.33) { 0.0 } else { rng.random::<f64>() })
                .collect()
        })
        .collect()
}

pub fn spec(rows: &[Vec<f64>], curve: ConcaveCurve) -> ObjectiveSpec {
    let m = rows[0].len();
    ObjectiveSpec::new(vec![curve; m], UtilityMatrix::from_rows(rows).unwrap()).unwrap()
}

pub fn random_groups(rng: &mut ChaCha8Rng, n: usize, p: usize) -> GroupStructure {
    let assignment = (0..n).map(|_| rng.random_range(0..p)).collect();
    GroupStructure::from_assignment(assignment, p).unwrap()
}

/// Each item in exactly one of `m` categories, and only that attribute
/// carries weight.
pub fn disjoint_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<Vec<f64>>, Vec<usize>, CategoryStructure) {
    let cat: Vec<usize> = (0..n).map(|i| if i < m { i } else { rng.random_range(0..m) }).collect();
    let rows = cat
        .iter()
        .map(|&c| {
            let mut r = vec![0.0; m];
            r[c] = rng.random_range(0.05..1.0);
            r
        })
        .collect();
    let sets = (0..m).map(|j| (0..n).filter(|&i| cat[i] == j).collect()).collect();
    (rows, cat.clone(), CategoryStructure::from_sets(n, sets).unwrap())
}

/// `Σ_j g(Σ_{i∈S} scale·rows[i][j])` computed directly.
pub fn direct_value(rows: &[Vec<f64>], curve: ConcaveCurve, subset: &[usize]) -> f64 {
    let m = rows[0].len();
    (0..m).map(|j| curve.eval(subset.iter().map(|&i| rows[i][j]).sum())).sum()
}

/// Maximum of `value` over subsets of `0..n` with at most `k` elements
/// accepted by `feasible`, by bitmask enumeration.
pub fn brute_max(n: usize, k: usize, value: impl Fn(&[usize]) -> f64, feasible: impl Fn(&[usize]) -> bool) -> f64 {
    assert!(n <= 24);
    let mut best = f64::NEG_INFINITY;
    let mut items = Vec::with_capacity(k);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize > k {
            continue;
        }
        items.clear();
        items.extend((0..n).filter(|i| mask >> i & 1 == 1));
        if feasible(&items) {
            best = best.max(value(&items));
        }
    }
    best
}

pub fn within_caps(groups: &GroupStructure, caps: &[usize], items: &[usize]) -> bool {
    let mut c = vec![0; caps.len()];
    for &i in items {
        c[groups.group_of(i)] += 1;
    }
    c.iter().zip(caps).all(|(a, b)| a <= b)
}
