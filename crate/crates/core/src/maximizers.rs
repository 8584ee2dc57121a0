//! Greedy maximizers and exact oracles.
//!
//! All greedy scans pick the feasible item with the largest marginal gain,
//! breaking ties by the lowest item id, and keep selecting when every gain
//! is zero. Gains are computed from running attribute totals.

use std::collections::BTreeSet;
use std::fmt;

use crate::debias::BudgetVector;
use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::objective::{check_subset, ObjectiveSpec, SetObjective};

/// Largest `C(n, k)` the exhaustive oracle accepts.
pub const EXHAUSTIVE_LIMIT: f64 = 1e7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flag {
    /// Fewer than `k` items were selected.
    BudgetUnmet,
    /// Part-1 seeding alone exceeded the reference-group target.
    SeedsOverflow,
    /// Categories overlap; the per-category guarantees do not apply.
    NonDisjoint,
    /// Part-2 caps had to be raised above their floors to reach a category budget.
    CapsRelaxed,
    /// The candidate pool is smaller than `k`.
    KExceedsPool,
    /// The trial failed; values are not meaningful.
    Failed,
}

impl Flag {
    pub fn name(self) -> &'static str {
        match self {
            Flag::BudgetUnmet => "budget_unmet",
            Flag::SeedsOverflow => "seeds_overflow",
            Flag::NonDisjoint => "non_disjoint",
            Flag::CapsRelaxed => "caps_relaxed",
            Flag::KExceedsPool => "k_exceeds_pool",
            Flag::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Flags(BTreeSet<Flag>);

impl Flags {
    pub fn insert(&mut self, flag: Flag) {
        self.0.insert(flag);
    }

    pub fn contains(&self, flag: Flag) -> bool {
        self.0.contains(&flag)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn extend(&mut self, other: &Flags) {
        self.0.extend(other.0.iter().copied());
    }

    pub fn iter(&self) -> impl Iterator<Item = Flag> + '_ {
        self.0.iter().copied()
    }
}

/// Semicolon-separated flag names, empty when no flag is set.
impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|g| g.name()).collect();
        f.write_str(&names.join(";"))
    }
}

/// A selection and its audit trail.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    /// Items in the order they were selected.
    pub subset: Vec<usize>,
    /// Category each item was selected for, when the algorithm works per category.
    pub categories: Vec<Option<usize>>,
    pub observed_value: f64,
    pub latent_value: Option<f64>,
    pub group_counts: Vec<usize>,
    pub budgets: Option<BudgetVector>,
    pub flags: Flags,
}

impl SelectionResult {
    pub(crate) fn build(
        observed: &dyn SetObjective,
        groups: &GroupStructure,
        subset: Vec<usize>,
        categories: Vec<Option<usize>>,
    ) -> Self {
        Self {
            observed_value: observed.value_unchecked(&subset),
            group_counts: groups.counts(&subset),
            subset,
            categories,
            latent_value: None,
            budgets: None,
            flags: Flags::default(),
        }
    }

    /// Fills in `latent_value` by evaluating the subset on `latent`.
    pub fn score_latent(&mut self, latent: &dyn SetObjective) -> Result<f64> {
        let v = latent.value(&self.subset)?;
        self.latent_value = Some(v);
        Ok(v)
    }

    pub fn sorted_subset(&self) -> Vec<usize> {
        let mut s = self.subset.clone();
        s.sort_unstable();
        s
    }
}

/// Greedy extension of `start` over `candidates` (ascending ids) until
/// `target` items are held or no candidate is feasible. Gains are summed
/// over `attrs` only. Returns the full selection and the running value
/// after each addition.
pub(crate) fn greedy_extend<O: SetObjective + ?Sized>(
    obj: &O,
    attrs: &[usize],
    candidates: &[usize],
    start: Vec<usize>,
    target: usize,
    caps: Option<(&GroupStructure, &[usize])>,
) -> (Vec<usize>, Vec<f64>) {
    let mut totals = vec![0.0; obj.num_attributes()];
    let mut taken = vec![false; obj.num_items()];
    let mut used = caps.map(|(g, _)| vec![0usize; g.p()]);
    for &i in &start {
        taken[i] = true;
        for &j in attrs {
            totals[j] += obj.weight(i, j);
        }
        if let (Some(u), Some((g, _))) = (used.as_mut(), caps) {
            u[g.group_of(i)] += 1;
        }
    }
    let mut current: Vec<f64> = attrs.iter().map(|&j| obj.curve_value(j, totals[j])).collect();
    let mut picked = start;
    let mut trace = Vec::new();
    while picked.len() < target {
        let mut best: Option<(usize, f64)> = None;
        for &i in candidates {
            if taken[i] {
                continue;
            }
            if let (Some(u), Some((g, c))) = (used.as_ref(), caps) {
                let gi = g.group_of(i);
                if u[gi] >= c[gi] {
                    continue;
                }
            }
            let mut gain = 0.0;
            for (a, &j) in attrs.iter().enumerate() {
                let w = obj.weight(i, j);
                if w != 0.0 {
                    gain += obj.curve_value(j, totals[j] + w) - current[a];
                }
            }
            if best.is_none_or(|(_, b)| gain > b) {
                best = Some((i, gain));
            }
        }
        let Some((i, _)) = best else { break };
        taken[i] = true;
        for (a, &j) in attrs.iter().enumerate() {
            totals[j] += obj.weight(i, j);
            current[a] = obj.curve_value(j, totals[j]);
        }
        if let (Some(u), Some((g, _))) = (used.as_mut(), caps) {
            u[g.group_of(i)] += 1;
        }
        picked.push(i);
        trace.push(current.iter().sum());
    }
    (picked, trace)
}

/// Standard greedy under `|S| ≤ k`.
pub fn greedy_cardinality(spec: &ObjectiveSpec, k: usize) -> Result<SelectionResult> {
    greedy_cardinality_on(spec, k)
}

/// [`greedy_cardinality`] for any [`SetObjective`]; the result carries a
/// single-group partition.
pub fn greedy_cardinality_on<O: SetObjective>(obj: &O, k: usize) -> Result<SelectionResult> {
    if k < 1 {
        return Err(Error::input("budget k must be at least 1"));
    }
    let n = obj.num_items();
    let attrs: Vec<usize> = (0..obj.num_attributes()).collect();
    let candidates: Vec<usize> = (0..n).collect();
    let (picked, _) = greedy_extend(obj, &attrs, &candidates, Vec::new(), k, None);
    let mut res = SelectionResult::build(obj, &GroupStructure::single(n), picked, vec![]);
    res.categories = vec![None; res.subset.len()];
    if res.subset.len() < k {
        res.flags.insert(Flag::BudgetUnmet);
    }
    Ok(res)
}

/// Greedy under `|S| ≤ k` and `|S ∩ G_ℓ| ≤ caps_ℓ`. Selects
/// `min(k, Σ_ℓ min(caps_ℓ, |G_ℓ|))` items and flags `budget_unmet` when that
/// is below `k`.
pub fn greedy_with_caps(
    spec: &ObjectiveSpec,
    k: usize,
    groups: &GroupStructure,
    caps: &[usize],
) -> Result<SelectionResult> {
    if caps.len() != groups.p() {
        return Err(Error::input(format!("{} caps for {} groups", caps.len(), groups.p())));
    }
    if groups.n() != spec.num_items() {
        return Err(Error::input(format!(
            "partition covers {} items but the objective has {}",
            groups.n(),
            spec.num_items()
        )));
    }
    let attrs: Vec<usize> = (0..spec.num_attributes()).collect();
    let candidates: Vec<usize> = (0..spec.num_items()).collect();
    let (picked, _) = greedy_extend(spec, &attrs, &candidates, Vec::new(), k, Some((groups, caps)));
    let n_picked = picked.len();
    let mut res = SelectionResult::build(spec, groups, picked, vec![None; n_picked]);
    if n_picked < k {
        res.flags.insert(Flag::BudgetUnmet);
    }
    Ok(res)
}

/// Running objective values of a greedy run, one per selected item.
pub fn greedy_trace(spec: &ObjectiveSpec, k: usize) -> Vec<f64> {
    let attrs: Vec<usize> = (0..spec.num_attributes()).collect();
    let candidates: Vec<usize> = (0..spec.num_items()).collect();
    greedy_extend(spec, &attrs, &candidates, Vec::new(), k, None).1
}

/// `C(n, k)` as a float, exact for the magnitudes the size check cares about.
pub fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact maximum over feasible subsets of size at most `k`, by depth-first
/// enumeration in lexicographic order; the lexicographically smallest
/// maximizer wins ties. Returns the ascending subset and its value.
pub fn exhaustive_opt<O, P>(obj: &O, k: usize, feasible: P) -> Result<(Vec<usize>, f64)>
where
    O: SetObjective + ?Sized,
    P: Fn(&[usize]) -> bool,
{
    let n = obj.num_items();
    let kk = k.min(n);
    if binomial(n, kk) > EXHAUSTIVE_LIMIT {
        return Err(Error::Size(format!(
            "exhaustive search over C({n}, {kk}) subsets exceeds {EXHAUSTIVE_LIMIT}"
        )));
    }
    let m = obj.num_attributes();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut stack: Vec<usize> = Vec::with_capacity(kk);
    // totals[d] holds the attribute sums of the first d items on the stack
    let mut totals = vec![vec![0.0; m]; kk + 1];

    fn visit<O: SetObjective + ?Sized, P: Fn(&[usize]) -> bool>(
        obj: &O,
        kk: usize,
        feasible: &P,
        stack: &mut Vec<usize>,
        totals: &mut [Vec<f64>],
        best: &mut Option<(Vec<usize>, f64)>,
    ) {
        let d = stack.len();
        if feasible(stack) {
            let v = (0..obj.num_attributes()).fold(0.0, |acc, j| acc + obj.curve_value(j, totals[d][j]));
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                *best = Some((stack.clone(), v));
            }
        }
        if d == kk {
            return;
        }
        let from = stack.last().map_or(0, |&l| l + 1);
        for i in from..obj.num_items() {
            let (head, tail) = totals.split_at_mut(d + 1);
            for (j, t) in tail[0].iter_mut().enumerate() {
                *t = head[d][j] + obj.weight(i, j);
            }
            stack.push(i);
            visit(obj, kk, feasible, stack, totals, best);
            stack.pop();
        }
    }

    visit(obj, kk, &feasible, &mut stack, &mut totals, &mut best);
    Ok(best.unwrap_or((Vec::new(), 0.0)))
}

/// Feasibility predicate for per-group caps.
pub fn caps_feasible<'a>(groups: &'a GroupStructure, caps: &'a [usize]) -> impl Fn(&[usize]) -> bool + 'a {
    move |s: &[usize]| {
        let mut used = vec![0usize; caps.len()];
        s.iter().all(|&i| {
            let g = groups.group_of(i);
            used[g] += 1;
            used[g] <= caps[g]
        })
    }
}

/// Exact cap-constrained observed optimum of a two-type, two-group instance.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoTypeSolution {
    /// `(a₁, a₂, b₁, b₂)`: items taken from `A∩G₁, A∩G₂, B∩G₁, B∩G₂`.
    pub counts: [usize; 4],
    /// Ascending item ids realizing `counts` (lowest ids in each cell).
    pub subset: Vec<usize>,
    pub observed_value: f64,
    pub latent_value: f64,
}

/// Maximizes the observed objective subject to `|S| ≤ k` and group caps on
/// instances whose items come in two latent types, `A` (the type of item 0)
/// and `B`, split across two groups.
///
/// Every type × group cell must be homogeneous in observed utility, and the
/// observed `B` rows of the two groups must be proportional. The objective
/// then depends on `b₁, b₂` only through `Y = c₁b₁ + c₂b₂` along a fixed
/// direction and is nondecreasing in `Y`, so for each `(a₁, a₂)` the best
/// completion fills the `B` cell with the larger factor first. That leaves
/// an `O(k²)` scan.
pub fn two_type_exact_opt(
    latent: &ObjectiveSpec,
    observed: &ObjectiveSpec,
    groups: &GroupStructure,
    caps: &[usize],
    k: usize,
) -> Result<TwoTypeSolution> {
    let n = latent.num_items();
    let m = latent.num_attributes();
    if groups.p() != 2 || caps.len() != 2 || groups.n() != n || observed.num_items() != n {
        return Err(Error::input("two-type search needs two groups, two caps, and matching sizes"));
    }
    if n == 0 {
        return Ok(TwoTypeSolution { counts: [0; 4], subset: vec![], observed_value: 0.0, latent_value: 0.0 });
    }
    let w = latent.utilities();
    let wh = observed.utilities();
    let row_a = w.row(0);
    let row_b = (0..n).map(|i| w.row(i)).find(|r| *r != row_a);
    // cells[type * 2 + group]
    let mut cells: [Vec<usize>; 4] = Default::default();
    for i in 0..n {
        let t = if w.row(i) == row_a {
            0
        } else if Some(w.row(i)) == row_b {
            1
        } else {
            return Err(Error::input(format!("item {i} has a third distinct latent row")));
        };
        cells[t * 2 + groups.group_of(i)].push(i);
    }
    let mut obs_rows: [Option<&[f64]>; 4] = [None; 4];
    for (c, members) in cells.iter().enumerate() {
        if let Some(&first) = members.first() {
            if members.iter().any(|&i| wh.row(i) != wh.row(first)) {
                return Err(Error::input(format!("type/group cell {c} is not homogeneous in observed utility")));
            }
            obs_rows[c] = Some(wh.row(first));
        }
    }
    let zero = vec![0.0; m];
    let row = |c: usize| obs_rows[c].unwrap_or(&zero);
    // factor of each B cell along the common direction of the B rows
    let (b_dir, b_factor) = {
        let (r1, r2) = (row(2), row(3));
        let base = if r1.iter().any(|&x| x > 0.0) { r1 } else { r2 };
        let pivot = base.iter().position(|&x| x > 0.0);
        let factor = |r: &[f64]| -> Result<f64> {
            let Some(p) = pivot else { return Ok(0.0) };
            let c = r[p] / base[p];
            let proportional = r
                .iter()
                .zip(base)
                .all(|(&x, &y)| (x - c * y).abs() <= 1e-12 * x.abs().max(c * y).max(1e-300));
            if proportional {
                Ok(c)
            } else {
                Err(Error::input("observed type-B rows of the two groups are not proportional"))
            }
        };
        (base.to_vec(), [factor(r1)?, factor(r2)?])
    };
    let b_order = if b_factor[1] > b_factor[0] { [1, 0] } else { [0, 1] };

    let value_of = |counts: &[usize; 4]| -> f64 {
        (0..m).fold(0.0, |acc, j| {
            let total = counts[0] as f64 * row(0)[j]
                + counts[1] as f64 * row(1)[j]
                + (counts[2] as f64 * b_factor[0] + counts[3] as f64 * b_factor[1]) * b_dir[j];
            acc + observed.curve_value(j, total)
        })
    };
    let mut best: Option<([usize; 4], f64)> = None;
    for a1 in 0..=cells[0].len().min(caps[0]).min(k) {
        for a2 in 0..=cells[1].len().min(caps[1]).min(k - a1) {
            let mut counts = [a1, a2, 0, 0];
            let mut left = k - a1 - a2;
            for g in b_order {
                let room = cells[2 + g].len().min(caps[g] - counts[g]).min(left);
                counts[2 + g] = room;
                left -= room;
            }
            let v = value_of(&counts);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((counts, v));
            }
        }
    }
    let (counts, _) = best.expect("the empty selection is always feasible");
    let mut subset: Vec<usize> = (0..4).flat_map(|c| cells[c][..counts[c]].iter().copied()).collect();
    subset.sort_unstable();
    check_subset(&subset, n)?;
    Ok(TwoTypeSolution {
        counts,
        observed_value: observed.value_unchecked(&subset),
        latent_value: latent.value_unchecked(&subset),
        subset,
    })
}
