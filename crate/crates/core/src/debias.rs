//! Debiased selection with a reference group.
//!
//! Part 1 estimates how the budget should split across categories using only
//! the reference group `G₁`, whose observed utilities are undistorted: it
//! maximizes the rescaled objective
//! `F̃(T) = Σ_j g_j((n/|G₁|)·Σ_{i∈T∩G₁} Ŵ_ij)` over subsets of `G₁`, seeding
//! every category with `⌈√k⌉` items, and apportions `k` in proportion to how
//! many chosen items fall in each category.
//!
//! Part 2 then fills each category's budget greedily on observed utilities,
//! with per-group caps proportional to the group's share of the category.

use crate::curve::ConcaveCurve;
use crate::error::{Error, Result};
use crate::groups::{CategoryStructure, GroupStructure, CAP_TIE_EPS};
use crate::maximizers::{greedy_extend, Flag, Flags, SelectionResult};
use crate::objective::{ObjectiveSpec, SetObjective};
use crate::utility::UtilityMatrix;

/// Group id of the reference group.
pub const REFERENCE_GROUP: usize = 0;

/// Per-category budgets and how they were obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetVector {
    /// `k_j`, summing to `k`.
    pub budgets: Vec<usize>,
    /// `|S̃ ∩ C_j|`.
    pub counts: Vec<usize>,
    /// `n/|G₁|`.
    pub scale: f64,
    /// `⌊k·|G₁|/n⌋`.
    pub target: usize,
    /// Real-valued shares `k·counts_j/Σ counts` before rounding.
    pub quotas: Vec<f64>,
    /// `S̃`, in selection order (seeds first).
    pub reference_set: Vec<usize>,
    /// Number of seeded items at the front of `reference_set`.
    pub seeded: usize,
    pub flags: Flags,
}

impl BudgetVector {
    pub fn total(&self) -> usize {
        self.budgets.iter().sum()
    }
}

/// `F̃` restricted to the reference group.
#[derive(Clone, Debug)]
pub struct RescaledObjective<'a> {
    observed: &'a UtilityMatrix,
    curves: &'a [ConcaveCurve],
    in_reference: Vec<bool>,
    scale: f64,
}

impl RescaledObjective<'_> {
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

pub fn rescaled_objective<'a>(
    observed: &'a ObjectiveSpec,
    groups: &GroupStructure,
) -> Result<RescaledObjective<'a>> {
    let n = observed.num_items();
    if groups.n() != n {
        return Err(Error::input(format!("partition covers {} items, objective {n}", groups.n())));
    }
    let size = groups.sizes()[REFERENCE_GROUP];
    if size == 0 {
        return Err(Error::config("the reference group is empty"));
    }
    Ok(RescaledObjective {
        observed: observed.utilities(),
        curves: observed.curves(),
        in_reference: (0..n).map(|i| groups.group_of(i) == REFERENCE_GROUP).collect(),
        scale: n as f64 / size as f64,
    })
}

impl SetObjective for RescaledObjective<'_> {
    fn num_items(&self) -> usize {
        self.observed.n()
    }

    fn num_attributes(&self) -> usize {
        self.observed.m()
    }

    fn weight(&self, item: usize, attr: usize) -> f64 {
        if self.in_reference[item] {
            self.scale * self.observed.get(item, attr)
        } else {
            0.0
        }
    }

    fn curve_value(&self, attr: usize, total: f64) -> f64 {
        self.curves[attr].eval(total)
    }

    /// `Σ_j g_j(scale · Σ Ŵ_ij)`, scaling after summation.
    fn value_unchecked(&self, subset: &[usize]) -> f64 {
        let mut items: Vec<usize> = subset.iter().copied().filter(|&i| self.in_reference[i]).collect();
        items.sort_unstable();
        (0..self.observed.m()).fold(0.0, |acc, j| {
            let raw = items.iter().fold(0.0, |s, &i| s + self.observed.get(i, j));
            acc + self.curves[j].eval(self.scale * raw)
        })
    }
}

/// Largest-remainder apportionment of `total` by nonnegative `weights`.
/// Ties go to the lower index. Afterwards every positive weight receives at
/// least one unit when `total` allows, taken from the largest allocation.
/// All-zero weights yield all-zero allocations.
pub fn apportion(total: usize, weights: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return (vec![0; weights.len()], vec![0.0; weights.len()]);
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let given: usize = alloc.iter().sum();
    for &j in order.iter().take(total.saturating_sub(given)) {
        alloc[j] += 1;
    }
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if positive <= total {
        for j in 0..weights.len() {
            if weights[j] > 0.0 && alloc[j] == 0 {
                let donor = (0..alloc.len())
                    .filter(|&d| alloc[d] >= 2)
                    .max_by(|&a, &b| alloc[a].cmp(&alloc[b]).then(b.cmp(&a)));
                if let Some(d) = donor {
                    alloc[d] -= 1;
                    alloc[j] += 1;
                }
            }
        }
    }
    (alloc, quotas)
}

fn check_inputs(
    observed: &ObjectiveSpec,
    k: usize,
    groups: &GroupStructure,
    categories: &CategoryStructure,
) -> Result<()> {
    let n = observed.num_items();
    if k < 1 || k > n {
        return Err(Error::input(format!("budget k = {k} must lie in 1..={n}")));
    }
    if groups.n() != n || categories.n() != n {
        return Err(Error::input("groups, categories and utilities disagree on n"));
    }
    if categories.m() != observed.num_attributes() {
        return Err(Error::input(format!(
            "{} categories for {} attributes",
            categories.m(),
            observed.num_attributes()
        )));
    }
    Ok(())
}

/// Part 1: `S̃ ⊆ G₁` and the apportioned budgets.
pub fn part1_budgets(
    observed: &ObjectiveSpec,
    k: usize,
    groups: &GroupStructure,
    categories: &CategoryStructure,
) -> Result<BudgetVector> {
    check_inputs(observed, k, groups, categories)?;
    let n = observed.num_items();
    let rescaled = rescaled_objective(observed, groups)?;
    let reference = groups.members(REFERENCE_GROUP);
    let target = k * reference.len() / n;
    if target == 0 {
        return Err(Error::config(format!(
            "k = {k} is too small: ⌊k·|G₁|/n⌋ = 0 with |G₁| = {}",
            reference.len()
        )));
    }
    let mut flags = Flags::default();
    if !categories.is_disjoint() {
        flags.insert(Flag::NonDisjoint);
    }

    let seed_cap = (k as f64).sqrt().ceil() as usize;
    let singleton: Vec<f64> = (0..n)
        .map(|i| if groups.group_of(i) == REFERENCE_GROUP { rescaled.value_unchecked(&[i]) } else { 0.0 })
        .collect();
    let mut chosen = vec![false; n];
    let mut seeds = Vec::new();
    for j in 0..categories.m() {
        let mut pool: Vec<usize> = categories
            .members(j)
            .iter()
            .copied()
            .filter(|&i| groups.group_of(i) == REFERENCE_GROUP)
            .collect();
        let quota = seed_cap.min(pool.len());
        pool.retain(|&i| !chosen[i]);
        pool.sort_by(|&a, &b| singleton[b].total_cmp(&singleton[a]).then(a.cmp(&b)));
        for &i in pool.iter().take(quota) {
            chosen[i] = true;
            seeds.push(i);
        }
    }
    let seeded = seeds.len();
    if seeded > target {
        flags.insert(Flag::SeedsOverflow);
    }
    let attrs: Vec<usize> = (0..observed.num_attributes()).collect();
    let (reference_set, _) = greedy_extend(&rescaled, &attrs, &reference, seeds, target, None);

    let counts: Vec<usize> = (0..categories.m())
        .map(|j| reference_set.iter().filter(|&&i| categories.contains(j, i)).count())
        .collect();
    let weights: Vec<f64> = if counts.iter().any(|&c| c > 0) {
        counts.iter().map(|&c| c as f64).collect()
    } else {
        // no chosen item has positive utility anywhere: fall back to category sizes
        (0..categories.m()).map(|j| categories.members(j).len() as f64).collect()
    };
    let (budgets, quotas) = apportion(k, &weights);
    Ok(BudgetVector {
        budgets,
        counts,
        scale: rescaled.scale(),
        target,
        quotas,
        reference_set,
        seeded,
        flags,
    })
}

/// Per-group caps for one category: `⌊k·|G_ℓ∩C_j|/n⌋`, raised one unit at a
/// time until `k_j` is reachable from the available items. Each increment
/// goes to the group whose share `k_j·|G_ℓ∩C_j|/|C_j|` exceeds its cap the
/// most, among groups with items to spare. Returns the caps and whether any
/// increment happened.
pub fn category_caps(
    k: usize,
    n: usize,
    k_j: usize,
    members: &[usize],
    available: &[usize],
    groups: &GroupStructure,
) -> (Vec<usize>, bool) {
    let p = groups.p();
    let mut in_cat = vec![0usize; p];
    for &i in members {
        in_cat[groups.group_of(i)] += 1;
    }
    let mut avail = vec![0usize; p];
    for &i in available {
        avail[groups.group_of(i)] += 1;
    }
    let mut caps: Vec<usize> = in_cat
        .iter()
        .map(|&c| (k as f64 * c as f64 / n as f64 + CAP_TIE_EPS).floor() as usize)
        .collect();
    let share: Vec<f64> = in_cat
        .iter()
        .map(|&c| if members.is_empty() { 0.0 } else { k_j as f64 * c as f64 / members.len() as f64 })
        .collect();
    let mut relaxed = false;
    loop {
        let reachable: usize = caps.iter().zip(&avail).map(|(&c, &a)| c.min(a)).sum();
        if reachable >= k_j {
            break;
        }
        let pick = (0..p)
            .filter(|&g| caps[g] < avail[g])
            .max_by(|&a, &b| {
                let (da, db) = (share[a] - caps[a] as f64, share[b] - caps[b] as f64);
                da.total_cmp(&db).then(b.cmp(&a))
            });
        match pick {
            Some(g) => {
                caps[g] += 1;
                relaxed = true;
            }
            None => break,
        }
    }
    (caps, relaxed)
}

/// Part 2: per-category greedy on observed utilities under group caps.
/// Categories are processed in order and items already taken by an earlier
/// category are skipped, which only matters when categories overlap.
pub fn part2_select(
    observed: &ObjectiveSpec,
    budgets: &BudgetVector,
    groups: &GroupStructure,
    categories: &CategoryStructure,
) -> Result<SelectionResult> {
    let n = observed.num_items();
    let k = budgets.total();
    if budgets.budgets.len() != categories.m() || groups.n() != n || categories.n() != n {
        return Err(Error::input("budgets, categories and groups disagree in shape"));
    }
    let mut taken = vec![false; n];
    let mut subset = Vec::with_capacity(k);
    let mut assigned = Vec::with_capacity(k);
    let mut flags = budgets.flags.clone();
    for j in 0..categories.m() {
        let k_j = budgets.budgets[j];
        if k_j == 0 {
            continue;
        }
        let members = categories.members(j);
        let available: Vec<usize> = members.iter().copied().filter(|&i| !taken[i]).collect();
        let (caps, relaxed) = category_caps(k, n, k_j, members, &available, groups);
        if relaxed {
            flags.insert(Flag::CapsRelaxed);
        }
        let (picked, _) = greedy_extend(observed, &[j], &available, Vec::new(), k_j, Some((groups, &caps)));
        for i in picked {
            taken[i] = true;
            subset.push(i);
            assigned.push(Some(j));
        }
    }
    let mut res = SelectionResult::build(observed, groups, subset, assigned);
    if res.subset.len() < k {
        flags.insert(Flag::BudgetUnmet);
    }
    res.flags = flags;
    res.budgets = Some(budgets.clone());
    Ok(res)
}

/// Both parts. Group 0 is the reference group and is assumed undistorted.
pub fn algorithm1(
    observed: &ObjectiveSpec,
    k: usize,
    groups: &GroupStructure,
    categories: &CategoryStructure,
) -> Result<SelectionResult> {
    let budgets = part1_budgets(observed, k, groups, categories)?;
    part2_select(observed, &budgets, groups, categories)
}
