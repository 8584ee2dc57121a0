//! Concave-over-modular objectives `F(S) = Σ_j g_j(Σ_{i∈S} W_ij)`.
//!
//! Every routine in the crate evaluates objectives through [`SetObjective`],
//! which exposes the modular weights and the per-attribute curves
//! separately. That split lets greedy scans keep running attribute totals
//! instead of re-evaluating whole subsets, while exact oracles still go
//! through [`SetObjective::value`].
//!
//! Attribute totals accumulate in ascending item order so that values are
//! bit-reproducible regardless of how a subset was assembled.

use std::path::Path;

use crate::config::KvConfig;
use crate::curve::ConcaveCurve;
use crate::error::{Error, Result};
use crate::groups::CategoryStructure;
use crate::utility::UtilityMatrix;

/// Probability-one relevance is clamped to `1 − COVERAGE_CLAMP` before the
/// `ln(1/(1−p))` transform.
pub const COVERAGE_CLAMP: f64 = 1e-12;

/// A set function of the concave-over-modular form.
pub trait SetObjective: Sync {
    fn num_items(&self) -> usize;
    fn num_attributes(&self) -> usize;
    /// Modular contribution of `item` to the total of attribute `attr`.
    fn weight(&self, item: usize, attr: usize) -> f64;
    /// `g_attr(total)`.
    fn curve_value(&self, attr: usize, total: f64) -> f64;

    /// Value of a validated subset (distinct, in range). Totals accumulate
    /// in ascending item order.
    fn value_unchecked(&self, subset: &[usize]) -> f64 {
        let mut items = subset.to_vec();
        items.sort_unstable();
        (0..self.num_attributes())
            .map(|j| {
                let total = items.iter().fold(0.0, |acc, &i| acc + self.weight(i, j));
                self.curve_value(j, total)
            })
            .fold(0.0, |acc, v| acc + v)
    }

    fn value(&self, subset: &[usize]) -> Result<f64> {
        check_subset(subset, self.num_items())?;
        Ok(self.value_unchecked(subset))
    }

    /// `F(S ∪ {item}) − F(S)`.
    fn marginal_gain(&self, subset: &[usize], item: usize) -> Result<f64> {
        check_subset(subset, self.num_items())?;
        if item >= self.num_items() {
            return Err(Error::input(format!("item {item} out of range 0..{}", self.num_items())));
        }
        if subset.contains(&item) {
            return Err(Error::input(format!("item {item} is already in the subset")));
        }
        let mut with = subset.to_vec();
        with.push(item);
        Ok(self.value_unchecked(&with) - self.value_unchecked(subset))
    }
}

pub(crate) fn check_subset(subset: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::input(format!("item {i} out of range 0..{n}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::input(format!("item {i} appears twice")));
        }
    }
    Ok(())
}

/// An objective in the family: one curve per attribute plus a utility matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveSpec {
    curves: Vec<ConcaveCurve>,
    utilities: UtilityMatrix,
}

impl ObjectiveSpec {
    pub fn new(curves: Vec<ConcaveCurve>, utilities: UtilityMatrix) -> Result<Self> {
        if curves.len() != utilities.m() {
            return Err(Error::input(format!(
                "{} curves for {} attributes",
                curves.len(),
                utilities.m()
            )));
        }
        Ok(Self { curves, utilities })
    }

    /// Same curves over a different matrix of the same width.
    pub fn with_utilities(&self, utilities: UtilityMatrix) -> Result<Self> {
        Self::new(self.curves.clone(), utilities)
    }

    pub fn curves(&self) -> &[ConcaveCurve] {
        &self.curves
    }

    pub fn utilities(&self) -> &UtilityMatrix {
        &self.utilities
    }

    /// Web-search coverage objective `Σ_j Pr[j|q]·(1 − Π_{i∈S}(1 − Pr[i|j,q]))`.
    /// `relevance` holds `Pr[i|j,q]` entries in `[0,1]`.
    pub fn coverage(priors: &[f64], relevance: &UtilityMatrix) -> Result<Self> {
        if relevance.entries().iter().any(|&p| p > 1.0) {
            return Err(Error::input("relevance probabilities must lie in [0,1]"));
        }
        let entries = relevance
            .entries()
            .iter()
            .map(|&p| -(1.0 - p).max(COVERAGE_CLAMP).ln())
            .collect();
        let w = UtilityMatrix::new(relevance.n(), relevance.m(), entries)?;
        let curves = priors
            .iter()
            .map(|&p| {
                let c = ConcaveCurve::NegExpCoverage(p);
                c.check_shape(1.0, 2).map(|_| c)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(curves, w)
    }

    /// Per-category contributions `F(S ∩ C_j)`; they sum to `F(S)` when the
    /// categories are disjoint and cover the positive support of `W`.
    pub fn decompose_by_category(
        &self,
        categories: &CategoryStructure,
        subset: &[usize],
    ) -> Result<Vec<f64>> {
        check_subset(subset, self.utilities.n())?;
        if !categories.is_disjoint() {
            return Err(Error::Precondition("categories are not disjoint".into()));
        }
        if categories.m() != self.utilities.m() {
            return Err(Error::input(format!(
                "{} categories for {} attributes",
                categories.m(),
                self.utilities.m()
            )));
        }
        for i in 0..self.utilities.n() {
            for j in 0..self.utilities.m() {
                if self.utilities.get(i, j) > 0.0 && !categories.contains(j, i) {
                    return Err(Error::Precondition(format!(
                        "item {i} has positive utility on attribute {j} but is not in category {j}"
                    )));
                }
            }
        }
        Ok((0..categories.m())
            .map(|j| {
                let part: Vec<usize> =
                    subset.iter().copied().filter(|&i| categories.contains(j, i)).collect();
                self.value_unchecked(&part)
            })
            .collect())
    }

    /// Reads `curve.<j> = <kind>[:<param>]` lines (1-based `j`) for `m` attributes.
    pub fn curves_from_config(cfg: &KvConfig, m: usize) -> Result<Vec<ConcaveCurve>> {
        let mut curves: Vec<Option<ConcaveCurve>> = vec![None; m];
        for (key, value) in cfg.section("curve") {
            let j: usize = key.parse().ok().filter(|j| (1..=m).contains(j)).ok_or_else(|| {
                Error::format(cfg.source(), format!("`curve.{key}`: attribute must be in 1..={m}"))
            })?;
            curves[j - 1] = Some(
                value
                    .parse()
                    .map_err(|e: Error| Error::format(cfg.source(), format!("`curve.{key}`: {e}")))?,
            );
        }
        curves
            .into_iter()
            .enumerate()
            .map(|(j, c)| {
                c.ok_or_else(|| Error::format(cfg.source(), format!("missing `curve.{}`", j + 1)))
            })
            .collect()
    }

    pub fn load(utilities: &Path, curves: &Path) -> Result<Self> {
        let w = UtilityMatrix::read_csv(utilities)?;
        let cfg = KvConfig::load(curves)?;
        let curves = Self::curves_from_config(&cfg, w.m())?;
        Self::new(curves, w)
    }
}

impl SetObjective for ObjectiveSpec {
    fn num_items(&self) -> usize {
        self.utilities.n()
    }

    fn num_attributes(&self) -> usize {
        self.utilities.m()
    }

    #[inline]
    fn weight(&self, item: usize, attr: usize) -> f64 {
        self.utilities.get(item, attr)
    }

    #[inline]
    fn curve_value(&self, attr: usize, total: f64) -> f64 {
        self.curves[attr].eval(total)
    }
}

/// Convenience wrapper: `F(S)` for an [`ObjectiveSpec`].
pub fn eval_objective(spec: &ObjectiveSpec, subset: &[usize]) -> Result<f64> {
    spec.value(subset)
}

pub fn marginal_gain(spec: &ObjectiveSpec, subset: &[usize], item: usize) -> Result<f64> {
    spec.marginal_gain(subset, item)
}
