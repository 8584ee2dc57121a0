//! Synthetic datasets and adversarial two-group instances.
//!
//! Power-law draws are Pareto type I with minimum 1 and shape `δ`, scaled by
//! 1000. Every generator is a pure function of its parameters and seed.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Bernoulli, Distribution, Pareto};

use crate::bias::{apply_bias, BiasFunction, BiasSpec};
use crate::curve::ConcaveCurve;
use crate::error::{Error, Result};
use crate::groups::{sample_groups_with, two_group_sizes, CategoryStructure, GroupStructure};
use crate::objective::ObjectiveSpec;
use crate::rng::{stream, tag, Rng};
use crate::utility::UtilityMatrix;

pub const PARETO_SCALE: f64 = 1000.0;
/// Emerging-artist popularity draws are conditioned on `X ≤` this.
pub const EMERGING_CAP: f64 = 2.0;

/// A generated instance: latent and observed objectives plus structure.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub latent: ObjectiveSpec,
    pub observed: ObjectiveSpec,
    pub groups: GroupStructure,
    pub categories: CategoryStructure,
    pub bias: BiasSpec,
    /// Dataset 1: whether each item is from an emerging artist. Empty otherwise.
    pub emerging: Vec<bool>,
}

fn pareto(delta: f64) -> Result<Pareto<f64>> {
    Pareto::new(1.0, delta).map_err(|e| Error::input(format!("power-law exponent {delta}: {e}")))
}

fn check_fraction(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::input(format!("{name} must lie in [0, 1], got {x}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticParams1 {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub emerging_frac: f64,
    pub p_not_heard: f64,
    pub delta: f64,
    pub beta: f64,
    pub frac_g1: f64,
}

impl Default for SyntheticParams1 {
    fn default() -> Self {
        Self {
            n: 250,
            k: 50,
            lambda: 1.0 / 20.0,
            emerging_frac: 0.8,
            p_not_heard: 0.9,
            delta: 2.0,
            beta: 1.0,
            frac_g1: 0.5,
        }
    }
}

impl SyntheticParams1 {
    fn validate(&self) -> Result<()> {
        check_fraction("emerging fraction", self.emerging_frac)?;
        check_fraction("p_NH", self.p_not_heard)?;
        check_fraction("|G1|/n", self.frac_g1)?;
        if !(self.lambda > 0.0 && self.delta > 0.0 && self.beta > 0.0) {
            return Err(Error::input("λ, δ and β must be positive"));
        }
        Ok(())
    }
}

/// Latent matrix of dataset 1: popularity, emerging-artist indicator,
/// not-heard indicator. Returns the matrix and the emerging labels.
pub fn synthetic1_latent(params: &SyntheticParams1, rng: &mut Rng) -> Result<(UtilityMatrix, Vec<bool>)> {
    params.validate()?;
    let n = params.n;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut emerging = vec![false; n];
    for &i in &order[..(params.emerging_frac * n as f64 + 1e-9).floor() as usize] {
        emerging[i] = true;
    }
    let pop = pareto(params.delta)?;
    let heard = Bernoulli::new(params.p_not_heard).map_err(|e| Error::input(e.to_string()))?;
    let mut w = UtilityMatrix::zeros(n, 3);
    for (i, &em) in emerging.iter().enumerate() {
        let x = loop {
            let x = pop.sample(rng);
            if !em || x <= EMERGING_CAP {
                break x;
            }
        };
        w.set(i, 0, PARETO_SCALE * x);
        w.set(i, 1, if em { 1.0 } else { 0.0 });
        w.set(i, 2, if heard.sample(rng) { 1.0 } else { 0.0 });
    }
    Ok((w, emerging))
}

/// Dataset 1. Only the popularity attribute of `G₂` is distorted
/// (`φ(x) = βx`); categories are the latent supports and overlap.
pub fn gen_synthetic1(params: &SyntheticParams1, seed: u64) -> Result<SyntheticData> {
    let (w, emerging) = synthetic1_latent(params, &mut stream(seed, &[tag::UTILITIES]))?;
    let groups = sample_groups_with(
        params.n,
        &two_group_sizes(params.n, params.frac_g1),
        &mut stream(seed, &[tag::GROUPS]),
    )?;
    let mut bias = BiasSpec::identity(2);
    bias.set_attribute(1, 0, BiasFunction::Multiplicative(params.beta));
    let curves = vec![
        ConcaveCurve::Linear,
        ConcaveCurve::ScaledSqrt(params.lambda),
        ConcaveCurve::ScaledSqrt(params.lambda),
    ];
    let observed = apply_bias(&w, &groups, &bias)?;
    Ok(SyntheticData {
        categories: CategoryStructure::from_support(&w),
        latent: ObjectiveSpec::new(curves.clone(), w)?,
        observed: ObjectiveSpec::new(curves, observed)?,
        groups,
        bias,
        emerging,
    })
}

/// Latent matrix of dataset 2: each item lands in one of three categories
/// uniformly and carries a scaled power-law value there.
pub fn synthetic2_latent(n: usize, delta: f64, rng: &mut Rng) -> Result<UtilityMatrix> {
    let pop = pareto(delta)?;
    let mut w = UtilityMatrix::zeros(n, 3);
    for i in 0..n {
        let h = rng.random_range(0..3);
        w.set(i, h, PARETO_SCALE * pop.sample(rng));
    }
    Ok(w)
}

/// Dataset 2: log-coverage objective over three disjoint categories,
/// `φ₁ = id`, `φ₂(x) = βx` on every attribute.
pub fn gen_synthetic2(n: usize, delta: f64, frac_g1: f64, beta: f64, seed: u64) -> Result<SyntheticData> {
    check_fraction("|G1|/n", frac_g1)?;
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::input(format!("β must be positive, got {beta}")));
    }
    let w = synthetic2_latent(n, delta, &mut stream(seed, &[tag::UTILITIES]))?;
    let groups = sample_groups_with(n, &two_group_sizes(n, frac_g1), &mut stream(seed, &[tag::GROUPS]))?;
    let bias = BiasSpec::reference_multiplicative(2, beta);
    let curves = vec![ConcaveCurve::Log1p; 3];
    let observed = apply_bias(&w, &groups, &bias)?;
    Ok(SyntheticData {
        categories: CategoryStructure::from_support(&w),
        latent: ObjectiveSpec::new(curves.clone(), w)?,
        observed: ObjectiveSpec::new(curves, observed)?,
        groups,
        bias,
        emerging: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NegativeCase {
    A,
    B,
    C,
    D,
}

impl NegativeCase {
    pub const ALL: [NegativeCase; 4] = [NegativeCase::A, NegativeCase::B, NegativeCase::C, NegativeCase::D];

    /// Ratio bound `F(S_UV)/OPT ≤ threshold·ε` proven for the case.
    pub fn threshold_factor(self) -> f64 {
        match self {
            NegativeCase::B => 4.0,
            _ => 3.0,
        }
    }
}

impl fmt::Display for NegativeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NegativeCase::A => "A",
            NegativeCase::B => "B",
            NegativeCase::C => "C",
            NegativeCase::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for NegativeCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(NegativeCase::A),
            "B" => Ok(NegativeCase::B),
            "C" => Ok(NegativeCase::C),
            "D" => Ok(NegativeCase::D),
            other => Err(Error::input(format!("unknown case `{other}`, expected A, B, C or D"))),
        }
    }
}

/// A two-group instance on which fairness-constrained selection from
/// observed utilities loses almost all latent utility.
#[derive(Clone, Debug)]
pub struct NegativeInstance {
    pub case: NegativeCase,
    pub eps: f64,
    pub k: usize,
    pub n: usize,
    pub latent: ObjectiveSpec,
    pub gamma: [f64; 2],
    pub group_sizes: [usize; 2],
    pub beta: [f64; 2],
    /// Number of type-A items (the first rows of the matrix).
    pub type_a: usize,
    /// Exact maximum latent value over subsets of size at most `k`.
    pub opt: f64,
    /// Value the construction asserts for OPT: `k` (A, B) or `√k` (C, D).
    pub analytic_opt: f64,
}

impl NegativeInstance {
    pub fn bias(&self) -> BiasSpec {
        let mut spec = BiasSpec::new();
        spec.set_group(0, BiasFunction::Multiplicative(self.beta[0]));
        spec.set_group(1, BiasFunction::Multiplicative(self.beta[1]));
        spec
    }

    pub fn sample_groups(&self, rng: &mut Rng) -> Result<GroupStructure> {
        sample_groups_with(self.n, &self.group_sizes, rng)
    }

    pub fn observed(&self, groups: &GroupStructure) -> Result<ObjectiveSpec> {
        self.latent
            .with_utilities(apply_bias(self.latent.utilities(), groups, &self.bias())?)
    }

    /// `threshold_factor·ε`.
    pub fn threshold(&self) -> f64 {
        self.case.threshold_factor() * self.eps
    }
}

/// Builds the case's instance. The `B`-group bias defaults to `ε²` for
/// cases A and B and to `ε` for cases C and D.
pub fn gen_negative(case: NegativeCase, eps: f64, k: usize, n: usize) -> Result<NegativeInstance> {
    let beta2 = match case {
        NegativeCase::A | NegativeCase::B => eps * eps,
        NegativeCase::C | NegativeCase::D => eps,
    };
    gen_negative_with_beta(case, eps, k, n, beta2)
}

pub fn gen_negative_with_beta(
    case: NegativeCase,
    eps: f64,
    k: usize,
    n: usize,
    beta2: f64,
) -> Result<NegativeInstance> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Size(format!("ε must lie in (0, 1), got {eps}")));
    }
    if !(beta2 > 0.0 && beta2 <= 1.0) {
        return Err(Error::input(format!("β₂ must lie in (0, 1], got {beta2}")));
    }
    if k < 1 || n < 2 * k {
        return Err(Error::Size(format!("case {case} needs k ≥ 1 and n ≥ 2k, got k = {k}, n = {n}")));
    }
    let g1 = match case {
        NegativeCase::A => eps,
        NegativeCase::B => 1.0 - eps,
        NegativeCase::C => eps.powi(4),
        NegativeCase::D => eps.powi(3),
    };
    let s1 = (g1 * n as f64).round() as usize;
    let group_sizes = [s1, n - s1];
    let small = match case {
        NegativeCase::A => (0, s1),
        NegativeCase::B => (1, n - s1),
        _ => (0, s1),
    };
    let needed = match case {
        NegativeCase::A | NegativeCase::B => k,
        _ => 1,
    };
    if small.1 < needed {
        return Err(Error::Size(format!(
            "case {case} with ε = {eps}: group {} has {} items but needs at least {needed}; \
             use n ≥ {}",
            small.0 + 1,
            small.1,
            (needed as f64 / if case == NegativeCase::B { eps } else { g1 }).ceil()
        )));
    }

    let (latent, type_a, analytic_opt) = match case {
        NegativeCase::A | NegativeCase::B => {
            let entries = (0..n).map(|i| if i < k { 1.0 } else { eps }).collect();
            let w = UtilityMatrix::new(n, 1, entries)?;
            (ObjectiveSpec::new(vec![ConcaveCurve::Linear], w)?, k, k as f64)
        }
        NegativeCase::C | NegativeCase::D => {
            let type_a = if case == NegativeCase::C { n / 2 } else { k };
            let weight = if case == NegativeCase::C { eps } else { eps.powi(3) };
            let mut w = UtilityMatrix::zeros(n, 2);
            for i in 0..n {
                w.set(i, if i < type_a { 0 } else { 1 }, 1.0);
            }
            let curves = vec![ConcaveCurve::CubeRoot, ConcaveCurve::ScaledSqrt(weight)];
            (ObjectiveSpec::new(curves, w)?, type_a, (k as f64).sqrt())
        }
    };
    let opt = match case {
        NegativeCase::A | NegativeCase::B => k as f64,
        _ => {
            let curves = latent.curves();
            (0..=k.min(type_a))
                .map(|a| {
                    let b = (k - a).min(n - type_a);
                    curves[0].eval(a as f64) + curves[1].eval(b as f64)
                })
                .fold(0.0, f64::max)
        }
    };
    Ok(NegativeInstance {
        case,
        eps,
        k,
        n,
        latent,
        gamma: [s1 as f64 / n as f64, (n - s1) as f64 / n as f64],
        group_sizes,
        beta: [1.0, beta2],
        type_a,
        opt,
        analytic_opt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::SetObjective;

    #[test]
    fn case_a_layout() {
        let inst = gen_negative(NegativeCase::A, 0.1, 5, 100).unwrap();
        let w = inst.latent.utilities();
        assert!((0..5).all(|i| w.get(i, 0) == 1.0));
        assert!((5..100).all(|i| w.get(i, 0) == 0.1));
        assert_eq!(inst.beta, [1.0, 0.1 * 0.1]);
        assert_eq!(inst.group_sizes, [10, 90]);
        assert_eq!(inst.opt, 5.0);
    }

    #[test]
    fn case_a_observed_ordering() {
        let inst = gen_negative(NegativeCase::A, 0.1, 5, 100).unwrap();
        let g = inst.sample_groups(&mut stream(3, &[])).unwrap();
        let obs = inst.observed(&g).unwrap();
        let lo1 = g.members(0).iter().map(|&i| obs.weight(i, 0)).fold(f64::INFINITY, f64::min);
        let hi2 = g.members(1).iter().map(|&i| obs.weight(i, 0)).fold(0.0, f64::max);
        assert!(lo1 > hi2);
    }

    #[test]
    fn case_c_curves_and_opt() {
        let inst = gen_negative(NegativeCase::C, 0.5, 4, 16).unwrap();
        assert_eq!(inst.latent.curves(), &[ConcaveCurve::CubeRoot, ConcaveCurve::ScaledSqrt(0.5)]);
        assert_eq!(inst.type_a, 8);
        for c in inst.latent.curves() {
            c.check_shape(100.0, 40).unwrap();
        }
        let (_, best) = crate::maximizers::exhaustive_opt(&inst.latent, 4, |_| true).unwrap();
        assert!((best - inst.opt).abs() < 1e-12);
    }

    #[test]
    fn minima_are_size_errors() {
        assert!(matches!(gen_negative(NegativeCase::A, 0.1, 50, 100), Err(Error::Size(_))));
        assert!(matches!(gen_negative(NegativeCase::A, 1.5, 5, 100), Err(Error::Size(_))));
        assert!(matches!(gen_negative(NegativeCase::C, 0.1, 5, 100), Err(Error::Size(_))));
    }

    #[test]
    fn synthetic1_shape() {
        let data = gen_synthetic1(&SyntheticParams1 { beta: 0.5, ..Default::default() }, 11).unwrap();
        let w = data.latent.utilities();
        let emerging = (0..250).filter(|&i| w.get(i, 1) == 1.0).count();
        assert_eq!(emerging, 200);
        for i in 0..250 {
            assert!(w.get(i, 0) >= PARETO_SCALE);
            if data.emerging[i] {
                assert!(w.get(i, 0) <= PARETO_SCALE * EMERGING_CAP);
            }
            let obs = data.observed.utilities();
            assert_eq!(obs.get(i, 1), w.get(i, 1));
            assert_eq!(obs.get(i, 2), w.get(i, 2));
        }
        assert!(!data.categories.is_disjoint());
    }

    #[test]
    fn synthetic2_is_disjoint_and_reproducible() {
        let a = gen_synthetic2(300, 2.0, 0.5, 0.1, 5).unwrap();
        let b = gen_synthetic2(300, 2.0, 0.5, 0.1, 5).unwrap();
        assert!(a.categories.is_disjoint());
        assert_eq!(a.latent, b.latent);
        assert_eq!(a.groups, b.groups);
        assert!(a.latent.utilities().entries().iter().all(|&x| x == 0.0 || x >= PARETO_SCALE));
    }
}
