//! Group-dependent bias: observed utilities `Ŵ_ij = φ_ℓ(W_ij)` for `i ∈ G_ℓ`.
//!
//! A [`BiasSpec`] maps each group to an increasing transform, optionally
//! overridden per `(group, attribute)` pair for the extended model. Config
//! syntax (1-based ids):
//!
//! ```text
//! bias.1   = identity
//! bias.2   = multiplicative:0.01
//! bias.2.3 = identity          # attribute 3 of group 2 is not distorted
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::utility::UtilityMatrix;

/// Piecewise-linear increasing transform through strictly increasing
/// breakpoints; the first breakpoint sits at `x = 0` and the last segment is
/// extended linearly beyond the final breakpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneTable {
    points: Vec<(f64, f64)>,
}

impl MonotoneTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::input("a monotone table needs at least two breakpoints"));
        }
        if points[0].0 != 0.0 || points[0].1 < 0.0 {
            return Err(Error::input("the first breakpoint must be (0, y) with y ≥ 0"));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::input("breakpoints must be finite"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 <= w[0].1) {
            return Err(Error::input("breakpoints must be strictly increasing in x and y"));
        }
        Ok(Self { points })
    }

    fn eval(&self, x: f64) -> f64 {
        let seg = match self.points.iter().position(|p| p.0 > x) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => self.points.len() - 2,
        };
        let (x0, y0) = self.points[seg];
        let (x1, y1) = self.points[seg + 1];
        y0 + (x - x0) * (y1 - y0) / (x1 - x0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BiasFunction {
    Identity,
    /// `φ(z) = β·z`, `β > 0`.
    Multiplicative(f64),
    /// `φ(z) = z·(1 − x) + x`, `x ∈ [0, 1)`: scores pulled towards `x`.
    AffineSkew(f64),
    /// `φ(z) = z·h`, where `h > 0` is the dialect-dependent damping factor.
    TfIdfSkew(f64),
    Table(MonotoneTable),
    /// `[φ_1, φ_2, ..., φ_r]` means `φ_1 ∘ φ_2 ∘ ... ∘ φ_r`.
    Composed(Vec<BiasFunction>),
}

impl BiasFunction {
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            BiasFunction::Identity => z,
            BiasFunction::Multiplicative(b) => b * z,
            BiasFunction::AffineSkew(x) => z * (1.0 - x) + x,
            BiasFunction::TfIdfSkew(h) => z * h,
            BiasFunction::Table(t) => t.eval(z),
            BiasFunction::Composed(fs) => fs.iter().rev().fold(z, |acc, f| f.apply(acc)),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            BiasFunction::Identity => true,
            BiasFunction::Multiplicative(b) | BiasFunction::TfIdfSkew(b) => *b == 1.0,
            BiasFunction::AffineSkew(x) => *x == 0.0,
            BiasFunction::Table(_) => false,
            BiasFunction::Composed(fs) => fs.iter().all(BiasFunction::is_identity),
        }
    }

    /// `self ∘ inner`.
    pub fn compose(self, inner: BiasFunction) -> BiasFunction {
        match (self, inner) {
            (BiasFunction::Identity, f) | (f, BiasFunction::Identity) => f,
            (BiasFunction::Composed(mut a), BiasFunction::Composed(b)) => {
                a.extend(b);
                BiasFunction::Composed(a)
            }
            (BiasFunction::Composed(mut a), f) => {
                a.push(f);
                BiasFunction::Composed(a)
            }
            (f, BiasFunction::Composed(mut b)) => {
                b.insert(0, f);
                BiasFunction::Composed(b)
            }
            (f, g) => BiasFunction::Composed(vec![f, g]),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BiasFunction::Multiplicative(b) | BiasFunction::TfIdfSkew(b) if !(b.is_finite() && *b > 0.0) => {
                Err(Error::input(format!("bias factor must be positive, got {b}")))
            }
            BiasFunction::AffineSkew(x) if !(0.0..1.0).contains(x) => {
                Err(Error::input(format!("skew must lie in [0, 1), got {x}")))
            }
            BiasFunction::Composed(fs) => fs.iter().try_for_each(BiasFunction::validate),
            _ => Ok(()),
        }
    }

    /// Grid check: `φ(0) ≥ 0` and strictly increasing on `[0, max_x]`.
    pub fn check_increasing(&self, max_x: f64, steps: usize) -> Result<()> {
        self.validate()?;
        if self.apply(0.0) < 0.0 {
            return Err(Error::input(format!("{self}: φ(0) < 0")));
        }
        let mut prev = self.apply(0.0);
        for s in 1..=steps {
            let y = self.apply(max_x * s as f64 / steps as f64);
            if y <= prev {
                return Err(Error::input(format!("{self}: not increasing near step {s}")));
            }
            prev = y;
        }
        Ok(())
    }
}

impl fmt::Display for BiasFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BiasFunction::Identity => write!(f, "identity"),
            BiasFunction::Multiplicative(b) => write!(f, "multiplicative:{b}"),
            BiasFunction::AffineSkew(x) => write!(f, "affine_skew:{x}"),
            BiasFunction::TfIdfSkew(h) => write!(f, "tfidf_skew:{h}"),
            BiasFunction::Table(t) => {
                let pts: Vec<String> = t.points.iter().map(|(x, y)| format!("{x}/{y}")).collect();
                write!(f, "table:{}", pts.join(";"))
            }
            BiasFunction::Composed(fs) => {
                let parts: Vec<String> = fs.iter().map(ToString::to_string).collect();
                write!(f, "{}", parts.join(" o "))
            }
        }
    }
}

impl FromStr for BiasFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains(" o ") {
            let parts = s.split(" o ").map(str::parse).collect::<Result<Vec<_>>>()?;
            return Ok(BiasFunction::Composed(parts));
        }
        let (kind, param) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), Some(p.trim())),
            None => (s, None),
        };
        let real = || -> Result<f64> {
            let p = param.ok_or_else(|| Error::input(format!("bias `{kind}` needs a parameter")))?;
            p.parse().map_err(|_| Error::input(format!("bias parameter `{p}` is not a real")))
        };
        let f = match kind.to_ascii_lowercase().as_str() {
            "identity" => BiasFunction::Identity,
            "multiplicative" => BiasFunction::Multiplicative(real()?),
            "affine_skew" => BiasFunction::AffineSkew(real()?),
            "tfidf_skew" => BiasFunction::TfIdfSkew(real()?),
            "table" => {
                let p = param.ok_or_else(|| Error::input("bias `table` needs breakpoints"))?;
                let points = p
                    .split(';')
                    .map(|pt| {
                        let (x, y) = pt
                            .split_once('/')
                            .ok_or_else(|| Error::input(format!("breakpoint `{pt}` is not x/y")))?;
                        let parse = |v: &str| {
                            v.trim()
                                .parse::<f64>()
                                .map_err(|_| Error::input(format!("`{v}` is not a real")))
                        };
                        Ok((parse(x)?, parse(y)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                BiasFunction::Table(MonotoneTable::new(points)?)
            }
            other => return Err(Error::input(format!("unknown bias kind `{other}`"))),
        };
        f.validate()?;
        Ok(f)
    }
}

/// Bias transforms per group, with optional per-attribute overrides.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BiasSpec {
    per_group: BTreeMap<usize, BiasFunction>,
    per_attribute: BTreeMap<(usize, usize), BiasFunction>,
}

impl BiasSpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Identity for `G_1`, `φ(x) = β·x` for every other group.
    pub fn reference_multiplicative(p: usize, beta: f64) -> Self {
        let mut spec = Self::new();
        spec.set_group(0, BiasFunction::Identity);
        for g in 1..p {
            spec.set_group(g, BiasFunction::Multiplicative(beta));
        }
        spec
    }

    pub fn identity(p: usize) -> Self {
        let mut spec = Self::new();
        for g in 0..p {
            spec.set_group(g, BiasFunction::Identity);
        }
        spec
    }

    pub fn set_group(&mut self, group: usize, f: BiasFunction) -> &mut Self {
        self.per_group.insert(group, f);
        self
    }

    pub fn set_attribute(&mut self, group: usize, attr: usize, f: BiasFunction) -> &mut Self {
        self.per_attribute.insert((group, attr), f);
        self
    }

    pub fn lookup(&self, group: usize, attr: usize) -> Option<&BiasFunction> {
        self.per_attribute
            .get(&(group, attr))
            .or_else(|| self.per_group.get(&group))
    }

    /// Whether `G_1` (group 0) is undistorted on every attribute.
    pub fn reference_is_identity(&self, m: usize) -> bool {
        (0..m).all(|j| self.lookup(0, j).is_some_and(BiasFunction::is_identity))
    }

    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let mut spec = Self::new();
        for (key, value) in cfg.section("bias") {
            let ids = key
                .split('.')
                .map(|p| p.parse::<usize>().ok().filter(|&v| v >= 1))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::format(cfg.source(), format!("`bias.{key}`: ids must be 1-based integers")))?;
            let f: BiasFunction = value
                .parse()
                .map_err(|e: Error| Error::format(cfg.source(), format!("`bias.{key}`: {e}")))?;
            match ids.as_slice() {
                [g] => spec.set_group(g - 1, f),
                [g, a] => spec.set_attribute(g - 1, a - 1, f),
                _ => return Err(Error::format(cfg.source(), format!("`bias.{key}`: expected bias.<group>[.<attr>]"))),
            };
        }
        Ok(spec)
    }
}

/// Config lines (`bias.<g> = ...`, `bias.<g>.<a> = ...`, 1-based), readable
/// by [`BiasSpec::from_config`].
impl fmt::Display for BiasSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (g, func) in &self.per_group {
            writeln!(f, "bias.{} = {func}", g + 1)?;
        }
        for ((g, a), func) in &self.per_attribute {
            writeln!(f, "bias.{}.{} = {func}", g + 1, a + 1)?;
        }
        Ok(())
    }
}

/// `Ŵ_ij = φ_{ℓ(i), j}(W_ij)`. The latent matrix is left untouched.
pub fn apply_bias(
    latent: &UtilityMatrix,
    groups: &GroupStructure,
    bias: &BiasSpec,
) -> Result<UtilityMatrix> {
    if groups.n() != latent.n() {
        return Err(Error::input(format!(
            "partition covers {} items but the matrix has {}",
            groups.n(),
            latent.n()
        )));
    }
    for g in (0..groups.p()).filter(|&g| groups.sizes()[g] > 0) {
        for j in 0..latent.m() {
            if bias.lookup(g, j).is_none() {
                return Err(Error::config(format!(
                    "no bias transform for group {} attribute {}",
                    g + 1,
                    j + 1
                )));
            }
        }
    }
    let mut entries = Vec::with_capacity(latent.entries().len());
    for i in 0..latent.n() {
        let g = groups.group_of(i);
        for j in 0..latent.m() {
            let f = bias.lookup(g, j).expect("checked above");
            entries.push(f.apply(latent.get(i, j)));
        }
    }
    UtilityMatrix::new(latent.n(), latent.m(), entries)
}

/// Disjoint groups from overlapping memberships.
#[derive(Clone, Debug, PartialEq)]
pub struct IntersectionGroups {
    pub groups: GroupStructure,
    pub bias: BiasSpec,
    /// Raw-group membership set behind each intersection group.
    pub labels: Vec<Vec<usize>>,
}

pub const MAX_RAW_GROUPS: usize = 20;

/// Replaces overlapping groups by their nonempty intersections. Items with
/// identical membership sets share an intersection group; its transform is
/// the composition of the member groups' transforms (identity for items in
/// no group). Intersection groups are ordered by their membership sets, so
/// a partition that is already disjoint comes back unchanged.
pub fn reduce_overlapping_groups(
    memberships: &[Vec<usize>],
    bias: &BiasSpec,
) -> Result<IntersectionGroups> {
    let raw = memberships
        .iter()
        .flatten()
        .max()
        .map_or(0, |&g| g + 1);
    if raw > MAX_RAW_GROUPS {
        return Err(Error::input(format!(
            "{raw} raw groups exceed the limit of {MAX_RAW_GROUPS}"
        )));
    }
    let sets: Vec<Vec<usize>> = memberships
        .iter()
        .map(|m| m.iter().copied().collect::<BTreeSet<_>>().into_iter().collect())
        .collect();
    let distinct: Vec<Vec<usize>> = sets.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<&Vec<usize>, usize> = distinct.iter().enumerate().map(|(k, s)| (s, k)).collect();
    let assignment = sets.iter().map(|s| index[s]).collect();
    let groups = GroupStructure::from_assignment(assignment, distinct.len())?;

    let override_attrs: BTreeSet<usize> = bias.per_attribute.keys().map(|&(_, a)| a).collect();
    let compose = |set: &[usize], attr: Option<usize>| -> Result<BiasFunction> {
        set.iter().try_fold(BiasFunction::Identity, |acc, &g| {
            let f = match attr {
                Some(a) => bias.lookup(g, a),
                None => bias.per_group.get(&g),
            };
            f.cloned()
                .map(|f| acc.compose(f))
                .ok_or_else(|| Error::config(format!("no bias transform for raw group {}", g + 1)))
        })
    };
    let mut out = BiasSpec::new();
    for (k, set) in distinct.iter().enumerate() {
        out.set_group(k, compose(set, None)?);
        for &a in &override_attrs {
            if set.iter().any(|&g| bias.per_attribute.contains_key(&(g, a))) {
                out.set_attribute(k, a, compose(set, Some(a))?);
            }
        }
    }
    Ok(IntersectionGroups {
        groups,
        bias: out,
        labels: distinct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn spec_display_round_trips_through_config() {
        let mut spec = BiasSpec::reference_multiplicative(3, 0.25);
        spec.set_attribute(1, 0, BiasFunction::AffineSkew(0.5));
        let text = spec.to_string();
        let cfg = KvConfig::parse(&text, Path::new("bias.cfg")).unwrap();
        assert_eq!(BiasSpec::from_config(&cfg).unwrap(), spec);
    }

    #[test]
    fn multiplicative_halves() {
        let w = UtilityMatrix::from_rows(&[vec![4.0], vec![4.0]]).unwrap();
        let g = GroupStructure::from_assignment(vec![0, 1], 2).unwrap();
        let obs = apply_bias(&w, &g, &BiasSpec::reference_multiplicative(2, 0.5)).unwrap();
        assert_eq!(obs.get(0, 0), 4.0);
        assert_eq!(obs.get(1, 0), 2.0);
        assert_eq!(w.get(1, 0), 4.0);
    }

    #[test]
    fn affine_skew_fixes_one() {
        assert_eq!(BiasFunction::AffineSkew(0.25).apply(1.0), 1.0);
        assert_eq!(BiasFunction::AffineSkew(0.25).apply(0.0), 0.25);
    }

    #[test]
    fn missing_transform_is_a_config_error() {
        let w = UtilityMatrix::zeros(2, 1);
        let g = GroupStructure::from_assignment(vec![0, 1], 2).unwrap();
        let mut spec = BiasSpec::new();
        spec.set_group(0, BiasFunction::Identity);
        assert!(matches!(apply_bias(&w, &g, &spec), Err(Error::Config(_))));
        // an empty group needs no transform
        let g = GroupStructure::from_assignment(vec![0, 0], 2).unwrap();
        assert!(apply_bias(&w, &g, &spec).is_ok());
    }

    #[test]
    fn attribute_override_wins() {
        let cfg = KvConfig::parse(
            "bias.1 = identity\nbias.2 = multiplicative:0.1\nbias.2.2 = identity\n",
            Path::new("b"),
        )
        .unwrap();
        let spec = BiasSpec::from_config(&cfg).unwrap();
        let w = UtilityMatrix::from_rows(&[vec![10.0, 10.0], vec![10.0, 10.0]]).unwrap();
        let g = GroupStructure::from_assignment(vec![0, 1], 2).unwrap();
        let obs = apply_bias(&w, &g, &spec).unwrap();
        assert_eq!(obs.row(0), &[10.0, 10.0]);
        assert_eq!(obs.row(1), &[1.0, 10.0]);
        assert!(spec.reference_is_identity(2));
    }

    #[test]
    fn parse_round_trip() {
        for s in [
            "identity",
            "multiplicative:0.01",
            "affine_skew:0.25",
            "tfidf_skew:0.5",
            "table:0/0;1/2;3/5",
            "multiplicative:0.5 o affine_skew:0.1",
        ] {
            let f: BiasFunction = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
            f.check_increasing(10.0, 50).unwrap();
        }
        assert!("multiplicative:0".parse::<BiasFunction>().is_err());
        assert!("table:0/0;1/1;1/2".parse::<BiasFunction>().is_err());
        assert!("table:1/0;2/1".parse::<BiasFunction>().is_err());
    }

    #[test]
    fn table_interpolates_and_extends() {
        let f: BiasFunction = "table:0/0;1/2;3/3".parse().unwrap();
        assert_eq!(f.apply(0.5), 1.0);
        assert_eq!(f.apply(2.0), 2.5);
        assert_eq!(f.apply(5.0), 4.0);
    }

    #[test]
    fn two_overlapping_groups_give_four_intersections() {
        let mut spec = BiasSpec::new();
        spec.set_group(0, BiasFunction::Multiplicative(0.5));
        spec.set_group(1, BiasFunction::AffineSkew(0.2));
        let memberships = vec![vec![0, 1], vec![0], vec![1], vec![], vec![1, 0]];
        let red = reduce_overlapping_groups(&memberships, &spec).unwrap();
        assert_eq!(red.labels, vec![vec![], vec![0], vec![0, 1], vec![1]]);
        assert_eq!(red.groups.assignment(), &[2, 1, 3, 0, 2]);
        let z = 3.0;
        let both = red.bias.lookup(2, 0).unwrap().apply(z);
        assert_eq!(both, 0.5 * (z * 0.8 + 0.2));
        assert_eq!(red.bias.lookup(1, 0).unwrap().apply(z), 1.5);
        assert_eq!(red.bias.lookup(3, 0).unwrap().apply(z), z * 0.8 + 0.2);
        assert!(red.bias.lookup(0, 0).unwrap().is_identity());
    }

    #[test]
    fn disjoint_memberships_are_unchanged() {
        let spec = BiasSpec::reference_multiplicative(3, 0.3);
        let memberships = vec![vec![2], vec![0], vec![1], vec![0]];
        let red = reduce_overlapping_groups(&memberships, &spec).unwrap();
        assert_eq!(red.groups.assignment(), &[2, 0, 1, 0]);
        assert_eq!(red.bias, spec);
    }

    #[test]
    fn too_many_raw_groups() {
        let memberships = vec![vec![25]];
        assert!(reduce_overlapping_groups(&memberships, &BiasSpec::new()).is_err());
    }
}
