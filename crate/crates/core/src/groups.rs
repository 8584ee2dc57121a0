//! Protected groups, attribute categories and `(u, v)` fairness caps.
//!
//! Groups partition the items; categories are (possibly overlapping) item
//! sets, one per attribute. Group and category ids are 0-based in memory and
//! 1-based in files.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::utility::UtilityMatrix;

/// Slack added before flooring `(u + vγ)·k`.
pub const CAP_TIE_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupStructure {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
}

impl GroupStructure {
    pub fn from_assignment(assignment: Vec<usize>, p: usize) -> Result<Self> {
        let mut sizes = vec![0; p];
        for (i, &g) in assignment.iter().enumerate() {
            if g >= p {
                return Err(Error::input(format!("item {i} assigned to group {g} ≥ p = {p}")));
            }
            sizes[g] += 1;
        }
        Ok(Self { assignment, sizes })
    }

    /// All items in group 0.
    pub fn single(n: usize) -> Self {
        Self {
            assignment: vec![0; n],
            sizes: vec![n],
        }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn p(&self) -> usize {
        self.sizes.len()
    }

    #[inline]
    pub fn group_of(&self, item: usize) -> usize {
        self.assignment[item]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// `γ_ℓ = |G_ℓ| / n`.
    pub fn gamma(&self, group: usize) -> f64 {
        self.sizes[group] as f64 / self.n() as f64
    }

    pub fn gamma_min(&self) -> f64 {
        (0..self.p()).map(|g| self.gamma(g)).fold(f64::INFINITY, f64::min)
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] == group).collect()
    }

    /// `|S ∩ G_ℓ|` for every group.
    pub fn counts(&self, subset: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.p()];
        for &i in subset {
            c[self.assignment[i]] += 1;
        }
        c
    }

    /// Groups CSV: header `item,group`, 1-based ids, one row per item.
    pub fn read_csv(path: &Path, n: usize) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(file, path, n)
    }

    pub fn read_csv_from<R: Read>(reader: R, path: &Path, n: usize) -> Result<Self> {
        let pairs = read_pairs(reader, path, ["item", "group"])?;
        let mut assignment = vec![usize::MAX; n];
        let mut p = 0;
        for (item, group) in pairs {
            if item == 0 || item > n || group == 0 {
                return Err(Error::format(path, format!("bad row item={item} group={group}")));
            }
            if assignment[item - 1] != usize::MAX {
                return Err(Error::format(path, format!("item {item} listed twice")));
            }
            assignment[item - 1] = group - 1;
            p = p.max(group);
        }
        if let Some(i) = assignment.iter().position(|&g| g == usize::MAX) {
            return Err(Error::format(path, format!("item {} has no group", i + 1)));
        }
        Self::from_assignment(assignment, p)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["item", "group"])?;
        for (i, g) in self.assignment.iter().enumerate() {
            w.write_record([(i + 1).to_string(), (g + 1).to_string()])?;
        }
        w.flush()
    }
}

/// Uniform random partition with the given group sizes: `G_1` takes `sizes[0]`
/// items drawn without replacement, `G_2` the next `sizes[1]` from the rest,
/// and so on.
pub fn sample_groups_with(n: usize, sizes: &[usize], rng: &mut Rng) -> Result<GroupStructure> {
    if sizes.iter().sum::<usize>() != n {
        return Err(Error::input(format!(
            "group sizes {sizes:?} sum to {} but n = {n}",
            sizes.iter().sum::<usize>()
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut assignment = vec![0; n];
    let mut pos = 0;
    for (g, &s) in sizes.iter().enumerate() {
        for &i in &perm[pos..pos + s] {
            assignment[i] = g;
        }
        pos += s;
    }
    GroupStructure::from_assignment(assignment, sizes.len())
}

pub fn sample_groups(n: usize, sizes: &[usize], seed: u64) -> Result<GroupStructure> {
    sample_groups_with(n, sizes, &mut rng::stream(seed, &[rng::tag::GROUPS]))
}

/// Two-group sizes `(round(frac·n), n − round(frac·n))`.
pub fn two_group_sizes(n: usize, frac_g1: f64) -> [usize; 2] {
    let g1 = ((frac_g1 * n as f64).round() as usize).min(n);
    [g1, n - g1]
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoryStructure {
    n: usize,
    members: Vec<Vec<usize>>,
    of_item: Vec<Vec<usize>>,
    disjoint: bool,
}

impl CategoryStructure {
    pub fn from_sets(n: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut of_item = vec![Vec::new(); n];
        let mut members = Vec::with_capacity(sets.len());
        for (j, mut set) in sets.into_iter().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&bad) = set.iter().find(|&&i| i >= n) {
                return Err(Error::input(format!("category {j} lists item {bad} ≥ n = {n}")));
            }
            for &i in &set {
                of_item[i].push(j);
            }
            members.push(set);
        }
        let disjoint = of_item.iter().all(|c| c.len() <= 1);
        Ok(Self {
            n,
            members,
            of_item,
            disjoint,
        })
    }

    /// `C_j = {i : W_ij > 0}`.
    pub fn from_support(w: &UtilityMatrix) -> Self {
        let sets = (0..w.m())
            .map(|j| (0..w.n()).filter(|&i| w.get(i, j) > 0.0).collect())
            .collect();
        Self::from_sets(w.n(), sets).expect("support sets are in range")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.members.len()
    }

    pub fn is_disjoint(&self) -> bool {
        self.disjoint
    }

    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    /// Categories containing `item`, ascending.
    pub fn of_item(&self, item: usize) -> &[usize] {
        &self.of_item[item]
    }

    pub fn contains(&self, j: usize, item: usize) -> bool {
        self.members[j].binary_search(&item).is_ok()
    }

    /// Categories CSV: header `item,category`, 1-based, one row per
    /// membership (items may repeat for overlapping categories).
    pub fn read_csv(path: &Path, n: usize, m: usize) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(file, path, n, m)
    }

    pub fn read_csv_from<R: Read>(reader: R, path: &Path, n: usize, m: usize) -> Result<Self> {
        let mut sets = vec![Vec::new(); m];
        for (item, cat) in read_pairs(reader, path, ["item", "category"])? {
            if item == 0 || item > n || cat == 0 || cat > m {
                return Err(Error::format(path, format!("bad row item={item} category={cat}")));
            }
            sets[cat - 1].push(item - 1);
        }
        Self::from_sets(n, sets)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["item", "category"])?;
        for (i, cats) in self.of_item.iter().enumerate() {
            for c in cats {
                w.write_record([(i + 1).to_string(), (c + 1).to_string()])?;
            }
        }
        w.flush()
    }
}

fn read_pairs<R: Read>(reader: R, path: &Path, header: [&str; 2]) -> Result<Vec<(usize, usize)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found = rdr.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::format(
            path,
            format!("header must be `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    rdr.records()
        .enumerate()
        .map(|(line, rec)| {
            let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::format(path, format!("row {}: `{s}` is not an id", line + 2)))
            };
            Ok((parse(&rec[0])?, parse(&rec[1])?))
        })
        .collect()
}

/// Upper-bound constraint `|S ∩ G_ℓ| ≤ (u_ℓ + v_ℓ·γ_ℓ)·k`.
#[derive(Clone, Debug, PartialEq)]
pub struct FairnessConstraint {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FairnessConstraint {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::input(format!("u has {} entries but v has {}", u.len(), v.len())));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::input("u and v must be finite and nonnegative"));
        }
        Ok(Self { u, v })
    }

    /// `u = 0, v = 1`.
    pub fn proportional(p: usize) -> Self {
        Self {
            u: vec![0.0; p],
            v: vec![1.0; p],
        }
    }

    /// `u = 1/p, v = 0`.
    pub fn equal(p: usize) -> Self {
        Self {
            u: vec![1.0 / p as f64; p],
            v: vec![0.0; p],
        }
    }

    /// Reads `fair.u` and `fair.v` (comma-separated reals).
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let get = |key: &str| {
            cfg.parse_list::<f64>(key)?
                .ok_or_else(|| Error::format(cfg.source(), format!("missing `{key}`")))
        };
        Self::new(get("fair.u")?, get("fair.v")?)
    }
}

/// Integer caps `floor((u_ℓ + v_ℓγ_ℓ)·k + ε)`.
pub fn fairness_caps(
    constraint: &FairnessConstraint,
    groups: &GroupStructure,
    k: usize,
) -> Result<Vec<usize>> {
    if constraint.u.len() != groups.p() {
        return Err(Error::input(format!(
            "constraint has {} groups but the partition has {}",
            constraint.u.len(),
            groups.p()
        )));
    }
    Ok((0..groups.p())
        .map(|g| {
            let bound = (constraint.u[g] + constraint.v[g] * groups.gamma(g)) * k as f64;
            (bound + CAP_TIE_EPS).floor().max(0.0) as usize
        })
        .collect())
}
