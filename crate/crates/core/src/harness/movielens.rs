//! MovieLens pipeline: join ratings, genome relevance scores and lead-actor
//! gender labels into a movie table, then run the three selection
//! algorithms on per-user candidate pools.
//!
//! Genres come from `movies.csv`. A genre's relevance `r_ig` is the genome
//! score of the tag whose lowercase name equals the lowercase genre name,
//! unless an override file (`genre,tag`) maps it elsewhere. Observed
//! utility over genre set `T` is `Σ_{g∈T} √(Σ_{i∈S} r_ig)`; latent utility
//! is the mean average rating of the selected movies.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng as _;

use super::{fmt_g, run_algorithm, Algorithm, TrialRecord};
use crate::curve::ConcaveCurve;
use crate::error::{Error, Result};
use crate::groups::{CategoryStructure, GroupStructure};
use crate::maximizers::{Flag, Flags};
use crate::objective::ObjectiveSpec;
use crate::rng::{derive_seed, stream, tag};
use crate::utility::UtilityMatrix;

/// `R_g = male/non-male` average relevance at or above this makes a genre
/// stereotypical.
pub const STEREOTYPE_RATIO: f64 = 2.0;
pub const DEFAULT_MIN_RATINGS: usize = 200;
pub const DEFAULT_CONFIDENCE: f64 = 0.9;
const NO_GENRES: &str = "(no genres listed)";

#[derive(Clone, Debug, PartialEq)]
pub struct MovieLensPaths {
    pub ratings: PathBuf,
    pub genome_scores: PathBuf,
    pub genome_tags: PathBuf,
    pub movies: PathBuf,
    pub labels: PathBuf,
    pub tag_overrides: Option<PathBuf>,
}

impl MovieLensPaths {
    /// Standard file names inside `dir`; the label file is `labels`.
    pub fn in_dir(dir: &Path, labels: &Path) -> Self {
        Self {
            ratings: dir.join("ratings.csv"),
            genome_scores: dir.join("genome-scores.csv"),
            genome_tags: dir.join("genome-tags.csv"),
            movies: dir.join("movies.csv"),
            labels: labels.to_path_buf(),
            tag_overrides: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Movie {
    pub id: u64,
    pub title: String,
    /// Indices into [`MovieTable::genres`].
    pub genres: Vec<usize>,
    pub avg_rating: f64,
    pub n_ratings: usize,
    pub male: bool,
    /// Relevance per genre index; 0 for genres without a tag.
    pub relevance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserPool {
    pub id: u64,
    /// Ratings the user submitted, across all movies.
    pub total: usize,
    /// Table indices of the rated movies, ascending.
    pub movies: Vec<usize>,
}

/// Row counts after each join step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JoinCounts {
    pub movies: usize,
    pub labelled: usize,
    pub confident: usize,
    pub with_genome: usize,
    pub table: usize,
    pub male: usize,
    pub non_male: usize,
    pub ratings: usize,
    pub users: usize,
}

impl JoinCounts {
    pub fn pairs(&self) -> [(&'static str, usize); 9] {
        [
            ("movies", self.movies),
            ("labelled", self.labelled),
            ("confident", self.confident),
            ("with_genome", self.with_genome),
            ("table", self.table),
            ("male", self.male),
            ("non_male", self.non_male),
            ("ratings", self.ratings),
            ("users", self.users),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MovieTable {
    /// Genre names as spelled in `movies.csv`, sorted.
    pub genres: Vec<String>,
    /// Genome tag id matched to each genre.
    pub genre_tags: Vec<Option<u64>>,
    /// Sorted by movie id.
    pub movies: Vec<Movie>,
    pub users: Vec<UserPool>,
    pub counts: JoinCounts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenreRatio {
    pub genre: String,
    pub male_led: f64,
    pub non_male_led: f64,
    /// `non_male_led / male_led`.
    pub ratio: f64,
}

impl GenreRatio {
    /// `R_g = male_led / non_male_led`.
    pub fn stereotype_ratio(&self) -> f64 {
        self.male_led / self.non_male_led
    }
}

struct Csv {
    rdr: csv::Reader<File>,
    path: PathBuf,
    cols: Vec<usize>,
}

impl Csv {
    fn open(path: &Path, wanted: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = rdr.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
        let cols = wanted
            .iter()
            .map(|w| {
                headers.iter().position(|h| h == *w).ok_or_else(|| {
                    Error::format(
                        path,
                        format!(
                            "missing column `{w}` in header `{}`",
                            headers.iter().collect::<Vec<_>>().join(",")
                        ),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rdr, path: path.to_path_buf(), cols })
    }

    /// Calls `f` with the wanted fields of every row.
    fn for_each(mut self, mut f: impl FnMut(&[&str], usize) -> Result<()>) -> Result<()> {
        let mut rec = csv::StringRecord::new();
        let mut line = 1;
        loop {
            match self.rdr.read_record(&mut rec) {
                Ok(false) => return Ok(()),
                Ok(true) => {}
                Err(e) => return Err(Error::format(&self.path, e.to_string())),
            }
            line += 1;
            let mut fields: Vec<&str> = Vec::with_capacity(self.cols.len());
            for &c in &self.cols {
                fields.push(rec.get(c).ok_or_else(|| Error::format(&self.path, format!("row {line}: too few fields")))?);
            }
            f(&fields, line).map_err(|e| match e {
                Error::Input(msg) => Error::format(&self.path, format!("row {line}: {msg}")),
                other => other,
            })?;
        }
    }
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::input(format!("{what} `{s}` is malformed")))
}

fn read_overrides(path: &Path) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    Csv::open(path, &["genre", "tag"])?.for_each(|f, _| {
        map.insert(f[0].to_lowercase(), f[1].to_lowercase());
        Ok(())
    })?;
    Ok(map)
}

/// Joins the five inputs. Movies survive when they carry a gender label
/// with confidence at least `threshold`, genome scores, and at least one
/// rating.
pub fn ingest_movielens(paths: &MovieLensPaths, threshold: f64) -> Result<MovieTable> {
    // movies.csv
    let mut titles: BTreeMap<u64, (String, Vec<String>)> = BTreeMap::new();
    Csv::open(&paths.movies, &["movieId", "title", "genres"])?.for_each(|f, _| {
        let genres = f[2]
            .split('|')
            .map(str::trim)
            .filter(|g| !g.is_empty() && *g != NO_GENRES)
            .map(String::from)
            .collect();
        titles.insert(parse(f[0], "movieId")?, (f[1].to_string(), genres));
        Ok(())
    })?;
    let genres: Vec<String> = titles
        .values()
        .flat_map(|(_, g)| g.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let genre_index: HashMap<&str, usize> = genres.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();

    // genre → tag
    let overrides = match &paths.tag_overrides {
        Some(p) => read_overrides(p)?,
        None => HashMap::new(),
    };
    let mut tag_ids: HashMap<String, u64> = HashMap::new();
    Csv::open(&paths.genome_tags, &["tagId", "tag"])?.for_each(|f, _| {
        tag_ids.insert(f[1].to_lowercase(), parse(f[0], "tagId")?);
        Ok(())
    })?;
    let genre_tags: Vec<Option<u64>> = genres
        .iter()
        .map(|g| {
            let key = g.to_lowercase();
            let name = overrides.get(&key).unwrap_or(&key);
            tag_ids.get(name).copied()
        })
        .collect();
    let tag_genre: HashMap<u64, Vec<usize>> = genre_tags.iter().enumerate().fold(HashMap::new(), |mut acc, (g, t)| {
        if let Some(t) = t {
            acc.entry(*t).or_default().push(g);
        }
        acc
    });

    // labels
    let mut counts = JoinCounts { movies: titles.len(), ..Default::default() };
    let mut labels: BTreeMap<u64, bool> = BTreeMap::new();
    Csv::open(&paths.labels, &["movieId", "gender", "confidence"])?.for_each(|f, _| {
        let id: u64 = parse(f[0], "movieId")?;
        let conf: f64 = parse(f[2], "confidence")?;
        if titles.contains_key(&id) {
            counts.labelled += 1;
            if conf >= threshold {
                labels.insert(id, f[1].eq_ignore_ascii_case("male"));
            }
        }
        Ok(())
    })?;
    counts.confident = labels.len();

    // genome scores for the confident movies
    let mut relevance: HashMap<u64, Vec<f64>> = HashMap::new();
    let mut has_genome: BTreeSet<u64> = BTreeSet::new();
    Csv::open(&paths.genome_scores, &["movieId", "tagId", "relevance"])?.for_each(|f, _| {
        let id: u64 = parse(f[0], "movieId")?;
        if !labels.contains_key(&id) {
            return Ok(());
        }
        has_genome.insert(id);
        let t: u64 = parse(f[1], "tagId")?;
        if let Some(gs) = tag_genre.get(&t) {
            let r: f64 = parse(f[2], "relevance")?;
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::input(format!("relevance {r} outside [0, 1]")));
            }
            let row = relevance.entry(id).or_insert_with(|| vec![0.0; genres.len()]);
            for &g in gs {
                row[g] = r;
            }
        }
        Ok(())
    })?;
    counts.with_genome = has_genome.len();

    // ratings
    let mut sums: HashMap<u64, (f64, usize)> = HashMap::new();
    let mut per_user: BTreeMap<u64, (usize, Vec<u64>)> = BTreeMap::new();
    Csv::open(&paths.ratings, &["userId", "movieId", "rating"])?.for_each(|f, _| {
        let user: u64 = parse(f[0], "userId")?;
        let id: u64 = parse(f[1], "movieId")?;
        let rating: f64 = parse(f[2], "rating")?;
        if !(0.0..=5.0).contains(&rating) {
            return Err(Error::input(format!("rating {rating} outside [0, 5]")));
        }
        counts.ratings += 1;
        let entry = per_user.entry(user).or_default();
        entry.0 += 1;
        if has_genome.contains(&id) {
            let s = sums.entry(id).or_default();
            s.0 += rating;
            s.1 += 1;
            entry.1.push(id);
        }
        Ok(())
    })?;
    counts.users = per_user.len();

    let mut movies = Vec::new();
    for (&id, &male) in &labels {
        let (Some(&(sum, n)), true) = (sums.get(&id), has_genome.contains(&id)) else { continue };
        let (title, names) = &titles[&id];
        movies.push(Movie {
            id,
            title: title.clone(),
            genres: names.iter().map(|g| genre_index[g.as_str()]).collect(),
            avg_rating: sum / n as f64,
            n_ratings: n,
            male,
            relevance: relevance.remove(&id).unwrap_or_else(|| vec![0.0; genres.len()]),
        });
    }
    counts.table = movies.len();
    counts.male = movies.iter().filter(|m| m.male).count();
    counts.non_male = counts.table - counts.male;
    let index: HashMap<u64, usize> = movies.iter().enumerate().map(|(i, m)| (m.id, i)).collect();
    let users = per_user
        .into_iter()
        .map(|(id, (total, rated))| {
            let mut pool: Vec<usize> = rated.iter().filter_map(|m| index.get(m).copied()).collect();
            pool.sort_unstable();
            pool.dedup();
            UserPool { id, total, movies: pool }
        })
        .collect();
    Ok(MovieTable { genres, genre_tags, movies, users, counts })
}

impl MovieTable {
    pub fn genre_id(&self, name: &str) -> Result<usize> {
        self.genres
            .iter()
            .position(|g| g.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::input(format!("unknown genre `{name}`")))
    }

    /// Average relevance per genre over male-led and non-male-led movies
    /// of that genre. Genres without a tag, or without movies on either
    /// side, are skipped.
    pub fn genre_ratios(&self) -> Vec<GenreRatio> {
        (0..self.genres.len())
            .filter(|&g| self.genre_tags[g].is_some())
            .filter_map(|g| {
                let avg = |male: bool| {
                    let vals: Vec<f64> = self
                        .movies
                        .iter()
                        .filter(|m| m.male == male && m.genres.contains(&g))
                        .map(|m| m.relevance[g])
                        .collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                };
                let (male_led, non_male_led) = (avg(true)?, avg(false)?);
                Some(GenreRatio {
                    genre: self.genres[g].clone(),
                    male_led,
                    non_male_led,
                    ratio: non_male_led / male_led,
                })
            })
            .collect()
    }

    /// Genres with `R_g ≥ 2`.
    pub fn stereotypical_genres(&self) -> Vec<String> {
        self.genre_ratios()
            .into_iter()
            .filter(|r| r.stereotype_ratio() >= STEREOTYPE_RATIO)
            .map(|r| r.genre)
            .collect()
    }

    pub fn write_ratios<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "genre,male_led,non_male_led,ratio")?;
        for r in self.genre_ratios() {
            writeln!(out, "{},{},{},{}", r.genre, fmt_g(r.male_led), fmt_g(r.non_male_led), fmt_g(r.ratio))?;
        }
        out.flush()
    }

    /// Movie table as CSV: one row per movie, relevance columns per mapped genre.
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mapped: Vec<usize> = (0..self.genres.len()).filter(|&g| self.genre_tags[g].is_some()).collect();
        write!(out, "movieId,avg_rating,n_ratings,lead,genres")?;
        for &g in &mapped {
            write!(out, ",r_{}", self.genres[g].to_lowercase())?;
        }
        writeln!(out)?;
        for m in &self.movies {
            let names: Vec<&str> = m.genres.iter().map(|&g| self.genres[g].as_str()).collect();
            write!(
                out,
                "{},{},{},{},{}",
                m.id,
                fmt_g(m.avg_rating),
                m.n_ratings,
                if m.male { "male" } else { "non_male" },
                names.join("|")
            )?;
            for &g in &mapped {
                write!(out, ",{}", fmt_g(m.relevance[g]))?;
            }
            writeln!(out)?;
        }
        out.flush()
    }

    pub fn write_counts<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, v) in self.counts.pairs() {
            writeln!(out, "{k} = {v}")?;
        }
        out.flush()
    }
}

/// One candidate pool ready for selection.
#[derive(Clone, Debug)]
pub struct PoolInstance {
    /// Table indices of the items, ascending.
    pub movies: Vec<usize>,
    pub observed: ObjectiveSpec,
    pub groups: GroupStructure,
    pub categories: CategoryStructure,
    pub ratings: Vec<f64>,
}

impl PoolInstance {
    /// Mean average rating of the selected items.
    pub fn latent(&self, subset: &[usize]) -> f64 {
        subset.iter().map(|&i| self.ratings[i]).sum::<f64>() / subset.len() as f64
    }

    /// Best achievable mean rating with `k` items.
    pub fn best_latent(&self, k: usize) -> f64 {
        let mut r = self.ratings.clone();
        r.sort_by(|a, b| b.total_cmp(a));
        let k = k.min(r.len());
        r[..k].iter().sum::<f64>() / k as f64
    }
}

/// The user's rated movies that belong to some genre in `genres`, with the
/// observed objective over those genres. Group 1 holds male-led movies.
pub fn build_pool(table: &MovieTable, user_movies: &[usize], genres: &[usize]) -> Result<PoolInstance> {
    let movies: Vec<usize> = user_movies
        .iter()
        .copied()
        .filter(|&i| table.movies[i].genres.iter().any(|g| genres.contains(g)))
        .collect();
    let n = movies.len();
    let mut entries = Vec::with_capacity(n * genres.len());
    for &i in &movies {
        entries.extend(genres.iter().map(|&g| table.movies[i].relevance[g]));
    }
    let w = UtilityMatrix::new(n, genres.len(), entries)?;
    let sets = genres
        .iter()
        .map(|g| (0..n).filter(|&p| table.movies[movies[p]].genres.contains(g)).collect())
        .collect();
    let assignment = movies.iter().map(|&i| usize::from(!table.movies[i].male)).collect();
    Ok(PoolInstance {
        ratings: movies.iter().map(|&i| table.movies[i].avg_rating).collect(),
        observed: ObjectiveSpec::new(vec![ConcaveCurve::Sqrt; genres.len()], w)?,
        groups: GroupStructure::from_assignment(assignment, 2)?,
        categories: CategoryStructure::from_sets(n, sets)?,
        movies,
    })
}

/// Per trial: draws a user with at least `min_ratings` ratings, builds the
/// pool over `genres`, and runs every algorithm for every `k`. `nlu` is the
/// mean rating relative to the best mean rating achievable in the pool.
pub fn run_movielens_experiment(
    table: &MovieTable,
    genres: &[String],
    ks: &[usize],
    trials: usize,
    seed: u64,
    min_ratings: usize,
) -> Result<Vec<TrialRecord>> {
    let stereo: BTreeSet<String> = table.stereotypical_genres().into_iter().map(|g| g.to_lowercase()).collect();
    if let Some(g) = genres.iter().find(|g| !stereo.contains(&g.to_lowercase())) {
        return Err(Error::Precondition(format!(
            "genre `{g}` is not stereotypical (R_g < {STEREOTYPE_RATIO})"
        )));
    }
    let ids = genres.iter().map(|g| table.genre_id(g)).collect::<Result<Vec<_>>>()?;
    let qualifying: Vec<&UserPool> = table.users.iter().filter(|u| u.total >= min_ratings).collect();
    if qualifying.is_empty() {
        return Err(Error::Data(format!("no user has at least {min_ratings} ratings")));
    }
    let dataset = format!(
        "movielens:{}",
        ids.iter().map(|&g| table.genres[g].to_lowercase()).collect::<Vec<_>>().join("+")
    );
    let mut records = Vec::new();
    for t in 0..trials {
        let trial_seed = derive_seed(seed, &[t as u64]);
        let user = qualifying[stream(trial_seed, &[tag::USERS]).random_range(0..qualifying.len())];
        let pool = build_pool(table, &user.movies, &ids)?;
        let n = pool.movies.len();
        let frac = if n == 0 { f64::NAN } else { pool.groups.sizes()[0] as f64 / n as f64 };
        for &k in ks {
            for algo in Algorithm::ALL {
                let mut record = TrialRecord {
                    dataset: dataset.clone(),
                    beta: None,
                    frac_g1: Some(frac),
                    delta: None,
                    algo,
                    seed: trial_seed,
                    k,
                    latent: f64::NAN,
                    observed: f64::NAN,
                    nlu: f64::NAN,
                    group_counts: Vec::new(),
                    flags: Flags::default(),
                };
                let selection = if n == 0 {
                    Err(Error::Data("empty pool".into()))
                } else if k >= n {
                    let all: Vec<usize> = (0..n).collect();
                    let mut flags = Flags::default();
                    if k > n {
                        flags.insert(Flag::KExceedsPool);
                    }
                    Ok((all, flags))
                } else {
                    run_algorithm(algo, &pool.observed, k, &pool.groups, &pool.categories).map(|r| (r.subset, r.flags))
                };
                match selection {
                    Ok((subset, flags)) => {
                        record.latent = pool.latent(&subset);
                        record.observed = crate::objective::SetObjective::value_unchecked(&pool.observed, &subset);
                        record.nlu = record.latent / pool.best_latent(k);
                        record.group_counts = pool.groups.counts(&subset);
                        record.flags = flags;
                    }
                    Err(_) => record.flags.insert(Flag::Failed),
                }
                records.push(record);
            }
        }
    }
    Ok(records)
}
