//! Control-signal vocabulary and exactly balanced sampling plans.
//!
//! A plan assigns every dimension by stratified round-robin over its
//! categories followed by a seeded shuffle, so each marginal differs by at
//! most one between categories for any `n`. Later-shot movements are filled
//! greedily toward the least-used label that is still distinct within the
//! sample.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The shipped default vocabulary.
pub const DEFAULT_TAXONOMY_TOML: &str = include_str!("../data/taxonomy.toml");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("malformed taxonomy document: {0}")]
    Parse(String),
    #[error("duplicate label {label:?} in dimension {dimension}")]
    DuplicateLabel { dimension: &'static str, label: String },
    #[error("movement {0:?} has no camera-movement family")]
    NoFamily(String),
    #[error("dimension {0} is empty")]
    EmptyDimension(&'static str),
    #[error("shot count {0} is outside the supported range 1..=3")]
    ShotCountOutOfRange(u8),
    #[error("unknown movement {0:?}")]
    UnknownMovement(String),
    #[error("shot count {shot_count} exceeds the movement vocabulary of {vocabulary} labels")]
    VocabularyTooSmall { shot_count: u8, vocabulary: usize },
    #[error("invalid control signals: {0}")]
    InvalidSignals(String),
}

/// The nine camera-movement families scored by the routing benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Static,
    Pan,
    Tilt,
    Dolly,
    Truck,
    Pedestal,
    Zoom,
    Crane,
    Arc,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::Static,
        Family::Pan,
        Family::Tilt,
        Family::Dolly,
        Family::Truck,
        Family::Pedestal,
        Family::Zoom,
        Family::Crane,
        Family::Arc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Static => "static",
            Family::Pan => "pan",
            Family::Tilt => "tilt",
            Family::Dolly => "dolly",
            Family::Truck => "truck",
            Family::Pedestal => "pedestal",
            Family::Zoom => "zoom",
            Family::Crane => "crane",
            Family::Arc => "arc",
        }
    }

    /// Infers the family from the leading word of a movement label
    /// (`"pan left"` → `Pan`).
    pub fn from_movement_name(movement: &str) -> Option<Family> {
        let head = movement.split_whitespace().next()?.to_ascii_lowercase();
        head.parse().ok()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL.into_iter().find(|f| f.as_str() == s).ok_or_else(|| TaxonomyError::NoFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectCount {
    Zero,
    Single,
    Multiple,
}

impl SubjectCount {
    pub fn as_str(self) -> &'static str {
        match self {
            SubjectCount::Zero => "zero",
            SubjectCount::Single => "single",
            SubjectCount::Multiple => "multiple",
        }
    }

    /// Whether `n` listed subjects is consistent with this category.
    pub fn admits(self, n: usize) -> bool {
        match self {
            SubjectCount::Zero => n == 0,
            SubjectCount::Single => n == 1,
            SubjectCount::Multiple => n >= 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamicity {
    Static,
    Dynamic,
}

impl Dynamicity {
    pub fn as_str(self) -> &'static str {
        match self {
            Dynamicity::Static => "static",
            Dynamicity::Dynamic => "dynamic",
        }
    }
}

/// A validated control-signal vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Taxonomy {
    genres: Vec<String>,
    movements: Vec<String>,
    families: BTreeMap<String, Family>,
    shot_counts: Vec<u8>,
    subject_counts: Vec<SubjectCount>,
    dynamicity: Vec<Dynamicity>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MovementEntry {
    Bare(String),
    Explicit { name: String, family: Option<String> },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyDocument {
    genres: Option<Vec<String>>,
    movements: Option<Vec<MovementEntry>>,
    shot_counts: Option<Vec<u8>>,
    subject_counts: Option<Vec<SubjectCount>>,
    dynamicity: Option<Vec<Dynamicity>>,
}

fn default_document() -> TaxonomyDocument {
    toml::from_str(DEFAULT_TAXONOMY_TOML).expect("shipped taxonomy parses")
}

fn check_distinct<T: Ord + fmt::Display + Clone>(dimension: &'static str, items: &[T]) -> Result<(), TaxonomyError> {
    if items.is_empty() {
        return Err(TaxonomyError::EmptyDimension(dimension));
    }
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item.clone()) {
            return Err(TaxonomyError::DuplicateLabel { dimension, label: item.to_string() });
        }
    }
    Ok(())
}

impl fmt::Display for SubjectCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Dynamicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Taxonomy {
    /// Parses and validates a TOML taxonomy document. Omitted dimensions take
    /// the shipped defaults; an explicitly empty dimension is an error.
    pub fn load(config: &str) -> Result<Self, TaxonomyError> {
        let doc: TaxonomyDocument = toml::from_str(config).map_err(|e| TaxonomyError::Parse(e.to_string()))?;
        let defaults = default_document();

        let genres = doc.genres.or(defaults.genres).unwrap_or_default();
        let shot_counts = doc.shot_counts.or(defaults.shot_counts).unwrap_or_default();
        let subject_counts = doc.subject_counts.or(defaults.subject_counts).unwrap_or_default();
        let dynamicity = doc.dynamicity.or(defaults.dynamicity).unwrap_or_default();
        let entries = doc.movements.or(defaults.movements).unwrap_or_default();

        let mut movements = Vec::with_capacity(entries.len());
        let mut families = BTreeMap::new();
        for entry in entries {
            let (name, family) = match entry {
                MovementEntry::Bare(name) => (name, None),
                MovementEntry::Explicit { name, family } => (name, family),
            };
            let name = name.trim().to_string();
            let family = match family {
                Some(f) => f.trim().parse().map_err(|_| TaxonomyError::NoFamily(name.clone()))?,
                None => Family::from_movement_name(&name).ok_or_else(|| TaxonomyError::NoFamily(name.clone()))?,
            };
            families.insert(name.clone(), family);
            movements.push(name);
        }

        Self::new(genres, movements, families, shot_counts, subject_counts, dynamicity)
    }

    /// The shipped 13-genre, 17-movement vocabulary.
    pub fn default_taxonomy() -> Self {
        Self::load("").expect("shipped taxonomy is valid")
    }

    pub fn new(
        genres: Vec<String>,
        movements: Vec<String>,
        families: BTreeMap<String, Family>,
        shot_counts: Vec<u8>,
        subject_counts: Vec<SubjectCount>,
        dynamicity: Vec<Dynamicity>,
    ) -> Result<Self, TaxonomyError> {
        check_distinct("genres", &genres)?;
        check_distinct("movements", &movements)?;
        check_distinct("shot_counts", &shot_counts)?;
        check_distinct("subject_counts", &subject_counts)?;
        check_distinct("dynamicity", &dynamicity)?;
        if let Some(bad) = shot_counts.iter().find(|c| !(1..=3).contains(*c)) {
            return Err(TaxonomyError::ShotCountOutOfRange(*bad));
        }
        for m in &movements {
            if !families.contains_key(m) {
                return Err(TaxonomyError::NoFamily(m.clone()));
            }
        }
        let families = families.into_iter().filter(|(m, _)| movements.contains(m)).collect();
        Ok(Self { genres, movements, families, shot_counts, subject_counts, dynamicity })
    }

    pub fn genres(&self) -> &[String] {
        &self.genres
    }

    pub fn movements(&self) -> &[String] {
        &self.movements
    }

    pub fn shot_counts(&self) -> &[u8] {
        &self.shot_counts
    }

    pub fn subject_counts(&self) -> &[SubjectCount] {
        &self.subject_counts
    }

    pub fn dynamicity(&self) -> &[Dynamicity] {
        &self.dynamicity
    }

    pub fn contains_movement(&self, movement: &str) -> bool {
        self.families.contains_key(movement)
    }

    pub fn family_of(&self, movement: &str) -> Result<Family, TaxonomyError> {
        self.families.get(movement).copied().ok_or_else(|| TaxonomyError::UnknownMovement(movement.to_string()))
    }

    /// Distinct families in use, in canonical order.
    pub fn families(&self) -> BTreeSet<Family> {
        self.families.values().copied().collect()
    }

    /// Checks closure, cardinality and distinctness of one sample.
    pub fn validate(&self, s: &ControlSignals) -> Result<(), TaxonomyError> {
        let bad = |msg: String| Err(TaxonomyError::InvalidSignals(msg));
        if !self.genres.contains(&s.genre) {
            return bad(format!("unknown genre {:?}", s.genre));
        }
        if !self.shot_counts.contains(&s.shot_count) {
            return bad(format!("shot count {} not in taxonomy", s.shot_count));
        }
        if s.movements.len() != s.shot_count as usize {
            return bad(format!("{} movements for shot count {}", s.movements.len(), s.shot_count));
        }
        let mut seen = BTreeSet::new();
        for m in &s.movements {
            if !self.contains_movement(m) {
                return Err(TaxonomyError::UnknownMovement(m.clone()));
            }
            if !seen.insert(m) {
                return bad(format!("movement {m:?} repeated within one sample"));
            }
        }
        if !self.subject_counts.contains(&s.subject_count) {
            return bad(format!("subject count {} not in taxonomy", s.subject_count));
        }
        if !self.dynamicity.contains(&s.dynamicity) {
            return bad(format!("dynamicity {} not in taxonomy", s.dynamicity));
        }
        Ok(())
    }
}

/// One sample's conditioning tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSignals {
    pub sample_id: String,
    pub genre: String,
    pub shot_count: u8,
    pub movements: Vec<String>,
    pub subject_count: SubjectCount,
    pub dynamicity: Dynamicity,
}

/// Per-category counts for one dimension, in taxonomy order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionCounts {
    pub counts: Vec<(String, usize)>,
    pub max_deviation: usize,
}

impl DimensionCounts {
    fn from_counts(counts: Vec<(String, usize)>) -> Self {
        let max = counts.iter().map(|c| c.1).max().unwrap_or(0);
        let min = counts.iter().map(|c| c.1).min().unwrap_or(0);
        Self { counts, max_deviation: max - min }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|c| c.1).sum()
    }

    pub fn count(&self, category: &str) -> Option<usize> {
        self.counts.iter().find(|c| c.0 == category).map(|c| c.1)
    }
}

/// Marginal counts keyed by dimension name: `genre`, `shot_count`,
/// `movement` (first shot), `subject_count`, `dynamicity`.
pub type BalanceReport = BTreeMap<String, DimensionCounts>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancePlan {
    pub entries: Vec<ControlSignals>,
    pub seed: u64,
    pub report: BalanceReport,
}

impl BalancePlan {
    /// One JSON object per line, one line per sample.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("signals serialize"));
            out.push('\n');
        }
        out
    }
}

/// Parses a line-delimited plan export back into control signals.
pub fn parse_plan_jsonl(text: &str) -> Result<Vec<ControlSignals>, TaxonomyError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| TaxonomyError::Parse(format!("line {}: {e}", i + 1))))
        .collect()
}

const DIM_GENRE: u64 = 1;
const DIM_SHOTS: u64 = 2;
const DIM_MOVEMENT: u64 = 3;
const DIM_SUBJECTS: u64 = 4;
const DIM_DYNAMICITY: u64 = 5;
const DIM_LATER_SHOTS: u64 = 6;

fn dimension_rng(seed: u64, dimension: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(dimension);
    rng
}

fn stratified<T: Clone>(categories: &[T], n: usize, seed: u64, dimension: u64) -> Vec<T> {
    let mut column: Vec<T> = (0..n).map(|i| categories[i % categories.len()].clone()).collect();
    column.shuffle(&mut dimension_rng(seed, dimension));
    column
}

/// Builds a deterministic, exactly balanced plan of `n` samples.
pub fn generate_plan(n: usize, taxonomy: &Taxonomy, seed: u64) -> Result<BalancePlan, TaxonomyError> {
    if n > 0 {
        if let Some(&too_many) = taxonomy.shot_counts.iter().find(|&&c| c as usize > taxonomy.movements.len()) {
            return Err(TaxonomyError::VocabularyTooSmall {
                shot_count: too_many,
                vocabulary: taxonomy.movements.len(),
            });
        }
    }

    let genres = stratified(&taxonomy.genres, n, seed, DIM_GENRE);
    let shots = stratified(&taxonomy.shot_counts, n, seed, DIM_SHOTS);
    let first = stratified(&taxonomy.movements, n, seed, DIM_MOVEMENT);
    let subjects = stratified(&taxonomy.subject_counts, n, seed, DIM_SUBJECTS);
    let dynamicity = stratified(&taxonomy.dynamicity, n, seed, DIM_DYNAMICITY);

    // usage[k][m]: how often movement m was placed at shot position k.
    let vocab = taxonomy.movements.len();
    let index_of: BTreeMap<&str, usize> = taxonomy.movements.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let positions = taxonomy.shot_counts.iter().copied().max().unwrap_or(1) as usize;
    let mut usage = vec![vec![0usize; vocab]; positions];
    let mut rng = dimension_rng(seed, DIM_LATER_SHOTS);

    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let mut movements = vec![first[i].clone()];
        usage[0][index_of[first[i].as_str()]] += 1;
        for counts in usage.iter_mut().take(shots[i] as usize).skip(1) {
            let mut candidates: Vec<usize> =
                (0..vocab).filter(|&m| !movements.contains(&taxonomy.movements[m])).collect();
            let least = candidates.iter().map(|&m| counts[m]).min().expect("vocabulary checked");
            candidates.retain(|&m| counts[m] == least);
            let pick = *candidates.choose(&mut rng).expect("non-empty candidates");
            counts[pick] += 1;
            movements.push(taxonomy.movements[pick].clone());
        }
        entries.push(ControlSignals {
            sample_id: format!("s{seed}-{i:05}"),
            genre: genres[i].clone(),
            shot_count: shots[i],
            movements,
            subject_count: subjects[i],
            dynamicity: dynamicity[i],
        });
    }

    let report = balance_report(&entries, taxonomy);
    Ok(BalancePlan { entries, seed, report })
}

/// Per-dimension marginal counts over `entries`, in taxonomy category order.
pub fn balance_report(entries: &[ControlSignals], taxonomy: &Taxonomy) -> BalanceReport {
    fn tally<T, F>(cats: &[T], entries: &[ControlSignals], key: F) -> DimensionCounts
    where
        T: PartialEq + fmt::Display,
        F: Fn(&ControlSignals) -> Option<&T>,
    {
        let counts =
            cats.iter().map(|c| (c.to_string(), entries.iter().filter(|e| key(e) == Some(c)).count())).collect();
        DimensionCounts::from_counts(counts)
    }

    let mut report = BTreeMap::new();
    report.insert("genre".into(), tally(&taxonomy.genres, entries, |e| Some(&e.genre)));
    report.insert("shot_count".into(), tally(&taxonomy.shot_counts, entries, |e| Some(&e.shot_count)));
    report.insert("movement".into(), tally(&taxonomy.movements, entries, |e| e.movements.first()));
    report.insert("subject_count".into(), tally(&taxonomy.subject_counts, entries, |e| Some(&e.subject_count)));
    report.insert("dynamicity".into(), tally(&taxonomy.dynamicity, entries, |e| Some(&e.dynamicity)));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_taxonomy_shape() {
        let t = Taxonomy::default_taxonomy();
        assert_eq!(t.movements().len(), 17);
        assert_eq!(t.families().len(), 9);
        assert_eq!(t.genres().len(), 13);
        assert_eq!(t.shot_counts(), &[1, 2, 3]);
    }

    #[test]
    fn duplicate_movement_rejected() {
        let err = Taxonomy::load(r#"movements = ["pan left", "pan left"]"#).unwrap_err();
        assert_eq!(err, TaxonomyError::DuplicateLabel { dimension: "movements", label: "pan left".into() });
    }

    #[test]
    fn omitted_genres_default_to_thirteen() {
        let t = Taxonomy::load("shot_counts = [1, 2]").unwrap();
        assert_eq!(t.genres().len(), 13);
        assert_eq!(t.shot_counts(), &[1, 2]);
    }

    #[test]
    fn movement_without_family_rejected() {
        let err = Taxonomy::load(r#"movements = ["whip pan"]"#).unwrap_err();
        assert_eq!(err, TaxonomyError::NoFamily("whip pan".into()));
        let ok = Taxonomy::load(r#"movements = [{ name = "whip pan", family = "pan" }, "static"]"#).unwrap();
        assert_eq!(ok.family_of("whip pan").unwrap(), Family::Pan);
    }

    #[test]
    fn empty_dimension_rejected() {
        assert_eq!(Taxonomy::load("genres = []").unwrap_err(), TaxonomyError::EmptyDimension("genres"));
    }

    #[test]
    fn genre_list_can_be_extended() {
        let t = Taxonomy::load(
            r#"genres = ["documentary", "drama", "action", "comedy", "horror", "romance",
               "fantasy", "western", "classic", "animals", "sports", "science fiction", "war",
               "musical", "thriller"]"#,
        )
        .unwrap();
        assert_eq!(t.genres().len(), 15);
    }

    #[test]
    fn empty_plan() {
        let plan = generate_plan(0, &Taxonomy::default_taxonomy(), 7).unwrap();
        assert!(plan.entries.is_empty());
        assert_eq!(plan.report["genre"].total(), 0);
    }

    #[test]
    fn seventeen_samples_cover_every_first_movement_once() {
        let t = Taxonomy::default_taxonomy();
        let plan = generate_plan(17, &t, 3).unwrap();
        for m in t.movements() {
            let c = plan.entries.iter().filter(|e| &e.movements[0] == m).count();
            assert_eq!(c, 1, "{m}");
        }
    }

    #[test]
    fn n_26_over_13_genres_is_exact() {
        let plan = generate_plan(26, &Taxonomy::default_taxonomy(), 11).unwrap();
        let g = &plan.report["genre"];
        assert!(g.counts.iter().all(|(_, c)| *c == 2));
        assert_eq!(g.max_deviation, 0);
    }

    #[test]
    fn single_sample_report() {
        let plan = generate_plan(1, &Taxonomy::default_taxonomy(), 0).unwrap();
        let g = &plan.report["genre"];
        assert_eq!(g.counts.iter().filter(|c| c.1 == 1).count(), 1);
        assert_eq!(g.max_deviation, 1);
    }

    #[test]
    fn five_thousand_first_movements_in_294_295() {
        let plan = generate_plan(5000, &Taxonomy::default_taxonomy(), 42).unwrap();
        for (_, c) in &plan.report["movement"].counts {
            assert!(*c == 294 || *c == 295, "{c}");
        }
    }

    #[test]
    fn vocabulary_too_small() {
        let t = Taxonomy::load(r#"movements = ["static", "pan left"]"#).unwrap();
        assert!(matches!(
            generate_plan(5, &t, 1),
            Err(TaxonomyError::VocabularyTooSmall { shot_count: 3, vocabulary: 2 })
        ));
        assert!(generate_plan(0, &t, 1).is_ok());
    }

    #[test]
    fn jsonl_round_trip() {
        let plan = generate_plan(9, &Taxonomy::default_taxonomy(), 5).unwrap();
        assert_eq!(parse_plan_jsonl(&plan.to_jsonl()).unwrap(), plan.entries);
    }

    #[test]
    fn validate_catches_repeated_movement() {
        let t = Taxonomy::default_taxonomy();
        let s = ControlSignals {
            sample_id: "x".into(),
            genre: "war".into(),
            shot_count: 2,
            movements: vec!["static".into(), "static".into()],
            subject_count: SubjectCount::Zero,
            dynamicity: Dynamicity::Static,
        };
        assert!(t.validate(&s).is_err());
    }
}
