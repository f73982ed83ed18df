//! Tabular loading and the preprocessing pipeline: min-max scaling of numeric
//! columns, one-hot encoding of categorical ones, and extraction of group
//! membership from a sensitive column that is never used as a feature.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng_for;

/// Which columns play which role when a CSV file is loaded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    /// Column whose values define group membership.
    pub sensitive: String,
    /// Supervised target column; dropped during preprocessing.
    #[serde(default)]
    pub target: Option<String>,
    /// Further columns to drop.
    #[serde(default)]
    pub ignore: Vec<String>,
    /// Columns to one-hot encode even when every value parses as a number.
    #[serde(default)]
    pub categorical: Vec<String>,
    /// Maps raw sensitive values to group names. The key `"*"` catches every
    /// value not listed; unmapped values form their own group.
    #[serde(default)]
    pub group_map: BTreeMap<String, String>,
}

impl Schema {
    pub fn new(sensitive: impl Into<String>) -> Self {
        Schema {
            sensitive: sensitive.into(),
            ..Default::default()
        }
    }

    pub fn with_target(mut self, target: impl Into<String>) -> Self {
        self.target = Some(target.into());
        self
    }

    pub fn map_group(mut self, value: impl Into<String>, group: impl Into<String>) -> Self {
        self.group_map.insert(value.into(), group.into());
        self
    }

    fn group_of<'a>(&'a self, value: &'a str) -> &'a str {
        self.group_map
            .get(value)
            .or_else(|| self.group_map.get("*"))
            .map_or(value, String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

/// A loaded table before preprocessing.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub schema: Schema,
    /// Rows rejected at load time because a cell was missing.
    pub dropped_rows: usize,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

/// Reads a comma-separated file with a header row.
///
/// Rows with an empty or `?` cell are skipped and counted in
/// [`RawTable::dropped_rows`]. A column is numeric when every remaining
/// value parses as a number and the schema does not force it categorical.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let mut text_rows = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        if record.len() != columns.len() {
            return Err(Error::RaggedRow {
                line: record.position().map_or(0, |p| p.line()),
                expected: columns.len(),
                found: record.len(),
            });
        }
        if record.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        text_rows.push(record.iter().map(str::to_string).collect::<Vec<_>>());
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with missing cells", path.display());
    }
    table_from_text(columns, text_rows, schema, dropped)
}

/// Builds a table from in-memory text cells, typing columns as [`load_csv`] does.
pub fn table_from_text(
    columns: Vec<String>,
    text_rows: Vec<Vec<String>>,
    schema: &Schema,
    dropped_rows: usize,
) -> Result<RawTable> {
    let find = |name: &str| {
        columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let sensitive = find(&schema.sensitive)?;
    if let Some(t) = &schema.target {
        find(t)?;
    }
    for name in schema.ignore.iter().chain(&schema.categorical) {
        find(name)?;
    }
    for (line, row) in text_rows.iter().enumerate() {
        if row.len() != columns.len() {
            return Err(Error::RaggedRow {
                line: line as u64 + 2,
                expected: columns.len(),
                found: row.len(),
            });
        }
    }

    let numeric: Vec<bool> = (0..columns.len())
        .map(|c| {
            c != sensitive
                && !schema.categorical.contains(&columns[c])
                && text_rows.iter().all(|r| r[c].parse::<f64>().is_ok_and(f64::is_finite))
        })
        .collect();
    let rows = text_rows
        .into_iter()
        .map(|r| {
            r.into_iter()
                .enumerate()
                .map(|(c, s)| {
                    if numeric[c] {
                        Cell::Num(s.parse().expect("checked numeric"))
                    } else {
                        Cell::Text(s)
                    }
                })
                .collect()
        })
        .collect();
    Ok(RawTable {
        columns,
        rows,
        schema: schema.clone(),
        dropped_rows,
    })
}

/// Numeric points with group membership.
///
/// Groups need not partition the points: a point may belong to several groups
/// or to none.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<f64>,
    n: usize,
    m: usize,
    groups: Vec<Vec<usize>>,
    group_names: Vec<String>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from explicit points and group index sets. Group
    /// names default to `g0, g1, ...` and feature names to `f0, f1, ...`.
    pub fn new(points: Vec<Vec<f64>>, groups: Vec<Vec<usize>>) -> Result<Dataset> {
        let n = points.len();
        let m = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != m) {
            return Err(Error::InvalidDataset("points have different dimensions".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        let mut groups = groups;
        for g in groups.iter_mut() {
            g.sort_unstable();
            g.dedup();
            if g.last().is_some_and(|&i| i >= n) {
                return Err(Error::InvalidDataset(format!("group index out of range (n = {n})")));
            }
        }
        let group_names = (0..groups.len()).map(|g| format!("g{g}")).collect();
        let feature_names = (0..m).map(|j| format!("f{j}")).collect();
        Ok(Dataset {
            points: points.into_iter().flatten().collect(),
            n,
            m,
            groups,
            group_names,
            feature_names,
        })
    }

    pub fn with_group_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.groups.len());
        self.group_names = names;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.m..(i + 1) * self.m]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n).map(move |i| self.point(i))
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Sorted member indices of group `g`.
    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Group ids each point belongs to.
    pub fn memberships(&self) -> Vec<Vec<usize>> {
        let mut of = vec![Vec::new(); self.n];
        for (g, members) in self.groups.iter().enumerate() {
            for &i in members {
                of[i].push(g);
            }
        }
        of
    }

    /// Whether no point belongs to more than one group.
    pub fn groups_disjoint(&self) -> bool {
        let total: usize = self.groups.iter().map(Vec::len).sum();
        let mut seen = vec![false; self.n];
        for &i in self.groups.iter().flatten() {
            if seen[i] {
                return false;
            }
            seen[i] = true;
        }
        total <= self.n
    }
}

/// Turns a raw table into a normalized numeric dataset.
pub fn preprocess(raw: &RawTable) -> Result<Dataset> {
    if raw.rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let schema = &raw.schema;
    let sensitive = raw.column_index(&schema.sensitive)?;
    let mut dropped = vec![sensitive];
    if let Some(t) = &schema.target {
        dropped.push(raw.column_index(t)?);
    }
    for name in &schema.ignore {
        dropped.push(raw.column_index(name)?);
    }

    let n = raw.rows.len();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut feature_names = Vec::new();
    for (c, name) in raw.columns.iter().enumerate() {
        if dropped.contains(&c) {
            continue;
        }
        match &raw.rows[0][c] {
            Cell::Num(_) => {
                let vals: Vec<f64> = raw
                    .rows
                    .iter()
                    .map(|r| match r[c] {
                        Cell::Num(v) => v,
                        Cell::Text(_) => unreachable!("column typed numeric"),
                    })
                    .collect();
                columns.push(min_max_scale(&vals));
                feature_names.push(name.clone());
            }
            Cell::Text(_) => {
                let mut levels: Vec<&str> = Vec::new();
                let mut level_of: HashMap<&str, usize> = HashMap::new();
                let mut codes = Vec::with_capacity(n);
                for r in &raw.rows {
                    let Cell::Text(s) = &r[c] else {
                        unreachable!("column typed categorical")
                    };
                    let code = *level_of.entry(s.as_str()).or_insert_with(|| {
                        levels.push(s.as_str());
                        levels.len() - 1
                    });
                    codes.push(code);
                }
                for (l, level) in levels.iter().enumerate() {
                    columns.push(codes.iter().map(|&x| if x == l { 1.0 } else { 0.0 }).collect());
                    feature_names.push(format!("{name}={level}"));
                }
            }
        }
    }

    let mut group_names: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, r) in raw.rows.iter().enumerate() {
        let value = match &r[sensitive] {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => v.to_string(),
        };
        let name = schema.group_of(&value);
        let g = match group_names.iter().position(|x| x == name) {
            Some(g) => g,
            None => {
                group_names.push(name.to_string());
                groups.push(Vec::new());
                groups.len() - 1
            }
        };
        groups[g].push(i);
    }

    let m = columns.len();
    let mut points = Vec::with_capacity(n * m);
    for i in 0..n {
        points.extend(columns.iter().map(|col| col[i]));
    }
    Ok(Dataset {
        points,
        n,
        m,
        groups,
        group_names,
        feature_names,
    })
}

fn min_max_scale(vals: &[f64]) -> Vec<f64> {
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![0.0; vals.len()];
    }
    let span = hi - lo;
    vals.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect()
}

/// Uniform sample of `min(size, n)` points without replacement, kept in their
/// original order. Deterministic for a fixed seed.
///
/// # Panics
/// If `size` is zero.
pub fn subsample(ds: &Dataset, size: usize, seed: u64) -> Dataset {
    assert!(size >= 1, "subsample size must be at least 1");
    if size >= ds.n {
        return ds.clone();
    }
    let mut rng = rng_for(seed, 0);
    let mut keep = index::sample(&mut rng, ds.n, size).into_vec();
    keep.sort_unstable();
    let mut new_index = vec![usize::MAX; ds.n];
    for (new, &old) in keep.iter().enumerate() {
        new_index[old] = new;
    }
    let mut points = Vec::with_capacity(size * ds.m);
    for &i in &keep {
        points.extend_from_slice(ds.point(i));
    }
    let groups = ds
        .groups
        .iter()
        .map(|g| {
            g.iter()
                .filter_map(|&i| (new_index[i] != usize::MAX).then_some(new_index[i]))
                .collect()
        })
        .collect();
    Dataset {
        points,
        n: size,
        m: ds.m,
        groups,
        group_names: ds.group_names.clone(),
        feature_names: ds.feature_names.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: &[&str], rows: &[&[&str]], schema: &Schema) -> RawTable {
        table_from_text(
            cols.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
            schema,
            0,
        )
        .unwrap()
    }

    #[test]
    fn numeric_column_is_min_max_scaled() {
        let t = table(&["x", "s"], &[&["2", "a"], &["4", "a"], &["6", "b"]], &Schema::new("s"));
        let ds = preprocess(&t).unwrap();
        assert_eq!(ds.m(), 1);
        let xs: Vec<f64> = ds.points().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert_eq!(ds.group_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(ds.group(0), &[0, 1]);
        assert_eq!(ds.group(1), &[2]);
    }

    #[test]
    fn categorical_column_is_one_hot_in_first_appearance_order() {
        let t = table(&["c", "s"], &[&["a", "u"], &["b", "v"], &["a", "u"]], &Schema::new("s"));
        let ds = preprocess(&t).unwrap();
        assert_eq!(ds.m(), 2);
        assert_eq!(ds.feature_names(), &["c=a".to_string(), "c=b".to_string()]);
        let col0: Vec<f64> = ds.points().map(|p| p[0]).collect();
        let col1: Vec<f64> = ds.points().map(|p| p[1]).collect();
        assert_eq!(col0, vec![1.0, 0.0, 1.0]);
        assert_eq!(col1, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let t = table(&["x", "s"], &[&["3", "a"], &["3", "b"]], &Schema::new("s"));
        let ds = preprocess(&t).unwrap();
        assert_eq!(ds.point(0), &[0.0]);
        assert_eq!(ds.point(1), &[0.0]);
    }

    #[test]
    fn target_and_sensitive_are_not_features() {
        let schema = Schema::new("s").with_target("y");
        let t = table(&["x", "s", "y"], &[&["1", "a", "0"], &["2", "b", "1"]], &schema);
        let ds = preprocess(&t).unwrap();
        assert_eq!(ds.feature_names(), &["x".to_string()]);
    }

    #[test]
    fn group_map_merges_values() {
        let schema = Schema::new("race").map_group("White", "white").map_group("*", "nonwhite");
        let t = table(
            &["x", "race"],
            &[&["1", "Black"], &["2", "White"], &["3", "Asian"], &["4", "White"]],
            &schema,
        );
        let ds = preprocess(&t).unwrap();
        assert_eq!(ds.group_names(), &["nonwhite".to_string(), "white".to_string()]);
        assert_eq!(ds.group(0), &[0, 2]);
        assert_eq!(ds.group(1), &[1, 3]);
        assert!(ds.groups_disjoint());
    }

    #[test]
    fn empty_table_is_rejected() {
        let t = table(&["x", "s"], &[], &Schema::new("s"));
        assert!(matches!(preprocess(&t), Err(Error::EmptyDataset)));
    }

    #[test]
    fn missing_sensitive_column_is_an_error() {
        let r = table_from_text(vec!["x".into()], vec![], &Schema::new("s"), 0);
        assert!(matches!(r, Err(Error::MissingColumn(c)) if c == "s"));
    }

    #[test]
    fn overlapping_groups_are_allowed() {
        let ds = Dataset::new(vec![vec![0.0], vec![1.0]], vec![vec![0, 1], vec![1]]).unwrap();
        assert!(!ds.groups_disjoint());
        assert_eq!(ds.memberships(), vec![vec![0], vec![0, 1]]);
        assert!(Dataset::new(vec![vec![0.0]], vec![vec![1]]).is_err());
    }

    #[test]
    fn subsample_edges() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let ds = Dataset::new(pts, vec![(0..5).collect(), (5..10).collect()]).unwrap();
        assert_eq!(subsample(&ds, 10, 3), ds);
        assert_eq!(subsample(&ds, 50, 3), ds);
        let one = subsample(&ds, 1, 3);
        assert_eq!(one.n(), 1);
        let total: usize = one.groups().iter().map(Vec::len).sum();
        assert_eq!(total, 1);
        let a = subsample(&ds, 4, 9);
        assert_eq!(a, subsample(&ds, 4, 9));
        for g in a.groups() {
            assert!(g.iter().all(|&i| i < 4));
        }
        // Group membership follows the point.
        for (g, members) in a.groups().iter().enumerate() {
            for &i in members {
                let orig = a.point(i)[0] as usize;
                assert_eq!(orig / 5, g);
            }
        }
    }
}
