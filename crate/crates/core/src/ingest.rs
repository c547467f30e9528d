//! Ratings-table ingestion for MovieLens 100K, Book-Crossing and Jester.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AlbError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triple {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
}

/// Deduplicated ratings with dense user/item indices. Indices follow first
/// appearance order of the opaque id tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsTable {
    source: String,
    users: Vec<String>,
    items: Vec<String>,
    triples: Vec<Triple>,
    checksum: Option<String>,
    columns: Option<usize>,
}

impl RatingsTable {
    /// Builds a table from `(user, item, rating)` tokens. A repeated
    /// `(user, item)` pair keeps the position of its first occurrence and the
    /// rating of its last.
    pub fn from_tokens<I>(source: impl Into<String>, tokens: I) -> Self
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        let mut user_idx: HashMap<String, usize> = HashMap::new();
        let mut item_idx: HashMap<String, usize> = HashMap::new();
        let mut users = Vec::new();
        let mut items = Vec::new();
        let mut pos: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triples: Vec<Triple> = Vec::new();
        for (u, i, rating) in tokens {
            let user = *user_idx.entry(u.clone()).or_insert_with(|| {
                users.push(u);
                users.len() - 1
            });
            let item = *item_idx.entry(i.clone()).or_insert_with(|| {
                items.push(i);
                items.len() - 1
            });
            match pos.get(&(user, item)) {
                Some(&p) => triples[p].rating = rating,
                None => {
                    pos.insert((user, item), triples.len());
                    triples.push(Triple { user, item, rating });
                }
            }
        }
        Self {
            source: source.into(),
            users,
            items,
            triples,
            checksum: None,
            columns: None,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn user_token(&self, user: usize) -> &str {
        &self.users[user]
    }

    pub fn item_token(&self, item: usize) -> &str {
        &self.items[item]
    }

    /// SHA-256 of the source file, when ingested from disk.
    pub fn checksum(&self) -> Option<&str> {
        self.checksum.as_deref()
    }

    /// Number of rating columns in a Jester matrix.
    pub fn columns(&self) -> Option<usize> {
        self.columns
    }

    pub fn density(&self) -> f64 {
        self.len() as f64 / (self.n_users() as f64 * self.n_items() as f64)
    }

    pub fn rating_range(&self) -> Option<(f64, f64)> {
        if self.is_empty() {
            return None;
        }
        Some(self.triples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
            (lo.min(t.rating), hi.max(t.rating))
        }))
    }

    /// Keeps the `max_users` most-rated users and `max_items` most-rated
    /// items (counts over the whole table, ties broken by token), then drops
    /// ratings outside the intersection.
    pub fn subset_most_rated(&self, max_users: usize, max_items: usize) -> Self {
        fn top(counts: &[usize], tokens: &[String], keep: usize) -> Vec<bool> {
            let mut order: Vec<usize> = (0..counts.len()).collect();
            order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then_with(|| tokens[a].cmp(&tokens[b])));
            let mut mask = vec![false; counts.len()];
            for &i in order.iter().take(keep) {
                mask[i] = true;
            }
            mask
        }
        let mut user_counts = vec![0usize; self.n_users()];
        let mut item_counts = vec![0usize; self.n_items()];
        for t in &self.triples {
            user_counts[t.user] += 1;
            item_counts[t.item] += 1;
        }
        let keep_u = top(&user_counts, &self.users, max_users);
        let keep_i = top(&item_counts, &self.items, max_items);
        let kept: Vec<(String, String, f64)> = self
            .triples
            .iter()
            .filter(|t| keep_u[t.user] && keep_i[t.item])
            .map(|t| (self.users[t.user].clone(), self.items[t.item].clone(), t.rating))
            .collect();
        let mut out = Self::from_tokens(self.source.clone(), kept);
        out.checksum = self.checksum.clone();
        out.columns = self.columns;
        out
    }

    fn with_file_meta(mut self, checksum: String, columns: Option<usize>) -> Self {
        self.checksum = Some(checksum);
        self.columns = columns;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Movielens,
    Bookcrossing,
    Jester,
}

impl DatasetFormat {
    /// Declared rating scale.
    pub fn scale(self) -> (f64, f64) {
        match self {
            DatasetFormat::Movielens => (1.0, 5.0),
            DatasetFormat::Bookcrossing => (0.0, 10.0),
            DatasetFormat::Jester => (-10.0, 10.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetFormat::Movielens => "movielens",
            DatasetFormat::Bookcrossing => "bookcrossing",
            DatasetFormat::Jester => "jester",
        }
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = AlbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "movielens" | "ml100k" => Ok(DatasetFormat::Movielens),
            "bookcrossing" => Ok(DatasetFormat::Bookcrossing),
            "jester" => Ok(DatasetFormat::Jester),
            _ => Err(AlbError::Config(format!("unknown dataset format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    /// Keep Book-Crossing rating-0 (implicit feedback) rows.
    pub include_implicit: bool,
    /// Most-rated-users cap (Book-Crossing default 2000).
    pub max_users: Option<usize>,
    /// Most-rated-items cap (Book-Crossing default 2000).
    pub max_items: Option<usize>,
    /// Keep only the first rows of a Jester matrix (default 5000).
    pub first_users: Option<usize>,
}

pub const BOOKCROSSING_DEFAULT_SUBSET: usize = 2000;
pub const JESTER_DEFAULT_USERS: usize = 5000;
pub const JESTER_MISSING: f64 = 99.0;

fn read(path: &Path) -> Result<(Vec<u8>, String)> {
    let bytes = std::fs::read(path).map_err(|source| AlbError::DatasetIo {
        path: path.to_path_buf(),
        source,
    })?;
    let checksum = hex::encode(Sha256::digest(&bytes));
    Ok((bytes, checksum))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> AlbError {
    AlbError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_rating(path: &Path, line: usize, field: &str) -> Result<f64> {
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(path, line, format!("invalid rating `{}`", field.trim()))),
    }
}

fn check_scale(path: &Path, line: usize, v: f64, format: DatasetFormat) -> Result<()> {
    let (lo, hi) = format.scale();
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(parse_err(
            path,
            line,
            format!("rating {v} outside the {} scale [{lo}, {hi}]", format.name()),
        ))
    }
}

fn lines(bytes: &[u8]) -> impl Iterator<Item = (usize, &[u8])> {
    bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix(b"\r").unwrap_or(l)))
        .filter(|(_, l)| !l.iter().all(u8::is_ascii_whitespace))
}

fn utf8<'a>(path: &Path, line: usize, raw: &'a [u8]) -> Result<&'a str> {
    std::str::from_utf8(raw).map_err(|_| parse_err(path, line, "invalid UTF-8"))
}

/// Tab-separated `user item rating timestamp`; the timestamp is ignored.
pub fn ingest_movielens(path: &Path) -> Result<RatingsTable> {
    let (bytes, checksum) = read(path)?;
    let mut tokens = Vec::new();
    for (no, raw) in lines(&bytes) {
        let line = utf8(path, no, raw)?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(parse_err(path, no, format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        let rating = parse_rating(path, no, fields[2])?;
        check_scale(path, no, rating, DatasetFormat::Movielens)?;
        tokens.push((fields[0].trim().to_string(), fields[1].trim().to_string(), rating));
    }
    finish(RatingsTable::from_tokens(path.display().to_string(), tokens).with_file_meta(checksum, None))
}

// Splits one `;`-separated line with optional double-quoted fields.
fn split_semicolon(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ';' if !quoted => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

/// `"User-ID";"ISBN";"Book-Rating"` with a header line, read as Latin-1.
pub fn ingest_bookcrossing(path: &Path, options: &IngestOptions) -> Result<RatingsTable> {
    let (bytes, checksum) = read(path)?;
    let mut tokens = Vec::new();
    for (no, raw) in lines(&bytes) {
        if no == 1 {
            continue;
        }
        let line: String = raw.iter().map(|&b| b as char).collect();
        let fields = split_semicolon(&line);
        if fields.len() != 3 {
            return Err(parse_err(path, no, format!("expected 3 fields, found {}", fields.len())));
        }
        let rating = parse_rating(path, no, &fields[2])?;
        check_scale(path, no, rating, DatasetFormat::Bookcrossing)?;
        if rating == 0.0 && !options.include_implicit {
            continue;
        }
        tokens.push((fields[0].trim().to_string(), fields[1].trim().to_string(), rating));
    }
    let table = RatingsTable::from_tokens(path.display().to_string(), tokens).with_file_meta(checksum, None);
    let users = options.max_users.unwrap_or(BOOKCROSSING_DEFAULT_SUBSET);
    let items = options.max_items.unwrap_or(BOOKCROSSING_DEFAULT_SUBSET);
    finish(table.subset_most_rated(users, items))
}

/// Comma-separated matrix: a leading count column, then one rating per joke
/// with `99` meaning unrated.
pub fn ingest_jester(path: &Path, options: &IngestOptions) -> Result<RatingsTable> {
    let (bytes, checksum) = read(path)?;
    let first = options.first_users.unwrap_or(JESTER_DEFAULT_USERS);
    let mut tokens = Vec::new();
    let mut columns = 0usize;
    for (row, (no, raw)) in lines(&bytes).enumerate() {
        if row >= first {
            break;
        }
        let line = utf8(path, no, raw)?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(parse_err(path, no, "expected a count column followed by ratings"));
        }
        fields[0]
            .trim()
            .parse::<f64>()
            .map_err(|_| parse_err(path, no, format!("invalid count `{}`", fields[0].trim())))?;
        columns = columns.max(fields.len() - 1);
        for (col, field) in fields[1..].iter().enumerate() {
            if field.trim().is_empty() {
                continue;
            }
            let rating = parse_rating(path, no, field)?;
            if rating == JESTER_MISSING {
                continue;
            }
            check_scale(path, no, rating, DatasetFormat::Jester)?;
            tokens.push((format!("row{no}"), format!("joke{}", col + 1), rating));
        }
    }
    finish(
        RatingsTable::from_tokens(path.display().to_string(), tokens)
            .with_file_meta(checksum, Some(columns)),
    )
}

pub fn ingest(path: &Path, format: DatasetFormat, options: &IngestOptions) -> Result<RatingsTable> {
    match format {
        DatasetFormat::Movielens => ingest_movielens(path),
        DatasetFormat::Bookcrossing => ingest_bookcrossing(path, options),
        DatasetFormat::Jester => ingest_jester(path, options),
    }
}

fn finish(table: RatingsTable) -> Result<RatingsTable> {
    if table.is_empty() {
        Err(AlbError::EmptyTable)
    } else {
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents).unwrap();
        f
    }

    #[test]
    fn dedup_keeps_last_rating() {
        let t = RatingsTable::from_tokens(
            "t",
            [("a", "x", 1.0), ("b", "x", 2.0), ("a", "x", 5.0)]
                .map(|(u, i, r)| (u.to_string(), i.to_string(), r)),
        );
        assert_eq!(t.len(), 2);
        assert_eq!(t.triples()[0], Triple { user: 0, item: 0, rating: 5.0 });
    }

    #[test]
    fn movielens_basic() {
        let f = file(b"1\t10\t5\t881250949\n2\t10\t3\t891717742\r\n1\t20\t1\t878887116\n\n");
        let t = ingest_movielens(f.path()).unwrap();
        assert_eq!((t.n_users(), t.n_items(), t.len()), (2, 2, 3));
        assert_eq!(t.rating_range(), Some((1.0, 5.0)));
        assert_eq!(t.checksum().unwrap().len(), 64);
    }

    #[test]
    fn movielens_errors_carry_line_numbers() {
        let f = file(b"1\t10\t5\t0\n1\t11\tfive\t0\n");
        match ingest_movielens(f.path()) {
            Err(AlbError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let f = file(b"1\t10\t7\t0\n");
        assert!(matches!(ingest_movielens(f.path()), Err(AlbError::Parse { line: 1, .. })));
        let f = file(b"\n\n");
        assert!(matches!(ingest_movielens(f.path()), Err(AlbError::EmptyTable)));
        assert!(matches!(
            ingest_movielens(Path::new("/nonexistent/u.data")),
            Err(AlbError::DatasetIo { .. })
        ));
    }

    #[test]
    fn bookcrossing_latin1_and_implicit_filter() {
        let mut bytes = b"\"User-ID\";\"ISBN\";\"Book-Rating\"\n".to_vec();
        bytes.extend_from_slice(b"\"276725\";\"034545104X\";\"0\"\n");
        bytes.extend_from_slice(b"\"276726\";\"0155061224\";\"5\"\n");
        bytes.extend_from_slice(b"\"276727\";\"0446520802\xe9\";\"8\"\n");
        let f = file(&bytes);
        let t = ingest_bookcrossing(f.path(), &IngestOptions::default()).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.item_token(1).ends_with('é'));
        let with = ingest_bookcrossing(
            f.path(),
            &IngestOptions {
                include_implicit: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(with.len(), 3);
    }

    #[test]
    fn bookcrossing_subset_by_rating_count() {
        let mut s = String::from("\"User-ID\";\"ISBN\";\"Book-Rating\"\n");
        // u0 rates 3 books, u1 rates 2, u2 rates 1; b0 is rated by all.
        for (u, b) in [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)] {
            s.push_str(&format!("\"u{u}\";\"b{b}\";\"7\"\n"));
        }
        let f = file(s.as_bytes());
        let t = ingest_bookcrossing(
            f.path(),
            &IngestOptions {
                max_users: Some(2),
                max_items: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((t.n_users(), t.n_items(), t.len()), (2, 2, 4));
    }

    #[test]
    fn jester_drops_missing_and_empty_users() {
        let f = file(b"3,1.5,99,-9.2\n0,99,99,99\n2,10,-10,99\n");
        let t = ingest_jester(f.path(), &IngestOptions::default()).unwrap();
        assert_eq!(t.n_users(), 2);
        assert_eq!(t.len(), 4);
        assert_eq!(t.columns(), Some(3));
        assert_eq!(t.rating_range(), Some((-10.0, 10.0)));
        let first = ingest_jester(
            f.path(),
            &IngestOptions {
                first_users: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(first.n_users(), 1);
    }

    #[test]
    fn format_names() {
        assert_eq!("MovieLens".parse::<DatasetFormat>().unwrap(), DatasetFormat::Movielens);
        assert_eq!("book-crossing".parse::<DatasetFormat>().unwrap(), DatasetFormat::Bookcrossing);
        assert!("netflix".parse::<DatasetFormat>().is_err());
    }
}
