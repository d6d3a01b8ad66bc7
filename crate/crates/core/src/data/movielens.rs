//! MovieLens tab-separated rating files (`user \t item \t rating \t timestamp`,
//! 1-based ids) and the standard `u1..u5` / `ua`,`ub` split files.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Rating, RatingMatrix, RatingRange, SplitPair};
use crate::error::{Error, Result};

/// Shape and range overrides for parsing.
///
/// When a dimension is `None` it is inferred as the largest id seen.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub n_users: Option<usize>,
    pub n_items: Option<usize>,
    pub range: RatingRange,
}

/// Which family of split files to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitScheme {
    /// `u1.base/u1.test` through `u5.base/u5.test`.
    #[serde(rename = "u1..u5")]
    U1ToU5,
    /// `ua.base/ua.test` and `ub.base/ub.test`.
    #[serde(rename = "ua_ub")]
    UaUb,
}

impl SplitScheme {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            SplitScheme::U1ToU5 => &["u1", "u2", "u3", "u4", "u5"],
            SplitScheme::UaUb => &["ua", "ub"],
        }
    }
}

impl FromStr for SplitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u1..u5" | "u1-u5" | "u1_u5" => Ok(SplitScheme::U1ToU5),
            "ua_ub" | "ua-ub" | "uaub" => Ok(SplitScheme::UaUb),
            other => Err(Error::arg(format!(
                "unknown split scheme {other:?} (expected u1..u5 or ua_ub)"
            ))),
        }
    }
}

/// Raw 0-based entries plus the largest ids seen.
struct RawRatings {
    entries: Vec<Rating>,
    max_user: usize,
    max_item: usize,
}

fn parse_field<'a>(field: Option<&'a str>, line: usize, what: &str) -> Result<&'a str> {
    field.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what} field"),
    })
}

fn parse_id(field: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let text = parse_field(field, line, what)?;
    let id: usize = text.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what} {text:?} is not a positive integer"),
    })?;
    if id == 0 {
        return Err(Error::Parse {
            line,
            message: format!("{what} ids are 1-based, got 0"),
        });
    }
    Ok(id - 1)
}

fn parse_raw<R: BufRead>(source: R, range: RatingRange) -> Result<RawRatings> {
    let mut raw = RawRatings {
        entries: Vec::new(),
        max_user: 0,
        max_item: 0,
    };
    for (k, line) in source.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let user = parse_id(fields.next(), lineno, "user")?;
        let item = parse_id(fields.next(), lineno, "item")?;
        let text = parse_field(fields.next(), lineno, "rating")?;
        let value: f64 = text.trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("rating {text:?} is not a number"),
        })?;
        let stamp = parse_field(fields.next(), lineno, "timestamp")?;
        if stamp.trim().parse::<i64>().is_err() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("timestamp {stamp:?} is not an integer"),
            });
        }
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: "expected exactly 4 tab-separated fields".into(),
            });
        }
        if !value.is_finite() || !range.contains(value) {
            return Err(Error::invalid(format!(
                "line {lineno}: rating {value} outside [{}, {}]",
                range.min, range.max
            )));
        }
        raw.max_user = raw.max_user.max(user + 1);
        raw.max_item = raw.max_item.max(item + 1);
        raw.entries.push(Rating::new(user, item, value));
    }
    Ok(raw)
}

fn resolve_dim(given: Option<usize>, seen: usize, what: &str, empty: bool) -> Result<usize> {
    match given {
        Some(n) if n < seen => Err(Error::invalid(format!(
            "{what} id {seen} exceeds the configured count {n}"
        ))),
        Some(n) => Ok(n),
        None if empty => Err(Error::arg(format!(
            "cannot infer the number of {what}s from an empty input; supply it explicitly"
        ))),
        None => Ok(seen),
    }
}

/// Parses a MovieLens rating stream into a 0-based matrix (`index = id - 1`).
/// Timestamps are validated and discarded.
pub fn parse_movielens<R: BufRead>(source: R, opts: ParseOptions) -> Result<RatingMatrix> {
    let raw = parse_raw(source, opts.range)?;
    let empty = raw.entries.is_empty();
    let n_users = resolve_dim(opts.n_users, raw.max_user, "user", empty)?;
    let n_items = resolve_dim(opts.n_items, raw.max_item, "item", empty)?;
    RatingMatrix::new(n_users, n_items, raw.entries, opts.range)
}

pub fn read_movielens_file(path: &Path, opts: ParseOptions) -> Result<RatingMatrix> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_movielens(BufReader::new(file), opts)
}

fn read_raw_file(path: &Path, range: RatingRange) -> Result<RawRatings> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_raw(BufReader::new(file), range)
}

/// Loads every base/test pair of `scheme` from `dir`. All pairs share one
/// shape: the largest ids across the whole scheme.
pub fn load_split_pairs(dir: &Path, scheme: SplitScheme) -> Result<Vec<SplitPair>> {
    load_split_pairs_with(dir, scheme, ParseOptions::default())
}

pub fn load_split_pairs_with(
    dir: &Path,
    scheme: SplitScheme,
    opts: ParseOptions,
) -> Result<Vec<SplitPair>> {
    let mut raws = Vec::new();
    let (mut max_user, mut max_item) = (0, 0);
    for name in scheme.names() {
        let base = read_raw_file(&dir.join(format!("{name}.base")), opts.range)?;
        let test = read_raw_file(&dir.join(format!("{name}.test")), opts.range)?;
        for r in [&base, &test] {
            max_user = max_user.max(r.max_user);
            max_item = max_item.max(r.max_item);
        }
        raws.push((name, base, test));
    }
    let all_empty = raws
        .iter()
        .all(|(_, b, t)| b.entries.is_empty() && t.entries.is_empty());
    let n_users = resolve_dim(opts.n_users, max_user, "user", all_empty)?;
    let n_items = resolve_dim(opts.n_items, max_item, "item", all_empty)?;
    raws.into_iter()
        .map(|(name, base, test)| {
            let train = RatingMatrix::new(n_users, n_items, base.entries, opts.range)?;
            let test = RatingMatrix::new(n_users, n_items, test.entries, opts.range)?;
            SplitPair::new(*name, train, test)
        })
        .collect()
}

fn sort_by_user_item(lines: &mut [&str]) {
    let key = |l: &str| -> (u64, u64) {
        let mut f = l.split('\t');
        let u = f.next().and_then(|x| x.trim().parse().ok()).unwrap_or(0);
        let i = f.next().and_then(|x| x.trim().parse().ok()).unwrap_or(0);
        (u, i)
    };
    lines.sort_by_key(|l| key(l));
}

fn write_lines(path: &Path, lines: &[&str]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for l in lines {
        writeln!(out, "{l}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Regenerates the standard split files from a full rating file (`u.data`),
/// following the dataset's own split procedure:
///
/// * `uK` (K = 1..5): the K-th consecutive fifth of the file is the test set,
///   the rest is the base set;
/// * `ua` / `ub`: walking the file in order, each user's 1st–10th (resp.
///   11th–20th) ratings form the test set.
///
/// Output files are sorted by user then item, as in the distributed splits.
/// Original lines (including timestamps) are copied verbatim.
pub fn write_standard_splits(ratings: &Path, out_dir: &Path) -> Result<()> {
    let text = fs::read_to_string(ratings).map_err(|e| Error::io(ratings, e))?;
    // Validate before splitting.
    parse_raw(text.as_bytes(), RatingRange::default())?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let n = lines.len();
    for k in 0..5 {
        let (lo, hi) = (k * n / 5, (k + 1) * n / 5);
        let mut test: Vec<&str> = lines[lo..hi].to_vec();
        let mut base: Vec<&str> = lines[..lo].iter().chain(&lines[hi..]).copied().collect();
        sort_by_user_item(&mut test);
        sort_by_user_item(&mut base);
        write_lines(&out_dir.join(format!("u{}.test", k + 1)), &test)?;
        write_lines(&out_dir.join(format!("u{}.base", k + 1)), &base)?;
    }

    for (name, first, last) in [("ua", 1usize, 10usize), ("ub", 11, 20)] {
        let mut seen = std::collections::HashMap::<&str, usize>::new();
        let (mut test, mut base) = (Vec::new(), Vec::new());
        for &l in &lines {
            let user = l.split('\t').next().unwrap_or("");
            let count = seen.entry(user).or_default();
            *count += 1;
            if (first..=last).contains(count) {
                test.push(l);
            } else {
                base.push(l);
            }
        }
        sort_by_user_item(&mut test);
        sort_by_user_item(&mut base);
        write_lines(&out_dir.join(format!("{name}.test")), &test)?;
        write_lines(&out_dir.join(format!("{name}.base")), &base)?;
    }
    Ok(())
}
