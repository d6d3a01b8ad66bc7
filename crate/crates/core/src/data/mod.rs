//! Rating matrices, train/test split pairs and the synthetic two-moons cloud.
//!
//! A [`RatingMatrix`] stores the known entries of an `n_users × n_items` score
//! matrix in item-major compressed form, so the labeled user set of any item
//! is a contiguous slice.

mod movielens;
mod moons;

pub use movielens::{
    load_split_pairs, load_split_pairs_with, parse_movielens, read_movielens_file,
    write_standard_splits, ParseOptions, SplitScheme,
};
pub use moons::{make_two_moons, PointCloud};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval of admissible rating values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingRange {
    pub min: f64,
    pub max: f64,
}

impl RatingRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }
}

impl Default for RatingRange {
    /// The 1–5 star scale used by MovieLens.
    fn default() -> Self {
        Self::new(1.0, 5.0)
    }
}

/// One known entry of a score matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

impl Rating {
    pub fn new(user: usize, item: usize, value: f64) -> Self {
        Self { user, item, value }
    }
}

/// Sparse score matrix with per-item access to the labeled users.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    n_users: usize,
    n_items: usize,
    range: RatingRange,
    // item-major CSC: entries of item j live in item_ptr[j]..item_ptr[j + 1],
    // sorted by user.
    item_ptr: Vec<usize>,
    users: Vec<usize>,
    values: Vec<f64>,
}

impl RatingMatrix {
    /// Builds a matrix, rejecting out-of-range indices or ratings and
    /// duplicate `(user, item)` pairs.
    pub fn new(
        n_users: usize,
        n_items: usize,
        mut entries: Vec<Rating>,
        range: RatingRange,
    ) -> Result<Self> {
        for e in &entries {
            if e.user >= n_users || e.item >= n_items {
                return Err(Error::invalid(format!(
                    "entry (user {}, item {}) outside a {n_users}x{n_items} matrix",
                    e.user, e.item
                )));
            }
            if !e.value.is_finite() || !range.contains(e.value) {
                return Err(Error::invalid(format!(
                    "rating {} for (user {}, item {}) outside [{}, {}]",
                    e.value, e.user, e.item, range.min, range.max
                )));
            }
        }
        entries.sort_unstable_by_key(|e| (e.item, e.user));
        if let Some(w) = entries
            .windows(2)
            .find(|w| w[0].item == w[1].item && w[0].user == w[1].user)
        {
            return Err(Error::invalid(format!(
                "duplicate entry for (user {}, item {})",
                w[0].user, w[0].item
            )));
        }

        let mut item_ptr = vec![0usize; n_items + 1];
        for e in &entries {
            item_ptr[e.item + 1] += 1;
        }
        for j in 0..n_items {
            item_ptr[j + 1] += item_ptr[j];
        }
        Ok(Self {
            n_users,
            n_items,
            range,
            item_ptr,
            users: entries.iter().map(|e| e.user).collect(),
            values: entries.iter().map(|e| e.value).collect(),
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn range(&self) -> RatingRange {
        self.range
    }

    /// Number of known entries.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Labeled users of `item` (ascending) and their ratings.
    pub fn item_labels(&self, item: usize) -> (&[usize], &[f64]) {
        let span = self.item_ptr[item]..self.item_ptr[item + 1];
        (&self.users[span.clone()], &self.values[span])
    }

    pub fn item_count(&self, item: usize) -> usize {
        self.item_ptr[item + 1] - self.item_ptr[item]
    }

    pub fn get(&self, user: usize, item: usize) -> Option<f64> {
        let (users, values) = self.item_labels(item);
        users.binary_search(&user).ok().map(|k| values[k])
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.get(user, item).is_some()
    }

    /// Entries in item-major order.
    pub fn iter(&self) -> impl Iterator<Item = Rating> + '_ {
        (0..self.n_items).flat_map(move |item| {
            let (users, values) = self.item_labels(item);
            users
                .iter()
                .zip(values)
                .map(move |(&user, &value)| Rating { user, item, value })
        })
    }

    /// Mean of all known ratings, `None` when the matrix is empty.
    pub fn global_mean(&self) -> Option<f64> {
        if self.values.is_empty() {
            None
        } else {
            Some(self.values.iter().sum::<f64>() / self.values.len() as f64)
        }
    }

    /// Swaps the roles of users and items.
    pub fn transpose(&self) -> Self {
        let entries = self
            .iter()
            .map(|r| Rating::new(r.item, r.user, r.value))
            .collect();
        Self::new(self.n_items, self.n_users, entries, self.range)
            .expect("transpose of a valid matrix is valid")
    }

    /// Same entries embedded in a larger (or equal) shape.
    pub fn with_shape(&self, n_users: usize, n_items: usize) -> Result<Self> {
        Self::new(n_users, n_items, self.iter().collect(), self.range)
    }

    /// Writes the entries as MovieLens lines (1-based ids, zero timestamp).
    pub fn write_movielens<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut rows: Vec<Rating> = self.iter().collect();
        rows.sort_unstable_by_key(|r| (r.user, r.item));
        for r in rows {
            writeln!(out, "{}\t{}\t{}\t0", r.user + 1, r.item + 1, r.value)?;
        }
        Ok(())
    }
}

/// A named train/test pair over the same matrix shape with disjoint keys.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub name: String,
    pub train: RatingMatrix,
    pub test: RatingMatrix,
}

impl SplitPair {
    pub fn new(name: impl Into<String>, train: RatingMatrix, test: RatingMatrix) -> Result<Self> {
        let name = name.into();
        if train.n_users() != test.n_users() || train.n_items() != test.n_items() {
            return Err(Error::invalid(format!(
                "split {name}: train is {}x{} but test is {}x{}",
                train.n_users(),
                train.n_items(),
                test.n_users(),
                test.n_items()
            )));
        }
        if let Some(r) = test.iter().find(|r| train.contains(r.user, r.item)) {
            return Err(Error::invalid(format!(
                "split {name}: (user {}, item {}) appears in both train and test",
                r.user, r.item
            )));
        }
        Ok(Self { name, train, test })
    }

    /// The pair with users and items swapped, for item-based prediction.
    pub fn transpose(&self) -> Self {
        Self {
            name: self.name.clone(),
            train: self.train.transpose(),
            test: self.test.transpose(),
        }
    }
}
