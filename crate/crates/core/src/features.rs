//! Feature vectors for the graph nodes.
//!
//! For rating data each node (a user, or an item in item-based mode) is
//! described by its training rating row with the missing entries imputed.
//! Two optional post-processing steps are available: a truncated-SVD
//! projection onto the top singular directions, and root-mean-square scaling
//! that divides every vector by `√m` (`m` = row length) so squared distances
//! become mean squared rating differences. The pipeline default uses RMS
//! scaling, which keeps Gaussian kernel bandwidths in rating units regardless
//! of how many users or items the rows span.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::data::{PointCloud, RatingMatrix};
use crate::error::{Error, Result};

/// Which side of the rating matrix the graph nodes live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Nodes are users; one prediction per item.
    #[default]
    UserBased,
    /// Nodes are items; one prediction per user.
    ItemBased,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "user_based" | "user" => Ok(Axis::UserBased),
            "item_based" | "item" => Ok(Axis::ItemBased),
            other => Err(Error::arg(format!(
                "unknown axis {other:?} (expected user_based or item_based)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impute {
    /// The node's own mean rating; the global mean for nodes with no ratings.
    #[default]
    RowMean,
    GlobalMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Raw imputed ratings.
    None,
    /// Divide by `√m`, `m` being the imputed row length.
    #[default]
    Rms,
}

/// Recipe for [`build_features`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub axis: Axis,
    pub impute: Impute,
    pub reduce_rank: Option<usize>,
    pub scaling: Scaling,
}

/// How a [`FeatureSet`] was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Ratings(FeatureOptions),
    /// Points used directly as their own feature vectors.
    Coordinates,
    /// Caller-supplied matrix.
    Raw,
}

/// `n` feature vectors of dimension `d`, stored as the rows of a dense matrix.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    vectors: Mat<f64>,
    axis: Axis,
    provenance: Provenance,
}

impl FeatureSet {
    pub fn new(vectors: Mat<f64>, axis: Axis, provenance: Provenance) -> Result<Self> {
        if vectors.ncols() == 0 {
            return Err(Error::arg("feature dimension must be at least 1"));
        }
        for j in 0..vectors.ncols() {
            for i in 0..vectors.nrows() {
                if !vectors[(i, j)].is_finite() {
                    return Err(Error::invalid(format!(
                        "feature ({i}, {j}) is not finite"
                    )));
                }
            }
        }
        Ok(Self {
            vectors,
            axis,
            provenance,
        })
    }

    /// Features from explicit rows (all of equal length).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::arg("feature rows have unequal lengths"));
        }
        Self::new(
            Mat::from_fn(rows.len(), d, |i, j| rows[i][j]),
            Axis::UserBased,
            Provenance::Raw,
        )
    }

    /// Planar points as 2-d features.
    pub fn from_points(cloud: &PointCloud) -> Result<Self> {
        let p = &cloud.points;
        Self::new(
            Mat::from_fn(p.len(), 2, |i, j| p[i][j]),
            Axis::UserBased,
            Provenance::Coordinates,
        )
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> faer::MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Same vectors with their rows reordered: row `i` of the result is row
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        Self {
            vectors: Mat::from_fn(self.len(), self.dim(), |i, j| self.vectors[(perm[i], j)]),
            axis: self.axis,
            provenance: self.provenance.clone(),
        }
    }

    /// Headerless CSV, one vector per line.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.len() {
            w.write_record((0..self.dim()).map(|j| self.vectors[(i, j)].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Dense `nodes × columns` rating matrix with missing entries imputed.
fn imputed(train: &RatingMatrix, impute: Impute, global: f64) -> Mat<f64> {
    let (n, m) = (train.n_users(), train.n_items());
    let fill: Vec<f64> = match impute {
        Impute::GlobalMean => vec![global; n],
        Impute::RowMean => {
            let mut sum = vec![0.0; n];
            let mut count = vec![0usize; n];
            for r in train.iter() {
                sum[r.user] += r.value;
                count[r.user] += 1;
            }
            sum.iter()
                .zip(&count)
                .map(|(&s, &c)| if c == 0 { global } else { s / c as f64 })
                .collect()
        }
    };
    let mut out = Mat::from_fn(n, m, |i, _| fill[i]);
    for r in train.iter() {
        out[(r.user, r.item)] = r.value;
    }
    out
}

/// Projects the rows of `a` onto its top-`rank` right singular directions,
/// returning the `n × rank` coordinates `U_r Σ_r`. Each left singular vector
/// is signed so that its largest-magnitude component is positive.
fn truncated_svd_coordinates(a: &Mat<f64>, rank: usize) -> Result<Mat<f64>> {
    let svd = a.thin_svd().map_err(|e| Error::Numeric {
        message: format!("singular value decomposition failed: {e:?}"),
        condition: f64::INFINITY,
    })?;
    let (u, s) = (svd.U(), svd.S());
    let mut out = Mat::zeros(a.nrows(), rank);
    for k in 0..rank {
        let col = u.col(k);
        let mut pivot = 0;
        for i in 0..col.nrows() {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col.nrows() > 0 && col[pivot] < 0.0 { -1.0 } else { 1.0 };
        let sigma = s[k];
        for i in 0..a.nrows() {
            out[(i, k)] = sign * col[i] * sigma;
        }
    }
    Ok(out)
}

/// Builds node feature vectors from a training rating matrix.
pub fn build_features(train: &RatingMatrix, opts: &FeatureOptions) -> Result<FeatureSet> {
    if train.is_empty() {
        return Err(Error::arg("cannot build features from an empty training matrix"));
    }
    let oriented;
    let train = match opts.axis {
        Axis::UserBased => train,
        Axis::ItemBased => {
            oriented = train.transpose();
            &oriented
        }
    };
    let (n, m) = (train.n_users(), train.n_items());
    if let Some(r) = opts.reduce_rank {
        if r == 0 || r > n.min(m) {
            return Err(Error::arg(format!(
                "reduce_rank {r} must lie in 1..={}",
                n.min(m)
            )));
        }
    }
    let global = train.global_mean().expect("non-empty");
    let mut vectors = imputed(train, opts.impute, global);
    if let Some(r) = opts.reduce_rank {
        vectors = truncated_svd_coordinates(&vectors, r)?;
    }
    if opts.scaling == Scaling::Rms {
        let s = 1.0 / (m as f64).sqrt();
        vectors = Mat::from_fn(vectors.nrows(), vectors.ncols(), |i, j| vectors[(i, j)] * s);
    }
    FeatureSet::new(vectors, opts.axis, Provenance::Ratings(*opts))
}
