//! Hamming ranking, mean average precision and test oracles.

mod oracle;

pub use oracle::{
    brute_force_min_energy, fixed_point_oracle, ConsistencyMap, KshConsistency, OracleOptions,
    OracleOutcome, SplhConsistency, MAX_BRUTE_FORCE_CELLS,
};

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{BinaryCodes, PackedCodes};
use crate::error::{Error, Result};

/// Database indices by ascending Hamming distance to `query`, ties by index.
pub fn hamming_rank(query: &[i8], database: &BinaryCodes) -> Result<Vec<usize>> {
    if query.len() != database.ncols() {
        return Err(Error::DimensionMismatch {
            context: "query code length",
            expected: database.ncols(),
            actual: query.len(),
        });
    }
    let q = BinaryCodes::new(1, query.len(), query.to_vec())?.packed_words();
    Ok(rank_packed(&database.packed_words(), q.row(0)))
}

/// Counting sort on distance; stable, so ties stay in index order.
fn rank_packed(db: &PackedCodes, query: &[u64]) -> Vec<usize> {
    let d = db.bits();
    let dist: Vec<u32> = (0..db.nrows()).map(|i| db.distance_to(i, query)).collect();
    let mut start = vec![0usize; d + 2];
    for &h in &dist {
        start[h as usize + 1] += 1;
    }
    for k in 1..start.len() {
        start[k] += start[k - 1];
    }
    let mut order = vec![0usize; dist.len()];
    for (i, &h) in dist.iter().enumerate() {
        order[start[h as usize]] = i;
        start[h as usize] += 1;
    }
    order
}

/// Average precision of a ranked relevance list: the mean over relevant
/// ranks `r` of (relevant items in the top `r`) / `r`. `None` when nothing is
/// relevant.
pub fn average_precision(relevant: impl IntoIterator<Item = bool>) -> Option<f64> {
    let (mut hits, mut sum) = (0usize, 0.0);
    for (rank, rel) in relevant.into_iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// Per-query rankings and precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    pub rankings: Vec<Vec<usize>>,
    /// `None` for queries without relevant items.
    pub average_precisions: Vec<Option<f64>>,
    pub map: f64,
    /// Queries excluded for having no relevant database item.
    pub skipped: usize,
}

impl RankingResult {
    pub fn valid_queries(&self) -> usize {
        self.average_precisions.len() - self.skipped
    }
}

/// Mean average precision of Hamming ranking.
///
/// `relevant(q, j)` says whether database item `j` is relevant to query `q`.
/// With `exclude_self`, query `q` is dropped from its own ranking when it is
/// database item `q`.
pub fn mean_average_precision(
    queries: &BinaryCodes,
    database: &BinaryCodes,
    relevant: impl Fn(usize, usize) -> bool + Sync,
    exclude_self: bool,
) -> Result<RankingResult> {
    if queries.ncols() != database.ncols() {
        return Err(Error::DimensionMismatch {
            context: "query code length",
            expected: database.ncols(),
            actual: queries.ncols(),
        });
    }
    let db = database.packed_words();
    let qp = queries.packed_words();
    let per_query: Vec<(Vec<usize>, Option<f64>)> = (0..queries.nrows())
        .into_par_iter()
        .map(|q| {
            let mut ranking = rank_packed(&db, qp.row(q));
            if exclude_self {
                ranking.retain(|&j| j != q);
            }
            let ap = average_precision(ranking.iter().map(|&j| relevant(q, j)));
            (ranking, ap)
        })
        .collect();
    let (rankings, average_precisions): (Vec<_>, Vec<_>) = per_query.into_iter().unzip();
    let valid: Vec<f64> = average_precisions.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::NoValidQueries);
    }
    Ok(RankingResult {
        rankings,
        skipped: average_precisions.len() - valid.len(),
        map: valid.iter().sum::<f64>() / valid.len() as f64,
        average_precisions,
    })
}

/// Metric report written by `eval`, as `key=value` lines or JSON.
///
/// JSON schema: an object with the fields below; `map` is a number in
/// `[0, 1]`, counts are integers, `bits` is the code length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub map: f64,
    pub queries: usize,
    pub valid_queries: usize,
    pub skipped_queries: usize,
    pub database: usize,
    pub bits: usize,
    pub exclude_self: bool,
}

impl EvalReport {
    pub fn new(result: &RankingResult, database: usize, bits: usize, exclude_self: bool) -> Self {
        EvalReport {
            map: result.map,
            queries: result.average_precisions.len(),
            valid_queries: result.valid_queries(),
            skipped_queries: result.skipped,
            database,
            bits,
            exclude_self,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "map={:.6}", self.map)?;
        writeln!(f, "queries={}", self.queries)?;
        writeln!(f, "valid_queries={}", self.valid_queries)?;
        writeln!(f, "skipped_queries={}", self.skipped_queries)?;
        writeln!(f, "database={}", self.database)?;
        writeln!(f, "bits={}", self.bits)?;
        write!(f, "exclude_self={}", self.exclude_self)
    }
}
