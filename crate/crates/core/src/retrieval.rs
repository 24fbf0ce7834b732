//! Exact cosine retrieval, margin-criterion scoring, bitext mining and the
//! similarity-search error rate.
//!
//! Mining scores a candidate pair `(x, y)` by comparing its cosine to the
//! mean cosine of each side's k nearest neighbors:
//!
//! ```text
//! a = cos(x, y)
//! b = sum_{z in NNk(x)} cos(x, z) / 2k  +  sum_{z in NNk(y)} cos(y, z) / 2k
//! ```
//!
//! with variants `absolute = a`, `distance = a - b` and `ratio = a / b`; the
//! ratio variant corrects the scale inconsistency that makes raw cosine
//! thresholds unreliable across neighborhoods of different density.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::executor::Executor;

/// Rows of 32-bit embeddings with unique external ids.
///
/// Rows are checked at ingestion: zero-norm rows are rejected, so cosines are
/// always defined.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    norms: Vec<f32>,
    ids: Vec<String>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>, ids: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("embedding dim must be positive".to_string()));
        }
        if data.len() != dim * ids.len() {
            return Err(Error::DimMismatch {
                op: "EmbeddingMatrix::new",
                expected: dim * ids.len(),
                got: data.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let mut norms = Vec::with_capacity(ids.len());
        for (row, _) in ids.iter().enumerate() {
            let slice = &data[row * dim..(row + 1) * dim];
            let mut sq = 0.0f32;
            for &v in slice {
                sq += v * v;
            }
            let norm = num_traits::Float::sqrt(sq);
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::ZeroNormRow { row });
            }
            norms.push(norm);
        }
        Ok(EmbeddingMatrix {
            dim,
            data,
            norms,
            ids,
        })
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> &str {
        &self.ids[row]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    fn norm(&self, row: usize) -> f32 {
        self.norms[row]
    }
}

/// Cosine of two rows across matrices; accumulated in element order so the
/// result is identical no matter which path computes it.
pub fn cosine(a: &EmbeddingMatrix, i: usize, b: &EmbeddingMatrix, j: usize) -> f32 {
    let (ra, rb) = (a.row(i), b.row(j));
    let mut dot = 0.0f32;
    for (x, y) in ra.iter().zip(rb.iter()) {
        dot += x * y;
    }
    dot / (a.norm(i) * b.norm(j))
}

/// k nearest neighbors per query row: `(index row, cosine)` sorted by
/// descending cosine, ties broken by the lower row index.
pub type NeighborList = Vec<Vec<(usize, f32)>>;

fn ordered_better(a: (usize, f32), b: (usize, f32)) -> bool {
    // true when a ranks before b
    a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
}

/// Exact brute-force cosine k-NN of every query row against the index.
/// The index is traversed in blocks for cache locality; results do not
/// depend on the block size or the executor's parallelism.
pub fn knn<E: Executor>(
    queries: &EmbeddingMatrix,
    index: &EmbeddingMatrix,
    k: usize,
    exec: &E,
) -> Result<NeighborList> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".to_string()));
    }
    if k > index.rows() {
        return Err(Error::KTooLarge {
            k,
            rows: index.rows(),
        });
    }
    if queries.dim() != index.dim() {
        return Err(Error::DimMismatch {
            op: "knn dim",
            expected: index.dim(),
            got: queries.dim(),
        });
    }

    const BLOCK: usize = 256;
    Ok(exec.map(queries.rows(), |q| {
        let mut scored: Vec<(usize, f32)> = Vec::with_capacity(index.rows());
        let mut start = 0;
        while start < index.rows() {
            let end = (start + BLOCK).min(index.rows());
            for r in start..end {
                scored.push((r, cosine(queries, q, index, r)));
            }
            start = end;
        }
        scored.sort_by(|&a, &b| {
            if ordered_better(a, b) {
                core::cmp::Ordering::Less
            } else if ordered_better(b, a) {
                core::cmp::Ordering::Greater
            } else {
                core::cmp::Ordering::Equal
            }
        });
        scored.truncate(k);
        scored
    }))
}

/// Margin scoring variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginVariant {
    /// The raw cosine.
    Absolute,
    /// Cosine minus the neighborhood mean.
    Distance,
    /// Cosine divided by the neighborhood mean (the default).
    Ratio,
}

impl core::str::FromStr for MarginVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(MarginVariant::Absolute),
            "distance" => Ok(MarginVariant::Distance),
            "ratio" => Ok(MarginVariant::Ratio),
            other => Err(Error::Invalid(alloc::format!(
                "unknown margin variant '{other}' (absolute|distance|ratio)"
            ))),
        }
    }
}

/// Margin score of a candidate with cosine `cos_xy`, given the cosines of
/// each side's k nearest neighbors (exactly `k` entries each).
pub fn margin_score(
    cos_xy: f32,
    nn_x: &[f32],
    nn_y: &[f32],
    k: usize,
    variant: MarginVariant,
) -> Result<f32> {
    if nn_x.len() != k || nn_y.len() != k {
        return Err(Error::DimMismatch {
            op: "margin_score neighborhood",
            expected: k,
            got: if nn_x.len() != k { nn_x.len() } else { nn_y.len() },
        });
    }
    if variant == MarginVariant::Absolute {
        return Ok(cos_xy);
    }
    let two_k = 2.0 * k as f32;
    let mut b = 0.0f32;
    for &c in nn_x {
        b += c / two_k;
    }
    for &c in nn_y {
        b += c / two_k;
    }
    match variant {
        MarginVariant::Absolute => unreachable!(),
        MarginVariant::Distance => Ok(cos_xy - b),
        MarginVariant::Ratio => {
            if b == 0.0 {
                Err(Error::DegenerateNeighborhood)
            } else {
                Ok(cos_xy / b)
            }
        }
    }
}

/// A scored mining candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct MiningCandidate {
    pub src: usize,
    pub tgt: usize,
    pub src_id: String,
    pub tgt_id: String,
    pub score: f32,
}

/// Mines candidate translation pairs from two comparable corpora.
///
/// For every source row the k forward neighbors are re-scored with the
/// margin using both sides' neighborhoods; the best-scoring neighbor becomes
/// the row's candidate. Candidates at or above `threshold` are kept and then
/// deduplicated one-to-one, greedily by descending score, so each source and
/// each target appears at most once. Fully deterministic: all ties fall back
/// to row indices.
pub fn mine_bitext<E: Executor>(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    k: usize,
    threshold: f32,
    variant: MarginVariant,
    exec: &E,
) -> Result<Vec<MiningCandidate>> {
    if src.rows() == 0 || tgt.rows() == 0 {
        return Err(Error::Invalid("mining needs non-empty matrices".to_string()));
    }
    let fwd = knn(src, tgt, k, exec)?;
    let bwd = knn(tgt, src, k, exec)?;
    let fwd_means: Vec<Vec<f32>> = fwd
        .iter()
        .map(|nn| nn.iter().map(|&(_, c)| c).collect())
        .collect();
    let bwd_means: Vec<Vec<f32>> = bwd
        .iter()
        .map(|nn| nn.iter().map(|&(_, c)| c).collect())
        .collect();

    let mut candidates: Vec<MiningCandidate> = Vec::new();
    for (i, neighbors) in fwd.iter().enumerate() {
        let mut best: Option<(usize, f32)> = None;
        for &(j, cos_xy) in neighbors {
            let score = margin_score(cos_xy, &fwd_means[i], &bwd_means[j], k, variant)?;
            let better = match best {
                None => true,
                Some((bj, bs)) => score > bs || (score == bs && j < bj),
            };
            if better {
                best = Some((j, score));
            }
        }
        let (j, score) = best.expect("k >= 1 neighbors");
        if score >= threshold {
            candidates.push(MiningCandidate {
                src: i,
                tgt: j,
                src_id: src.id(i).to_string(),
                tgt_id: tgt.id(j).to_string(),
                score,
            });
        }
    }

    // one-to-one dedup, highest score first
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.src.cmp(&b.src))
            .then(a.tgt.cmp(&b.tgt))
    });
    let mut used_src = BTreeSet::new();
    let mut used_tgt = BTreeSet::new();
    let mut kept = Vec::new();
    for c in candidates {
        if !used_src.contains(&c.src) && !used_tgt.contains(&c.tgt) {
            used_src.insert(c.src);
            used_tgt.insert(c.tgt);
            kept.push(c);
        }
    }
    Ok(kept)
}

/// Precision, recall and F1 of mined candidates against gold id pairs.
pub fn evaluate_f1(
    candidates: &[(String, String)],
    gold: &[(String, String)],
) -> Result<(f64, f64, f64)> {
    if gold.is_empty() {
        return Err(Error::Invalid("gold set is empty".to_string()));
    }
    let gold_set: BTreeSet<(&str, &str)> = gold
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    if candidates.is_empty() {
        return Ok((0.0, 0.0, 0.0));
    }
    let hits = candidates
        .iter()
        .filter(|(a, b)| gold_set.contains(&(a.as_str(), b.as_str())))
        .count();
    let precision = hits as f64 / candidates.len() as f64;
    let recall = hits as f64 / gold.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((precision, recall, f1))
}

/// Similarity-search error rates for a gold bijection `(src_id, tgt_id)`:
/// per direction, the fraction of queries whose cosine 1-NN in the other
/// matrix is not the gold counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub forward_error: f64,
    pub backward_error: f64,
    pub mean_error: f64,
}

pub fn similarity_error_rate<E: Executor>(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    gold: &[(String, String)],
    exec: &E,
) -> Result<SimilarityReport> {
    if gold.len() != src.rows() || gold.len() != tgt.rows() {
        return Err(Error::NotBijective(alloc::format!(
            "gold has {} pairs for {}/{} rows",
            gold.len(),
            src.rows(),
            tgt.rows()
        )));
    }
    let mut src_of: alloc::collections::BTreeMap<&str, &str> = alloc::collections::BTreeMap::new();
    let mut tgt_of: alloc::collections::BTreeMap<&str, &str> = alloc::collections::BTreeMap::new();
    for (s, t) in gold {
        if src_of.insert(s.as_str(), t.as_str()).is_some() {
            return Err(Error::NotBijective(alloc::format!("source '{s}' repeats")));
        }
        if tgt_of.insert(t.as_str(), s.as_str()).is_some() {
            return Err(Error::NotBijective(alloc::format!("target '{t}' repeats")));
        }
    }
    for id in src.ids() {
        if !src_of.contains_key(id.as_str()) {
            return Err(Error::NotBijective(alloc::format!(
                "source id '{id}' has no gold pair"
            )));
        }
    }
    for id in tgt.ids() {
        if !tgt_of.contains_key(id.as_str()) {
            return Err(Error::NotBijective(alloc::format!(
                "target id '{id}' has no gold pair"
            )));
        }
    }

    let forward = knn(src, tgt, 1, exec)?;
    let mut fwd_errors = 0usize;
    for (i, nn) in forward.iter().enumerate() {
        let found = tgt.id(nn[0].0);
        if src_of[src.id(i)] != found {
            fwd_errors += 1;
        }
    }
    let backward = knn(tgt, src, 1, exec)?;
    let mut bwd_errors = 0usize;
    for (j, nn) in backward.iter().enumerate() {
        let found = src.id(nn[0].0);
        if tgt_of[tgt.id(j)] != found {
            bwd_errors += 1;
        }
    }
    let forward_error = 100.0 * fwd_errors as f64 / src.rows() as f64;
    let backward_error = 100.0 * bwd_errors as f64 / tgt.rows() as f64;
    Ok(SimilarityReport {
        forward_error,
        backward_error,
        mean_error: 0.5 * (forward_error + backward_error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::Serial;
    use alloc::vec;

    fn matrix(rows: &[&[f32]]) -> EmbeddingMatrix {
        let dim = rows[0].len();
        let data: Vec<f32> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let ids: Vec<String> = (0..rows.len()).map(|i| alloc::format!("r{i}")).collect();
        EmbeddingMatrix::new(dim, data, ids).unwrap()
    }

    #[test]
    fn knn_identical_vector_scores_one() {
        let q = matrix(&[&[1.0, 0.0]]);
        let idx = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let nn = knn(&q, &idx, 1, &Serial).unwrap();
        assert_eq!(nn[0][0].0, 0);
        assert!((nn[0][0].1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn knn_tie_breaks_by_row_index() {
        let q = matrix(&[&[1.0, 1.0]]);
        let idx = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let nn = knn(&q, &idx, 2, &Serial).unwrap();
        assert_eq!(nn[0][0].0, 0);
        assert_eq!(nn[0][1].0, 1);
        for &(_, c) in &nn[0] {
            assert!((c - core::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        }
    }

    #[test]
    fn knn_k_too_large_is_rejected() {
        let q = matrix(&[&[1.0, 0.0]]);
        let idx = matrix(&[&[1.0, 0.0]]);
        assert_eq!(
            knn(&q, &idx, 2, &Serial).unwrap_err(),
            Error::KTooLarge { k: 2, rows: 1 }
        );
    }

    #[test]
    fn zero_norm_rows_are_rejected_at_ingestion() {
        let err = EmbeddingMatrix::new(2, vec![0.0, 0.0], vec!["a".to_string()]).unwrap_err();
        assert_eq!(err, Error::ZeroNormRow { row: 0 });
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = EmbeddingMatrix::new(
            1,
            vec![1.0, 2.0],
            vec!["a".to_string(), "a".to_string()],
        )
        .unwrap_err();
        assert_eq!(err, Error::DuplicateId("a".to_string()));
    }

    #[test]
    fn margin_ratio_hand_example_k1() {
        let s = margin_score(0.8, &[0.4], &[0.4], 1, MarginVariant::Ratio).unwrap();
        assert_eq!(s, 2.0);
    }

    #[test]
    fn margin_ratio_hand_example_k2() {
        let s = margin_score(0.9, &[0.9, 0.5], &[0.9, 0.7], 2, MarginVariant::Ratio).unwrap();
        assert!((s - 1.2).abs() < 1e-6, "{s}");
    }

    #[test]
    fn margin_absolute_ignores_neighbors() {
        let s = margin_score(0.33, &[0.9], &[0.1], 1, MarginVariant::Absolute).unwrap();
        assert_eq!(s, 0.33);
    }

    #[test]
    fn margin_ratio_of_uniform_neighborhood_is_one() {
        let c = 0.73f32;
        let s = margin_score(c, &[c, c, c], &[c, c, c], 3, MarginVariant::Ratio).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn margin_degenerate_neighborhood_is_an_error() {
        let err = margin_score(0.5, &[0.0], &[0.0], 1, MarginVariant::Ratio).unwrap_err();
        assert_eq!(err, Error::DegenerateNeighborhood);
    }

    #[test]
    fn mine_singleton_identity() {
        let src = matrix(&[&[0.6, 0.8]]);
        let tgt = matrix(&[&[0.6, 0.8]]);
        let out = mine_bitext(&src, &tgt, 1, 0.0, MarginVariant::Ratio, &Serial).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].src, 0);
        assert_eq!(out[0].tgt, 0);
    }

    #[test]
    fn mine_infinite_threshold_is_empty() {
        let src = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let tgt = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let out =
            mine_bitext(&src, &tgt, 1, f32::INFINITY, MarginVariant::Ratio, &Serial).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn mine_dedup_keeps_highest_scoring() {
        // both sources point at target 0; only the better pair survives
        let src = matrix(&[&[1.0, 0.0], &[0.9, 0.1]]);
        let tgt = matrix(&[&[1.0, 0.0]]);
        let out = mine_bitext(&src, &tgt, 1, f32::NEG_INFINITY, MarginVariant::Absolute, &Serial)
            .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].src, 0);
    }

    #[test]
    fn f1_hand_example() {
        let cand: Vec<(String, String)> = [("a", "1"), ("b", "2"), ("c", "3")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let gold: Vec<(String, String)> = [("a", "1"), ("b", "2"), ("x", "8"), ("y", "9")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let (p, r, f1) = evaluate_f1(&cand, &gold).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
        assert!((r - 0.5).abs() < 1e-12);
        assert!((f1 - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn f1_perfect_and_disjoint() {
        let gold: Vec<(String, String)> =
            vec![("a".to_string(), "1".to_string()), ("b".to_string(), "2".to_string())];
        assert_eq!(evaluate_f1(&gold, &gold).unwrap().2, 1.0);
        let miss: Vec<(String, String)> = vec![("z".to_string(), "9".to_string())];
        assert_eq!(evaluate_f1(&miss, &gold).unwrap().2, 0.0);
        assert_eq!(evaluate_f1(&[], &gold).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn similarity_identity_has_zero_error() {
        let src = matrix(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let gold: Vec<(String, String)> = (0..3)
            .map(|i| (alloc::format!("r{i}"), alloc::format!("r{i}")))
            .collect();
        let report = similarity_error_rate(&src, &src.clone(), &gold, &Serial).unwrap();
        assert_eq!(report.mean_error, 0.0);
    }

    #[test]
    fn similarity_counts_single_wrong_neighbor() {
        // 4 pairs; src r0 = [1,0] is nearest to tgt r2 = [1,1] instead of its
        // gold counterpart t0 = [0,-1], so exactly one forward error
        let src = matrix(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[-1.0, 0.2]]);
        let tgt = matrix(&[&[0.0, -1.0], &[0.0, 1.0], &[1.0, 1.0], &[-1.0, 0.2]]);
        let gold: Vec<(String, String)> = (0..4)
            .map(|i| (alloc::format!("r{i}"), alloc::format!("r{i}")))
            .collect();
        let report = similarity_error_rate(&src, &tgt, &gold, &Serial).unwrap();
        assert_eq!(report.forward_error, 25.0);
        assert_eq!(report.backward_error, 0.0);
        assert_eq!(report.mean_error, 12.5);
    }

    #[test]
    fn non_bijective_gold_is_rejected() {
        let src = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let gold = vec![
            ("r0".to_string(), "r0".to_string()),
            ("r0".to_string(), "r1".to_string()),
        ];
        assert!(matches!(
            similarity_error_rate(&src, &src.clone(), &gold, &Serial).unwrap_err(),
            Error::NotBijective(_)
        ));
    }

    #[test]
    fn scale_invariance_of_rankings_and_scores() {
        let src = matrix(&[&[0.2, 0.9], &[0.8, 0.1], &[0.5, 0.5]]);
        let tgt = matrix(&[&[0.21, 0.88], &[0.79, 0.12], &[0.4, 0.6]]);
        let mut scaled_data = Vec::new();
        for i in 0..src.rows() {
            let s = (i + 1) as f32 * 3.0;
            for &v in src.row(i) {
                scaled_data.push(v * s);
            }
        }
        let scaled =
            EmbeddingMatrix::new(src.dim(), scaled_data, src.ids().to_vec()).unwrap();

        let a = knn(&src, &tgt, 2, &Serial).unwrap();
        let b = knn(&scaled, &tgt, 2, &Serial).unwrap();
        let ranks_a: Vec<Vec<usize>> =
            a.iter().map(|nn| nn.iter().map(|&(i, _)| i).collect()).collect();
        let ranks_b: Vec<Vec<usize>> =
            b.iter().map(|nn| nn.iter().map(|&(i, _)| i).collect()).collect();
        assert_eq!(ranks_a, ranks_b);

        let m1 = mine_bitext(&src, &tgt, 2, f32::NEG_INFINITY, MarginVariant::Ratio, &Serial)
            .unwrap();
        let m2 = mine_bitext(&scaled, &tgt, 2, f32::NEG_INFINITY, MarginVariant::Ratio, &Serial)
            .unwrap();
        let pairs1: Vec<(usize, usize)> = m1.iter().map(|c| (c.src, c.tgt)).collect();
        let pairs2: Vec<(usize, usize)> = m2.iter().map(|c| (c.src, c.tgt)).collect();
        assert_eq!(pairs1, pairs2);
    }

    #[test]
    fn cosine_is_symmetric() {
        let a = matrix(&[&[0.3, -0.7, 0.2]]);
        let b = matrix(&[&[0.9, 0.1, -0.4]]);
        let xy = cosine(&a, 0, &b, 0);
        let yx = cosine(&b, 0, &a, 0);
        assert!((xy - yx).abs() < 1e-6);
    }
}
