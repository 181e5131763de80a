//! Dual ensemble voting fusion over a panel of binary anomaly verdicts.
//!
//! Stage A collects the instants every model agrees on (consensus). Stage B
//! re-examines the remaining candidates with three voting rules — strict
//! majority, performance-weighted average, and rank-weighted voting — and
//! keeps the count the rules agree on. The final anomaly quantity is
//! `N = N_a + N_b`, and the final set is the consensus set united with the
//! selected rule's set, so the count and the set always match.
//!
//! All operations are pure; a [`VoteMatrix`] is immutable and safe to share
//! across threads.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::detect::LabelSeries;
use crate::error::FusionError;
use crate::series::Timestamp;

/// Candidate timestamps by models: a binary `n_c x k` matrix.
///
/// Rows are the union of the per-model positive verdicts, so every row holds
/// at least one 1. Column order is the model registration order and stays
/// fixed across all fusion operations.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteMatrix {
    candidate_timestamps: Vec<Timestamp>,
    model_names: Vec<String>,
    votes: Vec<Vec<u8>>,
}

impl VoteMatrix {
    pub fn new(
        candidate_timestamps: Vec<Timestamp>,
        model_names: Vec<String>,
        votes: Vec<Vec<u8>>,
    ) -> Result<Self, FusionError> {
        if model_names.is_empty() {
            return Err(FusionError::NoModels);
        }
        if votes.len() != candidate_timestamps.len() {
            return Err(FusionError::GridMismatch {
                details: format!(
                    "{} rows of votes for {} timestamps",
                    votes.len(),
                    candidate_timestamps.len()
                ),
            });
        }
        for (i, row) in votes.iter().enumerate() {
            if row.len() != model_names.len() {
                return Err(FusionError::ModelCountMismatch {
                    expected: model_names.len(),
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(FusionError::NonBinaryVote {
                        row: i,
                        col: j,
                        value: f64::from(v),
                    });
                }
            }
            if row.iter().all(|&v| v == 0) {
                return Err(FusionError::AllZeroRow {
                    timestamp: candidate_timestamps[i].to_string(),
                });
            }
        }
        Ok(VoteMatrix {
            candidate_timestamps,
            model_names,
            votes,
        })
    }

    pub fn len(&self) -> usize {
        self.candidate_timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidate_timestamps.is_empty()
    }

    pub fn model_count(&self) -> usize {
        self.model_names.len()
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.candidate_timestamps
    }

    pub fn rows(&self) -> impl Iterator<Item = (Timestamp, &[u8])> {
        self.candidate_timestamps
            .iter()
            .copied()
            .zip(self.votes.iter().map(Vec::as_slice))
    }

    /// Empty matrix over the given model columns (no candidates).
    pub fn empty(model_names: Vec<String>) -> Result<Self, FusionError> {
        if model_names.is_empty() {
            return Err(FusionError::NoModels);
        }
        Ok(VoteMatrix {
            candidate_timestamps: Vec::new(),
            model_names,
            votes: Vec::new(),
        })
    }
}

/// Builds the candidate matrix: rows are timestamps where at least one model
/// votes 1, minus `exclude`, sorted by timestamp.
///
/// All label series must share one timestamp grid.
pub fn build_vote_matrix(
    model_names: &[String],
    labels: &[LabelSeries],
    exclude: Option<&BTreeSet<Timestamp>>,
) -> Result<VoteMatrix, FusionError> {
    if model_names.is_empty() || labels.is_empty() {
        return Err(FusionError::NoModels);
    }
    if model_names.len() != labels.len() {
        return Err(FusionError::ModelCountMismatch {
            expected: model_names.len(),
            got: labels.len(),
        });
    }
    let grid = &labels[0].timestamps;
    for (i, series) in labels.iter().enumerate().skip(1) {
        if series.timestamps != *grid {
            return Err(FusionError::GridMismatch {
                details: format!(
                    "model '{}' has {} instants, model '{}' has {}",
                    model_names[0],
                    grid.len(),
                    model_names[i],
                    series.timestamps.len()
                ),
            });
        }
    }

    let mut timestamps = Vec::new();
    let mut votes = Vec::new();
    for (row, &ts) in grid.iter().enumerate() {
        if exclude.is_some_and(|e| e.contains(&ts)) {
            continue;
        }
        let row_votes: Vec<u8> = labels.iter().map(|l| l.labels[row]).collect();
        if row_votes.iter().any(|&v| v == 1) {
            timestamps.push(ts);
            votes.push(row_votes);
        }
    }
    if timestamps.is_empty() {
        return VoteMatrix::empty(model_names.to_vec());
    }
    VoteMatrix::new(timestamps, model_names.to_vec(), votes)
}

/// Per-model fusion weights: performance weights from MAE and the rank
/// weights derived from the MAE ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub mae: Vec<f64>,
    /// `W_j = max(1 - mae_j, 1e-6)`.
    pub performance: Vec<f64>,
    /// Rank 1 goes to the worst (largest) MAE, rank k to the best.
    pub ranks: Vec<u32>,
    /// `ranks / sum(ranks)`, reported as floats; votes use the exact
    /// integer fractions so the 0.5 threshold never suffers rounding.
    pub rank_weights: Vec<f64>,
}

/// Floor applied to `1 - mae` so weights keep their ordering when a model's
/// MAE reaches or exceeds 1.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Performance weights `W_j = max(1 - mae_j, 1e-6)`.
pub fn performance_weights(mae: &[f64]) -> Vec<f64> {
    mae.iter().map(|&m| (1.0 - m).max(WEIGHT_FLOOR)).collect()
}

/// Ranks by MAE descending: the worst model gets rank 1, the best rank k.
/// Equal MAEs keep registration order (earlier model gets the lower rank).
pub fn performance_ranks(mae: &[f64]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..mae.len()).collect();
    order.sort_by(|&a, &b| {
        mae[b]
            .partial_cmp(&mae[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0u32; mae.len()];
    for (pos, &model) in order.iter().enumerate() {
        ranks[model] = (pos + 1) as u32;
    }
    ranks
}

impl ModelWeights {
    pub fn from_mae(model_names: &[String], mae: &[f64]) -> Result<Self, FusionError> {
        if mae.is_empty() {
            return Err(FusionError::NoModels);
        }
        if model_names.len() != mae.len() {
            return Err(FusionError::ModelCountMismatch {
                expected: model_names.len(),
                got: mae.len(),
            });
        }
        for (name, &m) in model_names.iter().zip(mae) {
            if !(m >= 0.0) {
                return Err(FusionError::NegativeMae {
                    model: name.clone(),
                    value: m,
                });
            }
        }
        let ranks = performance_ranks(mae);
        let total: u32 = ranks.iter().sum();
        let rank_weights = ranks.iter().map(|&r| f64::from(r) / f64::from(total)).collect();
        Ok(ModelWeights {
            mae: mae.to_vec(),
            performance: performance_weights(mae),
            ranks,
            rank_weights,
        })
    }

    pub fn model_count(&self) -> usize {
        self.mae.len()
    }

    /// Sum of the integer ranks, `k(k+1)/2`.
    pub fn rank_total(&self) -> u32 {
        self.ranks.iter().sum()
    }
}

/// Outcome of one voting rule: the flagged timestamps and their count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub set: Vec<Timestamp>,
    pub count: usize,
}

impl MethodOutcome {
    fn from_set(set: Vec<Timestamp>) -> Self {
        let count = set.len();
        MethodOutcome { set, count }
    }
}

/// A timestamp is anomalous only when every model flags it.
pub fn consensus(votes: &VoteMatrix) -> MethodOutcome {
    let set = votes
        .rows()
        .filter(|(_, row)| row.iter().all(|&v| v == 1))
        .map(|(ts, _)| ts)
        .collect();
    MethodOutcome::from_set(set)
}

/// Strictly more than half of the models must flag the instant.
pub fn majority_vote(votes: &VoteMatrix) -> MethodOutcome {
    let k = votes.model_count();
    let set = votes
        .rows()
        .filter(|(_, row)| {
            let ones: usize = row.iter().map(|&v| v as usize).sum();
            2 * ones > k
        })
        .map(|(ts, _)| ts)
        .collect();
    MethodOutcome::from_set(set)
}

/// Weighted mean of the votes must strictly exceed 0.5.
pub fn weighted_average_vote(
    votes: &VoteMatrix,
    weights: &ModelWeights,
) -> Result<MethodOutcome, FusionError> {
    if weights.model_count() != votes.model_count() {
        return Err(FusionError::ModelCountMismatch {
            expected: votes.model_count(),
            got: weights.model_count(),
        });
    }
    let total: f64 = weights.performance.iter().sum();
    let set = votes
        .rows()
        .filter(|(_, row)| {
            let score: f64 = row
                .iter()
                .zip(&weights.performance)
                .map(|(&v, &w)| f64::from(v) * w)
                .sum();
            score / total > 0.5
        })
        .map(|(ts, _)| ts)
        .collect();
    Ok(MethodOutcome::from_set(set))
}

/// Rank-weight sum of the votes must strictly exceed 0.5. Evaluated in exact
/// integer arithmetic: `sum(rank_j * vote_j) * 2 > sum(ranks)`.
pub fn rank_vote(
    votes: &VoteMatrix,
    weights: &ModelWeights,
) -> Result<MethodOutcome, FusionError> {
    if weights.model_count() != votes.model_count() {
        return Err(FusionError::ModelCountMismatch {
            expected: votes.model_count(),
            got: weights.model_count(),
        });
    }
    let total = weights.rank_total();
    let set = votes
        .rows()
        .filter(|(_, row)| {
            let voted: u32 = row
                .iter()
                .zip(&weights.ranks)
                .map(|(&v, &r)| u32::from(v) * r)
                .sum();
            2 * voted > total
        })
        .map(|(ts, _)| ts)
        .collect();
    Ok(MethodOutcome::from_set(set))
}

/// The three stage-B voting rules, in fusion precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VotingMethod {
    Majority,
    Weighted,
    Rank,
}

impl VotingMethod {
    pub const ORDER: [VotingMethod; 3] =
        [VotingMethod::Majority, VotingMethod::Weighted, VotingMethod::Rank];

    pub fn name(self) -> &'static str {
        match self {
            VotingMethod::Majority => "majority",
            VotingMethod::Weighted => "weighted",
            VotingMethod::Rank => "rank",
        }
    }
}

/// Fuses the three stage-B counts: the value at least two rules agree on,
/// falling back to the median when all three differ. The selected method is
/// the earliest (majority, weighted, rank) attaining the fused count.
pub fn fuse_counts(majority: usize, weighted: usize, rank: usize) -> (usize, VotingMethod) {
    let counts = [majority, weighted, rank];
    let fused = if majority == weighted || majority == rank {
        majority
    } else if weighted == rank {
        weighted
    } else {
        let mut sorted = counts;
        sorted.sort_unstable();
        sorted[1]
    };
    let method = VotingMethod::ORDER
        .into_iter()
        .zip(counts)
        .find(|&(_, c)| c == fused)
        .map(|(m, _)| m)
        .expect("fused count comes from one of the three rules");
    (fused, method)
}

/// Which stages flagged a final-report timestamp, with the raw model votes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub timestamp: Timestamp,
    /// Stage names among `consensus`, `majority`, `weighted`, `rank`.
    pub methods: Vec<String>,
    pub votes: Vec<u8>,
    pub in_final: bool,
}

/// Everything the dual fusion produced, counts and sets consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    pub model_names: Vec<String>,
    pub weights: ModelWeights,
    pub consensus: MethodOutcome,
    pub majority: MethodOutcome,
    pub weighted: MethodOutcome,
    pub rank: MethodOutcome,
    pub selected_method: VotingMethod,
    pub n_a: usize,
    pub n_b: usize,
    pub n: usize,
    pub final_set: Vec<Timestamp>,
    pub provenance: Vec<ProvenanceEntry>,
}

/// One model's verdicts plus its held-out MAE.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVerdict {
    pub name: String,
    pub labels: LabelSeries,
    pub mae: f64,
}

/// Runs the full dual fusion: consensus over the union candidates, the three
/// voting rules over the candidates minus consensus, count fusion, and
/// `N = N_a + N_b`.
pub fn dual_fusion(verdicts: &[ModelVerdict]) -> Result<FusionResult, FusionError> {
    if verdicts.is_empty() {
        return Err(FusionError::NoModels);
    }
    let model_names: Vec<String> = verdicts.iter().map(|v| v.name.clone()).collect();
    let labels: Vec<LabelSeries> = verdicts.iter().map(|v| v.labels.clone()).collect();
    let mae: Vec<f64> = verdicts.iter().map(|v| v.mae).collect();
    let weights = ModelWeights::from_mae(&model_names, &mae)?;

    let full = build_vote_matrix(&model_names, &labels, None)?;
    let consensus_outcome = consensus(&full);
    let consensus_set: BTreeSet<Timestamp> = consensus_outcome.set.iter().copied().collect();

    // Stage B looks only at the disputed candidates, so N_a and N_b count
    // distinct timestamps and N matches the final set size.
    let stage_b = build_vote_matrix(&model_names, &labels, Some(&consensus_set))?;
    let majority = majority_vote(&stage_b);
    let weighted = weighted_average_vote(&stage_b, &weights)?;
    let rank = rank_vote(&stage_b, &weights)?;

    let (n_b, selected_method) = fuse_counts(majority.count, weighted.count, rank.count);
    let n_a = consensus_outcome.count;
    let n = n_a + n_b;

    let selected_set = match selected_method {
        VotingMethod::Majority => &majority.set,
        VotingMethod::Weighted => &weighted.set,
        VotingMethod::Rank => &rank.set,
    };
    let mut final_set: Vec<Timestamp> = consensus_outcome
        .set
        .iter()
        .chain(selected_set)
        .copied()
        .collect();
    final_set.sort_unstable();

    let final_lookup: BTreeSet<Timestamp> = final_set.iter().copied().collect();
    let mut provenance = Vec::new();
    for (ts, row) in full.rows() {
        let mut methods = Vec::new();
        if consensus_set.contains(&ts) {
            methods.push("consensus".to_string());
        }
        for (method, outcome) in [
            (VotingMethod::Majority, &majority),
            (VotingMethod::Weighted, &weighted),
            (VotingMethod::Rank, &rank),
        ] {
            if outcome.set.contains(&ts) {
                methods.push(method.name().to_string());
            }
        }
        if methods.is_empty() {
            continue;
        }
        provenance.push(ProvenanceEntry {
            timestamp: ts,
            methods,
            votes: row.to_vec(),
            in_final: final_lookup.contains(&ts),
        });
    }

    Ok(FusionResult {
        model_names,
        weights,
        consensus: consensus_outcome,
        majority,
        weighted,
        rank,
        selected_method,
        n_a,
        n_b,
        n,
        final_set,
        provenance,
    })
}
