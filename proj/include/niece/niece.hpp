#pragma once

// Non-iterative envelope component estimation. Candidate directions (leading
// eigenvectors of M, or PMD directions of a data matrix whose Gram matrix is M) are
// ranked by their envelope scores phi_j = v_j^T U v_j and the top u span the estimated
// envelope.

#include <string>
#include <vector>

#include "niece/linalg.hpp"
#include "niece/pmd.hpp"

namespace niece {

enum class Selection {
  envelope_score,      // rank candidates by phi_j (NIECE / SNIECE)
  leading_eigenvalue,  // keep the first u candidates (PCR / SPCR baselines)
};

const char* to_string(Selection s);

/// Candidate directions for the selection step.
struct CandidateSet {
  MatrixXd vectors;  // p x d, unit columns
  VectorXd values;   // eigenvalues (dense) or sigma_k^2 (sparse), in candidate order
  double next_value = 0.0;  // lambda_{d+1} when known (dense path, d < p)
  bool has_next_value = false;
  bool sparse = false;
  double c = 0.0;
  std::vector<std::string> warnings;
};

struct EnvelopeScoreTable {
  VectorXd scores;             // phi_j, clipped at 0
  std::vector<Index> order;    // candidate indices by descending score, ties to lower index
  double eigen_gap = 0.0;      // min consecutive gap of the candidate values (sorted)
  double score_gap = 0.0;      // phi_(u) - phi_(u+1), 0 when u = d
  double u_max_norm = 0.0;     // ||U||_op
};

struct NieceResult {
  Basisd basis;                   // p x u, orthonormalized selected candidates
  std::vector<Index> selected;    // candidate indices (0-based) in selection order
  EnvelopeScoreTable score_table;
  MatrixXd candidates;            // p x d
  VectorXd candidate_values;
  Selection selection = Selection::envelope_score;
  bool sparse = false;
  double c = 0.0;
  std::vector<std::string> warnings;
};

/// Scores of unit-norm candidate columns against U. `values` (optional) feeds the
/// eigen-gap diagnostic.
EnvelopeScoreTable envelope_scores(const MatrixXd& candidates, const LowRankPsdd& u_hat, Index u,
                                   const VectorXd& values = VectorXd());
EnvelopeScoreTable envelope_scores(const MatrixXd& candidates, const SymmetricMatrixd& u_hat,
                                   Index u, const VectorXd& values = VectorXd());

/// Leading d eigenvectors of M. M must be PSD up to -1e-8 * lambda_1; eigenvalues below
/// 1e-10 * lambda_1 are dropped (reducing d) with a warning.
CandidateSet dense_candidates(const SymmetricMatrixd& m_hat, Index d);

/// d sequential PMD(., L1) directions of the data matrix. Zero factors are dropped.
CandidateSet sparse_candidates(const MatrixXd& xn, Index d, const PmdConfig& cfg);

NieceResult select_components(const CandidateSet& candidates, const LowRankPsdd& u_hat, Index u,
                              Selection selection = Selection::envelope_score);

NieceResult niece_fit(const SymmetricMatrixd& m_hat, const LowRankPsdd& u_hat, Index u, Index d);
NieceResult niece_fit(const SymmetricMatrixd& m_hat, const SymmetricMatrixd& u_hat, Index u, Index d);

NieceResult sniece_fit(const MatrixXd& xn, const LowRankPsdd& u_hat, Index u, Index d,
                       const PmdConfig& cfg);
NieceResult sniece_fit(const MatrixXd& xn, const SymmetricMatrixd& u_hat, Index u, Index d,
                       const PmdConfig& cfg);

/// Principal-component baseline: the first u candidates by eigenvalue.
NieceResult pcr_select(const SymmetricMatrixd& m_hat, const LowRankPsdd& u_hat, Index u, Index d);
NieceResult pcr_select(const SymmetricMatrixd& m_hat, const SymmetricMatrixd& u_hat, Index u, Index d);
NieceResult pcr_select_sparse(const MatrixXd& xn, const LowRankPsdd& u_hat, Index u, Index d,
                              const PmdConfig& cfg);

/// min(2u, n - 1, p).
Index default_d(Index u, Index n, Index p);

}  // namespace niece
