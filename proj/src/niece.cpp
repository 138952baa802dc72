#include "niece/niece.hpp"

#include <algorithm>
#include <numeric>

namespace niece {

const char* to_string(Selection s) {
  return s == Selection::envelope_score ? "envelope_score" : "leading_eigenvalue";
}

namespace {

// Scores at or below this fraction of ||U||_op are treated as exact zeros so that
// out-of-envelope directions tie and fall back to eigenvalue order.
constexpr double kScoreClip = 1e-12;

double consecutive_gap(VectorXd values, bool has_next, double next) {
  std::vector<double> v(values.data(), values.data() + values.size());
  if (has_next) v.push_back(next);
  std::sort(v.begin(), v.end(), std::greater<>());
  if (v.size() < 2) return 0.0;
  double gap = v[0] - v[1];
  for (std::size_t j = 1; j + 1 < v.size(); ++j) gap = std::min(gap, v[j] - v[j + 1]);
  return std::max(gap, 0.0);
}

}  // namespace

EnvelopeScoreTable envelope_scores(const MatrixXd& candidates, const LowRankPsdd& u_hat, Index u,
                                   const VectorXd& values) {
  const Index p = candidates.rows();
  const Index d = candidates.cols();
  if (u_hat.dim() != p) {
    throw DimensionError("envelope_scores: candidates have " + std::to_string(p) +
                         " rows but U is " + std::to_string(u_hat.dim()) + "x" +
                         std::to_string(u_hat.dim()));
  }
  if (u < 0 || u > d) {
    throw PreconditionError("envelope_scores: u = " + std::to_string(u) + " outside [0, d = " +
                            std::to_string(d) + "]");
  }
  for (Index j = 0; j < d; ++j) {
    if (std::abs(candidates.col(j).norm() - 1.0) > 1e-8) {
      throw PreconditionError("envelope_scores: candidate " + std::to_string(j) +
                              " does not have unit norm");
    }
  }
  EnvelopeScoreTable t;
  t.u_max_norm = u_hat.op_norm();
  t.scores.resize(d);
  for (Index j = 0; j < d; ++j) {
    const double phi = u_hat.quad_form(candidates.col(j));
    t.scores(j) = phi <= kScoreClip * t.u_max_norm ? 0.0 : phi;
  }
  t.order.resize(static_cast<std::size_t>(d));
  std::iota(t.order.begin(), t.order.end(), Index(0));
  std::stable_sort(t.order.begin(), t.order.end(),
                   [&](Index a, Index b) { return t.scores(a) > t.scores(b); });
  if (u > 0 && u < d) {
    t.score_gap = t.scores(t.order[u - 1]) - t.scores(t.order[u]);
  }
  if (values.size() == d) t.eigen_gap = consecutive_gap(values, false, 0.0);
  return t;
}

EnvelopeScoreTable envelope_scores(const MatrixXd& candidates, const SymmetricMatrixd& u_hat,
                                   Index u, const VectorXd& values) {
  return envelope_scores(candidates, LowRankPsdd::from_symmetric(u_hat), u, values);
}

CandidateSet dense_candidates(const SymmetricMatrixd& m_hat, Index d) {
  const Index p = m_hat.dim();
  if (d < 1 || d > p) {
    throw PreconditionError("NIECE: d = " + std::to_string(d) + " must lie in [1, p = " +
                            std::to_string(p) + "]");
  }
  const EigenSystemd all = sym_eigen(m_hat, p);
  const double top = all.values(0);
  const double bottom = all.values(p - 1);
  if (bottom < -1e-8 * std::max(std::abs(top), 1e-300)) {
    throw PreconditionError("NIECE: M is not positive semi-definite (smallest eigenvalue " +
                            std::to_string(bottom) + ")");
  }
  CandidateSet cs;
  Index keep = d;
  while (keep > 0 && !(all.values(keep - 1) > 1e-10 * top)) --keep;
  if (keep < d) {
    cs.warnings.push_back("M is numerically singular: d reduced from " + std::to_string(d) +
                          " to " + std::to_string(keep));
  }
  cs.vectors = all.vectors.leftCols(keep);
  cs.values = all.values.head(keep);
  if (keep < p) {
    cs.has_next_value = true;
    cs.next_value = std::max(all.values(keep), 0.0);
  }
  return cs;
}

CandidateSet sparse_candidates(const MatrixXd& xn, Index d, const PmdConfig& cfg) {
  const auto factors = pmd_decompose(xn, d, cfg);
  CandidateSet cs;
  cs.sparse = true;
  cs.c = cfg.c;
  std::vector<Index> kept;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const auto& f = factors[k];
    if (f.zero) continue;
    if (!f.converged) {
      cs.warnings.push_back("PMD factor " + std::to_string(k) + " did not converge in " +
                            std::to_string(f.iterations) + " alternations");
    }
    if (f.l2_deficient) {
      cs.warnings.push_back("PMD factor " + std::to_string(k) + " has ||v||_2 < 1");
    }
    kept.push_back(static_cast<Index>(k));
  }
  if (kept.size() < factors.size()) {
    cs.warnings.push_back("data matrix exhausted after " + std::to_string(kept.size()) +
                          " PMD factors; d reduced");
  }
  cs.vectors.resize(xn.cols(), static_cast<Index>(kept.size()));
  cs.values.resize(static_cast<Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    const auto& f = factors[static_cast<std::size_t>(kept[j])];
    cs.vectors.col(static_cast<Index>(j)) = f.v / f.v.norm();
    cs.values(static_cast<Index>(j)) = f.sigma * f.sigma;
  }
  return cs;
}

NieceResult select_components(const CandidateSet& cs, const LowRankPsdd& u_hat, Index u,
                              Selection selection) {
  const Index d = cs.vectors.cols();
  if (u < 1) throw PreconditionError("NIECE: envelope dimension u must be >= 1");
  if (u > d) {
    throw PreconditionError("NIECE: u = " + std::to_string(u) + " exceeds the " +
                            std::to_string(d) + " available candidates");
  }
  NieceResult r;
  r.score_table = envelope_scores(cs.vectors, u_hat, u, cs.values);
  if (!cs.sparse || cs.has_next_value) {
    r.score_table.eigen_gap = consecutive_gap(cs.values, cs.has_next_value, cs.next_value);
  }
  r.selected.resize(static_cast<std::size_t>(u));
  for (Index j = 0; j < u; ++j) {
    r.selected[static_cast<std::size_t>(j)] =
        selection == Selection::envelope_score ? r.score_table.order[static_cast<std::size_t>(j)] : j;
  }
  MatrixXd chosen(cs.vectors.rows(), u);
  for (Index j = 0; j < u; ++j) chosen.col(j) = cs.vectors.col(r.selected[static_cast<std::size_t>(j)]);
  r.basis = orthonormalize(chosen);
  r.candidates = cs.vectors;
  r.candidate_values = cs.values;
  r.selection = selection;
  r.sparse = cs.sparse;
  r.c = cs.c;
  r.warnings = cs.warnings;
  return r;
}

NieceResult niece_fit(const SymmetricMatrixd& m_hat, const LowRankPsdd& u_hat, Index u, Index d) {
  if (u > d) {
    throw PreconditionError("NIECE: u = " + std::to_string(u) + " exceeds d = " + std::to_string(d));
  }
  return select_components(dense_candidates(m_hat, d), u_hat, u, Selection::envelope_score);
}

NieceResult niece_fit(const SymmetricMatrixd& m_hat, const SymmetricMatrixd& u_hat, Index u, Index d) {
  if (m_hat.dim() != u_hat.dim()) throw DimensionError("NIECE: M and U differ in dimension");
  return niece_fit(m_hat, LowRankPsdd::from_symmetric(u_hat), u, d);
}

NieceResult sniece_fit(const MatrixXd& xn, const LowRankPsdd& u_hat, Index u, Index d,
                       const PmdConfig& cfg) {
  if (u > d) {
    throw PreconditionError("SNIECE: u = " + std::to_string(u) + " exceeds d = " + std::to_string(d));
  }
  return select_components(sparse_candidates(xn, d, cfg), u_hat, u, Selection::envelope_score);
}

NieceResult sniece_fit(const MatrixXd& xn, const SymmetricMatrixd& u_hat, Index u, Index d,
                       const PmdConfig& cfg) {
  if (xn.cols() != u_hat.dim()) throw DimensionError("SNIECE: data and U differ in dimension");
  return sniece_fit(xn, LowRankPsdd::from_symmetric(u_hat), u, d, cfg);
}

NieceResult pcr_select(const SymmetricMatrixd& m_hat, const LowRankPsdd& u_hat, Index u, Index d) {
  if (u > d) {
    throw PreconditionError("PCR: u = " + std::to_string(u) + " exceeds d = " + std::to_string(d));
  }
  return select_components(dense_candidates(m_hat, d), u_hat, u, Selection::leading_eigenvalue);
}

NieceResult pcr_select(const SymmetricMatrixd& m_hat, const SymmetricMatrixd& u_hat, Index u, Index d) {
  return pcr_select(m_hat, LowRankPsdd::from_symmetric(u_hat), u, d);
}

NieceResult pcr_select_sparse(const MatrixXd& xn, const LowRankPsdd& u_hat, Index u, Index d,
                              const PmdConfig& cfg) {
  if (u > d) {
    throw PreconditionError("SPCR: u = " + std::to_string(u) + " exceeds d = " + std::to_string(d));
  }
  return select_components(sparse_candidates(xn, d, cfg), u_hat, u, Selection::leading_eigenvalue);
}

Index default_d(Index u, Index n, Index p) { return std::max<Index>(1, std::min({2 * u, n - 1, p})); }

}  // namespace niece
