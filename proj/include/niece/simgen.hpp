#pragma once

// Seeded generators for the simulation designs and the two error metrics.

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "niece/dataset.hpp"
#include "niece/linalg.hpp"

namespace niece {

using Rng = std::mt19937_64;

/// Seed for an independent stream keyed by (master seed, replicate, stream id), mixed
/// with splitmix64 so neighbouring keys give unrelated streams.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replicate, std::uint64_t stream);
inline Rng make_rng(std::uint64_t master, std::uint64_t replicate, std::uint64_t stream) {
  return Rng(stream_seed(master, replicate, stream));
}

MatrixXd standard_normal(Rng& rng, Index rows, Index cols);
MatrixXd uniform01(Rng& rng, Index rows, Index cols);

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with R's diagonal made
/// positive.
MatrixXd random_orthogonal(Rng& rng, Index n);

enum class Family { linear, glm };  // glm covers logistic and Cox designs
enum class Model { M1, M2, M3, M4 };

const char* to_string(Model m);
std::optional<Model> parse_model(const std::string& s);

struct SigmaDesign {
  MatrixXd sigma;    // s x s
  MatrixXd gamma_s;  // s x u orthonormal basis of the envelope block
};

/// kind 1, 2 or 3. Glm variants are divided by their operator norm.
SigmaDesign gen_sigma(int kind, Family family, Index s, Index u, Rng& rng);

struct SimConfig {
  Model model = Model::M1;
  int cov_kind = 1;
  Index n = 200;
  Index p = 400;  // response dimension for M1, predictor dimension otherwise
  Index q = 0;    // 0: model default (10 predictors for M1, 5 responses for M2, 1 otherwise)
  Index u = 3;
  Index s = 10;
  std::uint64_t seed = 20240101;
};

Index default_q(Model m);

struct SimTruth {
  MatrixXd gamma;  // p x u, rows beyond s are zero
  MatrixXd beta;   // responses x predictors
  MatrixXd sigma;  // s x s
  SimConfig config;
};

struct SimData {
  Dataset data;
  SimTruth truth;
};

/// One replicate of a model; draws come from stream (config.seed, replicate, 0).
SimData gen_model(const SimConfig& config, std::uint64_t replicate = 0);

/// Wishart(mean F F^T, dof) / dof by the Bartlett decomposition, sampled in the column
/// space of F. Requires dof >= F.cols().
MatrixXd wishart_sample(const MatrixXd& factor, Index dof, Rng& rng);

struct WishartPair {
  SymmetricMatrixd m_hat;
  SymmetricMatrixd u_hat;
};

WishartPair wishart_pair(const SymmetricMatrixd& m, const SymmetricMatrixd& u, Index dof, Rng& rng);

/// Population pair with known envelope for the Wishart benchmark: eigenvalues k^3 for
/// k <= 20 and 0.05 beyond, Gamma = (v2, v3, v10, v11, v19), U = delta_u Gamma Phi Gamma^T.
struct WishartDesign {
  SymmetricMatrixd m;
  SymmetricMatrixd u;
  MatrixXd gamma;
};

WishartDesign wishart_design(Index p, double delta_u, Rng& rng);

double delta_beta(const MatrixXd& beta_true, const MatrixXd& beta_hat);
/// ||P_true - P_hat||_F / sqrt(2u), clamped to [0, 1 + 1e-10].
double delta_gamma(const MatrixXd& gamma_true, const MatrixXd& gamma_hat);

}  // namespace niece
