#pragma once

// Replicated simulation runs comparing NIECE, SNIECE, PCR and SPCR, and the Wishart
// benchmark for the dense selection step.

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "niece/simgen.hpp"
#include "niece/tuning.hpp"

namespace niece {

enum Method : std::size_t { kNiece = 0, kSniece = 1, kPcr = 2, kSpcr = 3 };
inline constexpr std::array<const char*, 4> kMethodNames{"NIECE", "SNIECE", "PCR", "SPCR"};
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct MethodResult {
  double delta_beta = kMissing;
  double delta_gamma = kMissing;
  double c = kMissing;          // chosen PMD budget (sparse methods)
  std::vector<Index> selected;  // 1-based candidate indices
  std::string error;
  bool ok() const { return error.empty(); }
};

struct ReplicateResult {
  std::uint64_t replicate = 0;
  double lambda = kMissing;  // lasso penalty behind U (logistic, Cox)
  std::array<MethodResult, 4> methods;
  std::string error;  // failure before any method ran
  bool failed() const;
};

struct SimulationOptions {
  SimConfig config;
  std::size_t replicates = 50;
  Index d = 10;
  int folds = 5;
  std::vector<double> c_grid;  // empty: default grid
  bool dense = true;           // NIECE and PCR
  bool sparse = true;          // SNIECE and SPCR
  int threads = 1;
};

struct SimulationReport {
  std::vector<ReplicateResult> rows;
  std::array<double, 4> median_delta_beta;
  std::array<double, 4> median_delta_gamma;
  std::size_t failed = 0;
};

ReplicateResult run_replicate(const SimulationOptions& opts, std::uint64_t replicate);
SimulationReport run_simulation(const SimulationOptions& opts);

/// Per-replicate table; identical for identical options regardless of thread count.
std::string simulation_csv(const SimulationReport& report);
/// Medians laid out as method -> {delta_beta, delta_gamma}.
std::string simulation_summary_json(const SimulationReport& report, const SimulationOptions& opts);

struct BenchOptions {
  Index n = 200;
  Index p = 100;
  std::vector<double> delta_u{0.01, 1.0, 100.0};
  std::size_t replicates = 100;
  Index d = 0;  // 0: d = p
  std::uint64_t seed = 20240101;
  int threads = 1;
};

struct BenchRow {
  double delta_u = 0.0;
  std::size_t replicate = 0;
  double distance = kMissing;
  double seconds = 0.0;
  std::string error;
};

/// The population pair is drawn once per seed; replicate r uses the same Wishart
/// draws at every delta_u.
std::vector<BenchRow> run_bench(const BenchOptions& opts);
std::string bench_csv(const std::vector<BenchRow>& rows);

double median(std::vector<double> v);

}  // namespace niece
