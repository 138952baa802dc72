#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "niece/io.hpp"
#include "niece/simgen.hpp"

using namespace niece;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("niece_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  Outcome run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + " '" NIECE_CLI_PATH "' " + args + " > '" + path("stdout").string() + "' 2> '" +
                            path("stderr").string() + "'";
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(path("stdout"));
    r.err = slurp(path("stderr"));
    return r;
  }

  void write_dataset(const std::string& name, const MatrixXd& x, const MatrixXd& y, const std::string& yprefix = "y") {
    std::vector<std::string> header;
    for (Index j = 0; j < x.cols(); ++j) header.push_back("x" + std::to_string(j + 1));
    for (Index j = 0; j < y.cols(); ++j) header.push_back(y.cols() == 1 ? yprefix : yprefix + std::to_string(j + 1));
    MatrixXd all(x.rows(), x.cols() + y.cols());
    all << x, y;
    write_text(path(name).string(), matrix_csv(header, all));
  }

  std::string m1_csv() {
    SimConfig cfg;
    cfg.p = 30;
    const SimData sd = gen_model(cfg, 0);
    write_dataset("m1.csv", sd.data.x, std::get<ContinuousResponse>(sd.data.response).y);
    return path("m1.csv").string();
  }

  static std::string responses(int r) {
    std::string s;
    for (int k = 1; k <= r; ++k) s += " y" + std::to_string(k);
    return s;
  }

  fs::path dir_;
};

// First data row of a CSV keyed by header; quoted fields are not needed here.
std::map<std::string, std::string> first_row(const std::string& text) {
  std::istringstream in(text);
  std::string head, row, f;
  std::getline(in, head);
  std::getline(in, row);
  std::vector<std::string> names, vals;
  for (std::istringstream hs(head); std::getline(hs, f, ',');) names.push_back(f);
  for (std::istringstream rs(row); std::getline(rs, f, ',');) vals.push_back(f);
  vals.resize(names.size());
  std::map<std::string, std::string> out;
  for (std::size_t k = 0; k < names.size(); ++k) out[names[k]] = vals[k];
  return out;
}

nlohmann::json strip_timestamp(nlohmann::json j) {
  j.erase("timestamp");
  return j;
}

}  // namespace

TEST_F(Cli, FitM1WritesSelectionAndScores) {
  const std::string csv = m1_csv();
  const Outcome r = run("fit --data " + csv + " --task response --response" + responses(30) + " --u 3 --d 10 --threads 1 --out-prefix " +
                    path("fit").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("fit.json")));
  EXPECT_EQ(j["reduction"]["selected"].size(), 3u);
  EXPECT_EQ(j["reduction"]["scores"].size(), 10u);
  EXPECT_EQ(j["hyperparameters"]["u"], 3);
  EXPECT_TRUE(j["reduction"].contains("eigen_gap"));
  EXPECT_TRUE(j["reduction"].contains("score_gap"));
  const auto coef = first_row(slurp(path("fit_coef.csv")));
  EXPECT_EQ(coef.size(), 31u);
  EXPECT_EQ(coef.at("variable"), "x1");
}

TEST_F(Cli, MissingResponseColumn) {
  const std::string csv = m1_csv();
  const Outcome r = run("fit --data " + csv + " --task predictor --response nosuch --u 1 --out-prefix " + path("fit").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nosuch"), std::string::npos) << r.err;
}

TEST_F(Cli, ParseErrorsReportLine) {
  write_text(path("bad.csv").string(), "x1,y\n1,2\n3,oops\n");
  const Outcome r = run("fit --data " + path("bad.csv").string() + " --task predictor --response y --u 1 --out-prefix " +
                    path("fit").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(":3:"), std::string::npos) << r.err;
  EXPECT_EQ(run("fit --data x.csv").code, 2);
  EXPECT_EQ(run("fit --data " + path("bad.csv").string() + " --task nope --u 1").code, 2);
}

TEST_F(Cli, FitIsDeterministic) {
  const std::string csv = m1_csv();
  const std::string args = "fit --data " + csv + " --task response --response" + responses(30) + " --u 3 --c-cv --out-prefix ";
  ASSERT_EQ(run(args + path("a").string(), "NIECE_THREADS=1").code, 0);
  ASSERT_EQ(run(args + path("b").string(), "NIECE_THREADS=4").code, 0);
  EXPECT_EQ(strip_timestamp(nlohmann::json::parse(slurp(path("a.json")))),
            strip_timestamp(nlohmann::json::parse(slurp(path("b.json")))));
  EXPECT_EQ(slurp(path("a_coef.csv")), slurp(path("b_coef.csv")));
}

TEST_F(Cli, PredictFullDimensionMatchesOls) {
  Rng rng(3);
  const Index n = 40, p = 4;
  const MatrixXd x = standard_normal(rng, n, p);
  const MatrixXd y = x * standard_normal(rng, p, 1) + standard_normal(rng, n, 1);
  write_dataset("train.csv", x, y);
  ASSERT_EQ(run("fit --data " + path("train.csv").string() + " --task predictor --response y --u 4 --d 4 --out-prefix " +
                path("fit").string())
                .code,
            0);
  const Outcome r = run("predict --fit " + path("fit.json").string() + " --data " + path("train.csv").string() +
                    " --out-prefix " + path("pred").string());
  ASSERT_EQ(r.code, 0) << r.err;
  MatrixXd x1(n, p + 1);
  x1 << MatrixXd::Ones(n, 1), x;
  const VectorXd resid = y.col(0) - x1 * x1.colPivHouseholderQr().solve(y.col(0));
  const auto loss = nlohmann::json::parse(slurp(path("pred_loss.json")));
  EXPECT_NEAR(loss["pmse"].get<double>(), resid.squaredNorm() / n, 1e-8);
}

TEST_F(Cli, PredictWithoutLabelsAndShuffledColumns) {
  Rng rng(4);
  const MatrixXd x = standard_normal(rng, 30, 3);
  const MatrixXd y = x.col(0) * 2.0 + standard_normal(rng, 30, 1);
  write_dataset("train.csv", x, y);
  ASSERT_EQ(run("fit --data " + path("train.csv").string() + " --task predictor --response y --u 2 --out-prefix " +
                path("fit").string())
                .code,
            0);
  const MatrixXd xn = standard_normal(rng, 6, 3);
  write_text(path("new.csv").string(), matrix_csv({"x1", "x2", "x3"}, xn));
  MatrixXd shuffled(6, 3);
  shuffled << xn.col(2), xn.col(0), xn.col(1);
  write_text(path("shuf.csv").string(), matrix_csv({"x3", "x1", "x2"}, shuffled));
  const Outcome a = run("predict --fit " + path("fit.json").string() + " --data " + path("new.csv").string() +
                    " --out-prefix " + path("a").string());
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("loss omitted"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("a_predictions.csv")));
  EXPECT_FALSE(fs::exists(path("a_loss.json")));
  ASSERT_EQ(run("predict --fit " + path("fit.json").string() + " --data " + path("shuf.csv").string() +
                " --out-prefix " + path("b").string())
                .code,
            0);
  EXPECT_EQ(slurp(path("a_predictions.csv")), slurp(path("b_predictions.csv")));
  write_text(path("short.csv").string(), matrix_csv({"x1", "x3"}, xn.leftCols(2)));
  const Outcome m = run("predict --fit " + path("fit.json").string() + " --data " + path("short.csv").string() +
                    " --out-prefix " + path("c").string());
  EXPECT_EQ(m.code, 2);
  EXPECT_NE(m.err.find("'x2'"), std::string::npos) << m.err;
}

TEST_F(Cli, SimulateSingleReplicateSummary) {
  const Outcome r = run("simulate --model M1 --cov 1 --p 30 --n 100 --replicates 1 --c-grid 1.5 3 --threads 1 --out-prefix " +
                    path("sim").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto row = first_row(slurp(path("sim_replicates.csv")));
  const auto summary = nlohmann::json::parse(slurp(path("sim_summary.json")));
  for (const char* m : {"NIECE", "SNIECE", "PCR", "SPCR"}) {
    EXPECT_EQ(summary["median"][m]["delta_beta"].get<double>(), std::stod(row.at(std::string("delta_beta_") + m)));
    EXPECT_EQ(summary["median"][m]["delta_gamma"].get<double>(), std::stod(row.at(std::string("delta_gamma_") + m)));
  }
  EXPECT_EQ(summary["replicates"], 1);
  EXPECT_EQ(summary["failed_replicates"], 0);
}

TEST_F(Cli, SimulateThreadCountInvariant) {
  const std::string args = "simulate --model M2 --cov 2 --p 40 --n 80 --replicates 4 --c-grid 1.5 4 --out-prefix ";
  ASSERT_EQ(run(args + path("a").string() + " --threads 1").code, 0);
  ASSERT_EQ(run(args + path("b").string() + " --threads 4").code, 0);
  EXPECT_EQ(slurp(path("a_replicates.csv")), slurp(path("b_replicates.csv")));
  EXPECT_EQ(slurp(path("a_summary.json")), slurp(path("b_summary.json")));
}

TEST_F(Cli, SimulateRejectsImpossibleDesign) {
  EXPECT_EQ(run("simulate --model M3 --q 2 --replicates 1 --out-prefix " + path("s").string()).code, 2);
  EXPECT_EQ(run("simulate --model M9 --replicates 1 --out-prefix " + path("s").string()).code, 2);
}

TEST_F(Cli, BenchSingleReplicate) {
  const Outcome r = run("bench --n 60 --p 30 --delta-u 100 --replicates 1 --out-prefix " + path("b").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto row = first_row(slurp(path("b_bench.csv")));
  EXPECT_EQ(row.at("delta_u"), "100");
  const double dist = std::stod(row.at("distance"));
  const double secs = std::stod(row.at("seconds"));
  EXPECT_GE(dist, 0.0);
  EXPECT_LE(dist, 1.0);
  EXPECT_GT(secs, 0.0);
  EXPECT_TRUE(std::isfinite(secs));
  EXPECT_EQ(run("bench --n 10 --p 30 --replicates 1 --out-prefix " + path("c").string()).code, 2);
}

TEST_F(Cli, HelpListsFlags) {
  for (const auto& [cmd, flags] : std::vector<std::pair<std::string, std::vector<std::string>>>{
           {"fit", {"--data", "--task", "--response", "--time", "--event", "--u", "--d", "--c", "--lambda", "--folds", "--seed",
                    "--threads", "--out-prefix", "--u-grid", "--c-cv"}},
           {"predict", {"--fit", "--data", "--out-prefix"}},
           {"simulate", {"--model", "--cov", "--replicates", "--seed", "--threads", "--out-prefix"}},
           {"bench", {"--n", "--p", "--delta-u", "--replicates", "--seed", "--threads"}}}) {
    const Outcome r = run(cmd + " --help");
    EXPECT_EQ(r.code, 0);
    for (const auto& f : flags) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
  EXPECT_NE(run("--help").out.find("simulate"), std::string::npos);
}

TEST_F(Cli, NumericalFailureExitCode) {
  // Perfectly separated labels: the envelope refit diverges.
  MatrixXd x(20, 2);
  MatrixXd y(20, 1);
  for (Index i = 0; i < 20; ++i) {
    x(i, 0) = static_cast<double>(i) - 9.5;
    x(i, 1) = std::sin(static_cast<double>(i));
    y(i, 0) = i >= 10 ? 1.0 : 0.0;
  }
  write_dataset("sep.csv", x, y);
  const Outcome r = run("fit --data " + path("sep.csv").string() + " --task logistic --response y --u 1 --lambda 0.01 --out-prefix " +
                    path("fit").string());
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}
