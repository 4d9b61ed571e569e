#pragma once

#include "vropt/analysis.hpp"
#include "vropt/data.hpp"
#include "vropt/model.hpp"
#include "vropt/solvers.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vropt {

// One experiment: a dataset, an objective, a solver configuration, and a set
// of runs whose streams derive from (base_seed, run index).  Invalid
// combinations throw std::invalid_argument.
struct ExperimentConfig {
  // Exactly one source: synthetic (n, m) or a LIBSVM file.
  std::optional<std::pair<std::size_t, Eigen::Index>> synthetic;
  std::uint64_t data_seed = 0;
  std::string data_path;
  bool normalize = false;

  LossKind loss = LossKind::LogisticL2;
  std::optional<double> rho;  // defaults to 1/N
  double ref_tol = 1e-12;

  SolverKind solver = SolverKind::Saga;
  SamplingScheme sampling = SamplingScheme::RandomReshuffling;
  PhiConvention phi_convention = PhiConvention::PostStep;
  std::optional<double> mu;       // exactly one of mu / mu_frac
  std::optional<double> mu_frac;  // fraction of the theorem step bound
  std::size_t epochs = 0;
  std::uint64_t base_seed = 0;
  std::size_t seed_count = 1;
  std::vector<std::uint64_t> seed_list;  // overrides seed_count when nonempty
  bool diagnostics = false;
  ConstantVariant variant = ConstantVariant::Derived;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::size_t n = 0;  // samples
  Eigen::Index m = 0;  // feature dimension
  double rho = 0.0;
  double mu = 0.0;
  CurvatureConstants curv;
  TheoremConstants constants;  // SagaRR family for saga/svrg/sgd, Avrg for avrg
  ReferenceSolution ref;
  double initial_rel_mse = 0.0;
  double initial_excess_risk = 0.0;
  std::vector<std::vector<EpochTrace>> per_seed;
  std::vector<EpochTrace> averaged;  // energy filled when the rate applies
  std::vector<std::string> notes;
};

Dataset load_dataset(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const Dataset& data);

// Writes "# key=value" metadata, a header row, then one row per epoch of the
// seed-averaged trace.  Numbers use shortest round-trip decimals and the
// output is byte-identical across reruns of the same config.
void emit_csv(const ExperimentResult& result, std::ostream& out);

struct ParsedTrace {
  std::map<std::string, std::string> meta;
  std::vector<EpochTrace> rows;
};

ParsedTrace parse_trace_csv(std::istream& in);

// Spellings shared by the CSV metadata and the command-line surface.
std::string to_string(SolverKind kind);
std::string to_string(SamplingScheme scheme);
std::string to_string(PhiConvention convention);
std::string to_string(LossKind kind);

}  // namespace vropt
