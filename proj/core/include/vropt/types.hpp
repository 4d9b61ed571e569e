#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace vropt {

using Vector = Eigen::VectorXd;

enum class LossKind { LogisticL2, QuadraticL2 };
enum class SolverKind { Sgd, Saga, Svrg, Avrg };
enum class SamplingScheme { RandomReshuffling, Uniform };

// Where SAGA's memory table is evaluated when a cell is rewritten.
// PostStep stores the gradient at the iterate produced by the step (two
// evaluations per inner step); PreStep reuses the gradient that drove the
// step (one evaluation per inner step).
enum class PhiConvention { PostStep, PreStep };

class divergence_error : public std::runtime_error {
 public:
  divergence_error(long epoch, long inner_index)
      : std::runtime_error("iterate diverged at epoch " + std::to_string(epoch) +
                           ", inner step " + std::to_string(inner_index)),
        epoch_(epoch),
        inner_index_(inner_index) {}

  long epoch() const { return epoch_; }
  long inner_index() const { return inner_index_; }

 private:
  long epoch_;
  long inner_index_;
};

struct EpochTrace {
  std::size_t epoch = 0;
  double rel_mse = 0.0;
  double excess_risk = 0.0;
  std::uint64_t grad_evals = 0;
  std::optional<double> a_sq;
  std::optional<double> b_sq;
  std::optional<double> energy;
};

}  // namespace vropt
