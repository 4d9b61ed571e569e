#pragma once

#include "vropt/analysis.hpp"
#include "vropt/data.hpp"
#include "vropt/model.hpp"
#include "vropt/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace vropt {

struct EpochStats {
  std::uint64_t grad_evals = 0;  // fresh per-sample gradient evaluations
};

// SAGA keeps one stored gradient per sample plus their running average.
// In diagnostic mode it also keeps phi_table[n], the iterate each stored
// gradient was evaluated at, so the memory can be audited directly:
// grad_table[n] == sample_grad(phi_table[n], x_n) for every written cell.
struct SagaState {
  SagaState(Eigen::Index dim, std::size_t n,
            PhiConvention convention = PhiConvention::PostStep,
            bool diagnostic = false);

  Vector w;
  std::vector<Vector> grad_table;
  Vector table_avg;
  PhiConvention convention;
  bool diagnostic;
  std::vector<Vector> phi_table;   // diagnostic only
  std::vector<char> phi_written;   // diagnostic only
};

using SagaObserver = std::function<void(std::size_t, const SagaState&)>;

// Runs the first `count` inner steps of an epoch along `order`.  Appends each
// post-step iterate to `transcript` when given and calls `observer` after
// every step.  The running table average is updated incrementally; callers
// wanting it exact should finish the epoch via saga_epoch, which resyncs.
EpochStats saga_steps(SagaState& state, const Dataset& data,
                      const LossModel& model,
                      std::span<const std::size_t> order, double mu,
                      std::size_t count,
                      std::vector<Vector>* transcript = nullptr,
                      const SagaObserver& observer = {});

// One full pass (order.size() must equal the dataset size).  When a
// transcript is given it receives w_0..w_N.
EpochStats saga_epoch(SagaState& state, const Dataset& data,
                      const LossModel& model,
                      std::span<const std::size_t> order, double mu,
                      std::vector<Vector>* transcript = nullptr,
                      const SagaObserver& observer = {});

// The direction SAGA would apply at (w, n); pure, uses the state's running
// table average.
Vector saga_gradient_estimate(const SagaState& state, const Dataset& data,
                              const LossModel& model, const Vector& w,
                              std::size_t n);

// SVRG recomputes the full gradient at its snapshot at every epoch start and
// corrects each inner step against it; the snapshot moves to the final
// iterate at epoch end.  Cost: 3N evaluations per epoch as implemented.
struct SvrgState {
  explicit SvrgState(Eigen::Index dim);

  Vector w;
  Vector w_snapshot;
  Vector snapshot_full_grad;
};

EpochStats svrg_epoch(SvrgState& state, const Dataset& data,
                      const LossModel& model,
                      std::span<const std::size_t> order, double mu,
                      std::vector<Vector>* transcript = nullptr);

// AVRG replaces SVRG's epoch-start full gradient with g_current, accumulated
// one term at a time during the previous epoch.  Each inner step reuses its
// own gradient for the accumulator, so an epoch costs exactly 2N
// evaluations.  Only defined under reshuffling: the epoch order must be a
// permutation.
struct AvrgState {
  explicit AvrgState(Eigen::Index dim);

  Vector w;
  Vector w_snapshot;  // w_0^t during an epoch
  Vector g_current;   // correction anchor in use this epoch
  Vector g_accum;     // next epoch's anchor, built up this epoch
};

using AvrgObserver = std::function<void(std::size_t, const AvrgState&)>;

EpochStats avrg_epoch(AvrgState& state, const Dataset& data,
                      const LossModel& model,
                      std::span<const std::size_t> order, double mu,
                      std::vector<Vector>* transcript = nullptr,
                      const AvrgObserver& observer = {});

// The direction AVRG would apply at (w, n) given the current snapshot and
// anchor; pure.
Vector avrg_gradient_estimate(const AvrgState& state, const Dataset& data,
                              const LossModel& model, const Vector& w,
                              std::size_t n);

struct SgdState {
  explicit SgdState(Eigen::Index dim);

  Vector w;
};

EpochStats sgd_epoch(SgdState& state, const Dataset& data,
                     const LossModel& model,
                     std::span<const std::size_t> order, double mu,
                     std::vector<Vector>* transcript = nullptr);

struct RunSpec {
  SolverKind solver = SolverKind::Saga;
  SamplingScheme sampling = SamplingScheme::RandomReshuffling;
  PhiConvention phi_convention = PhiConvention::PostStep;
  double mu = 0.0;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;    // stream seed, already derived per run
  bool diagnostics = false;  // retain inner iterates, fill a_sq/b_sq
};

struct RunResult {
  std::vector<EpochTrace> epochs;
  double initial_rel_mse = 0.0;
  double initial_excess_risk = 0.0;
};

// Starts from w = 0 and executes spec.epochs passes, drawing a fresh
// permutation (reshuffling) or fresh uniform indices per epoch from the
// run's stream.  Trace row t reports the iterate after epoch t.  Divergence
// surfaces as divergence_error naming epoch and inner step; AVRG with
// uniform sampling is rejected up front.
RunResult run(const RunSpec& spec, const Dataset& data, const LossModel& model,
              const ReferenceSolution& ref);

}  // namespace vropt
