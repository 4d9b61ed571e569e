#pragma once

#include "vropt/analysis.hpp"
#include "vropt/sampling.hpp"
#include "vropt/solvers.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace vropt {

// Upper tail of the chi-square distribution with df degrees of freedom,
// via the regularized incomplete gamma function.
double chi_square_pvalue(double stat, std::size_t df);

// A reshuffling SAGA run frozen at the start of an epoch: the diagnostic
// state (post-step memory) plus the previous epoch's iterates w_1..w_N.
// At this point the memory cells hold exactly those iterates, permuted.
struct FrozenEpochStart {
  SagaState state;
  std::vector<Vector> prev_iterates;
  double mu = 0.0;
};

// Runs warmup_epochs reshuffling epochs (post-step, diagnostic) from zero
// and freezes at the next epoch start.  warmup_epochs >= 1 so every memory
// cell has been written.
FrozenEpochStart freeze_epoch_start(const Dataset& data, const LossModel& model,
                                    double mu, std::size_t warmup_epochs,
                                    std::uint64_t seed);

struct Lemma1Report {
  std::size_t n = 0;
  std::size_t i = 0;
  std::size_t trials = 0;
  std::vector<double> frequencies;  // hit rate per previous-epoch iterate
  double chi_square = 0.0;
  double p_value = 0.0;
};

// Memory-uniformity claim: after i fresh-permutation steps, a cell drawn
// from the not-yet-visited positions holds each previous-epoch iterate with
// probability 1/N.  Replays the epoch `trials` times and chi-square-tests
// the tally.  Requires pairwise distinct previous iterates.
Lemma1Report lemma1_check(const FrozenEpochStart& frozen, const Dataset& data,
                          const LossModel& model, std::size_t i,
                          std::size_t trials, RngStream& rng);

struct MomentReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_err = 0.0;
  std::size_t trials = 0;
};

// Second-moment identity for the reshuffling memory, 0 <= i <= N:
//   E sum_n |phi_i,n|^2 = sum_{k<=i} E|w_k|^2 + ((N-i)/N) sum_n |w_n^prev|^2.
MomentReport lemma2_check(const FrozenEpochStart& frozen, const Dataset& data,
                          const LossModel& model, std::size_t i,
                          std::size_t trials, RngStream& rng);

// With-replacement counterpart, one step from an arbitrary diagnostic state:
//   E sum_n |phi_next,n|^2 = E|w_next|^2 + ((N-1)/N) sum_n |phi_n|^2.
MomentReport lemma2_with_replacement_check(const SagaState& state,
                                           const Dataset& data,
                                           const LossModel& model, double mu,
                                           std::size_t trials, RngStream& rng);

struct BiasReport {
  Vector enumerated_mean;  // average estimate over admissible next indices
  Vector formula_value;    // closed form evaluated from the memory iterates
  double agreement_err = 0.0;  // |enumerated - formula|, should be ~1e-16
  double bias_norm = 0.0;      // |enumerated - full_grad(w)|
};

// Conditional mean of the reshuffling SAGA estimate given the indices used
// so far this epoch (prefix).  Enumerates the remaining indices exactly and
// compares against the closed form
//   (1/(N-i)) sum_{n unused} [grad(w) - grad(phi_n)] + (1/N) sum_n grad(phi_n).
// Needs a diagnostic state; cells never written contribute their
// initialization value.
BiasReport bias_identity_check(const SagaState& state, const Dataset& data,
                               const LossModel& model,
                               std::span<const std::size_t> prefix);

// Mean of the estimate over all N indices drawn uniformly: collapses to the
// exact full gradient, i.e. with-replacement SAGA is unbiased.
Vector uniform_estimator_mean(const SagaState& state, const Dataset& data,
                              const LossModel& model, const Vector& w);

enum class CheckStatus { Pass, Fail, Inconclusive };

struct UnbiasednessReport {
  CheckStatus status = CheckStatus::Inconclusive;
  std::size_t qualifying_epochs = 0;
  std::size_t checks = 0;
  double max_dev = 0.0;
  double bound = 0.0;  // 3 * delta * eps
  double eps = 0.0;
};

// Runs AVRG (reshuffling) for `epochs` passes and, on every epoch whose
// iterates and previous-epoch iterates all lie within eps of w*, checks that
// every admissible estimate stays within 3 * delta * eps of grad J(w*).
// Returns Inconclusive when no epoch qualifies.
UnbiasednessReport asymptotic_unbiasedness_check(
    const Dataset& data, const LossModel& model, const ReferenceSolution& ref,
    double mu, std::size_t epochs, std::uint64_t seed, double eps);

struct DecayReport {
  std::vector<double> energy;  // V_0..V_{T-1}
  double max_ratio = 0.0;      // max V_{t+1}/V_t over the asserted range
  std::size_t ratios_checked = 0;
  double alpha = 0.0;
  double floor = 0.0;  // 1e3 * machine eps * V_0
  bool asserted = false;  // false when mu exceeds the theorem bound
  bool ratio_ok = false;
  bool envelope_ok = false;
};

// Checks the per-epoch energy contraction V_{t+1} <= alpha * V_t * ratio_slack
// and the envelope E|w~_0^t|^2 <= alpha^t * V_0 * envelope_slack on
// seed-averaged diagnostic traces.  Ratios are asserted only while V_t sits
// above the zero-energy floor.  When mu exceeds the theorem bound the report
// carries the numbers but asserts nothing.
DecayReport decay_check(const std::vector<std::vector<EpochTrace>>& per_seed,
                        double initial_rel_mse, const ReferenceSolution& ref,
                        const TheoremConstants& constants,
                        double ratio_slack = 1.05,
                        double envelope_slack = 1.10);

}  // namespace vropt
