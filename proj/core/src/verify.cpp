#include "vropt/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace vropt {

namespace {

// Regularized incomplete gamma, series and continued-fraction branches.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int k = 0; k < 500; ++k) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int k = 1; k <= 500; ++k) {
    const double an = -static_cast<double>(k) * (static_cast<double>(k) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

bool exact_equal(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index j = 0; j < a.size(); ++j)
    if (a[j] != b[j]) return false;
  return true;
}

double phi_sq_sum(const SagaState& state) {
  double sum = 0.0;
  for (const Vector& phi : state.phi_table) sum += phi.squaredNorm();
  return sum;
}

void require_diagnostic(const SagaState& state, const char* who) {
  if (!state.diagnostic)
    throw std::invalid_argument(std::string(who) +
                                ": needs a diagnostic SAGA state");
  if (state.convention != PhiConvention::PostStep)
    throw std::invalid_argument(std::string(who) +
                                ": stated for the post-step memory convention");
}

}  // namespace

double chi_square_pvalue(double stat, std::size_t df) {
  if (df == 0) throw std::invalid_argument("chi_square_pvalue: df must be >= 1");
  if (stat < 0.0)
    throw std::invalid_argument("chi_square_pvalue: negative statistic");
  if (stat == 0.0) return 1.0;
  const double a = static_cast<double>(df) / 2.0;
  const double x = stat / 2.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

FrozenEpochStart freeze_epoch_start(const Dataset& data, const LossModel& model,
                                    double mu, std::size_t warmup_epochs,
                                    std::uint64_t seed) {
  if (warmup_epochs == 0)
    throw std::invalid_argument(
        "freeze_epoch_start: need at least one warmup epoch");
  const std::size_t n = data.size();
  SagaState state(data.dim, n, PhiConvention::PostStep, /*diagnostic=*/true);
  RngStream rng(seed);
  std::vector<Vector> transcript;
  for (std::size_t t = 0; t < warmup_epochs; ++t) {
    const std::vector<std::size_t> order = random_permutation(rng, n);
    transcript.clear();
    saga_epoch(state, data, model, order, mu, &transcript);
  }

  FrozenEpochStart frozen{std::move(state),
                          {transcript.begin() + 1, transcript.end()},
                          mu};

  // The memory must now hold exactly the previous epoch's iterates, permuted.
  std::vector<bool> matched(n, false);
  for (const Vector& phi : frozen.state.phi_table) {
    bool found = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (!matched[k] && exact_equal(phi, frozen.prev_iterates[k])) {
        matched[k] = true;
        found = true;
        break;
      }
    }
    if (!found)
      throw std::runtime_error(
          "freeze_epoch_start: memory does not hold the previous epoch's "
          "iterates");
  }
  return frozen;
}

Lemma1Report lemma1_check(const FrozenEpochStart& frozen, const Dataset& data,
                          const LossModel& model, std::size_t i,
                          std::size_t trials, RngStream& rng) {
  const std::size_t n = data.size();
  if (i >= n)
    throw std::invalid_argument("lemma1_check: need i < N");
  if (trials == 0)
    throw std::invalid_argument("lemma1_check: need at least one trial");
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (exact_equal(frozen.prev_iterates[a], frozen.prev_iterates[b]))
        throw std::invalid_argument(
            "lemma1_check: previous-epoch iterates are not pairwise distinct");

  Lemma1Report report;
  report.n = n;
  report.i = i;
  report.trials = trials;
  if (n == 1) {
    report.frequencies = {1.0};
    report.p_value = 1.0;
    return report;
  }

  std::vector<std::size_t> counts(n, 0);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    SagaState replay = frozen.state;
    const std::vector<std::size_t> order = random_permutation(rng, n);
    saga_steps(replay, data, model, order, frozen.mu, i);
    const std::size_t pos = i + uniform_index(rng, n - i);
    const Vector& cell = replay.phi_table[order[pos]];
    bool found = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (exact_equal(cell, frozen.prev_iterates[k])) {
        ++counts[k];
        found = true;
        break;
      }
    }
    if (!found)
      throw std::runtime_error(
          "lemma1_check: unvisited cell does not hold a previous-epoch "
          "iterate");
  }

  const double expected = static_cast<double>(trials) / static_cast<double>(n);
  report.frequencies.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double diff = static_cast<double>(counts[k]) - expected;
    report.chi_square += diff * diff / expected;
    report.frequencies[k] =
        static_cast<double>(counts[k]) / static_cast<double>(trials);
  }
  report.p_value = chi_square_pvalue(report.chi_square, n - 1);
  return report;
}

MomentReport lemma2_check(const FrozenEpochStart& frozen, const Dataset& data,
                          const LossModel& model, std::size_t i,
                          std::size_t trials, RngStream& rng) {
  const std::size_t n = data.size();
  if (i > n) throw std::invalid_argument("lemma2_check: need i <= N");
  if (trials == 0)
    throw std::invalid_argument("lemma2_check: need at least one trial");

  double prev_sq = 0.0;
  for (const Vector& w : frozen.prev_iterates) prev_sq += w.squaredNorm();
  const double carried =
      prev_sq * static_cast<double>(n - i) / static_cast<double>(n);

  double lhs_sum = 0.0;
  double rhs_sum = 0.0;
  std::vector<Vector> transcript;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    SagaState replay = frozen.state;
    const std::vector<std::size_t> order = random_permutation(rng, n);
    transcript.clear();
    saga_steps(replay, data, model, order, frozen.mu, i, &transcript);
    lhs_sum += phi_sq_sum(replay);
    double fresh = 0.0;
    for (const Vector& w : transcript) fresh += w.squaredNorm();
    rhs_sum += fresh + carried;
  }

  MomentReport report;
  report.trials = trials;
  report.lhs = lhs_sum / static_cast<double>(trials);
  report.rhs = rhs_sum / static_cast<double>(trials);
  report.rel_err = std::abs(report.lhs - report.rhs) /
                   std::max(std::abs(report.rhs), 1e-300);
  return report;
}

MomentReport lemma2_with_replacement_check(const SagaState& state,
                                           const Dataset& data,
                                           const LossModel& model, double mu,
                                           std::size_t trials, RngStream& rng) {
  require_diagnostic(state, "lemma2_with_replacement_check");
  if (trials == 0)
    throw std::invalid_argument(
        "lemma2_with_replacement_check: need at least one trial");
  const std::size_t n = data.size();
  const double base_sq = phi_sq_sum(state);
  const double carried =
      base_sq * static_cast<double>(n - 1) / static_cast<double>(n);

  double lhs_sum = 0.0;
  double rhs_sum = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    SagaState replay = state;
    const std::size_t u = uniform_index(rng, n);
    saga_steps(replay, data, model, std::span<const std::size_t>(&u, 1), mu, 1);
    lhs_sum += phi_sq_sum(replay);
    rhs_sum += replay.w.squaredNorm() + carried;
  }

  MomentReport report;
  report.trials = trials;
  report.lhs = lhs_sum / static_cast<double>(trials);
  report.rhs = rhs_sum / static_cast<double>(trials);
  report.rel_err = std::abs(report.lhs - report.rhs) /
                   std::max(std::abs(report.rhs), 1e-300);
  return report;
}

BiasReport bias_identity_check(const SagaState& state, const Dataset& data,
                               const LossModel& model,
                               std::span<const std::size_t> prefix) {
  require_diagnostic(state, "bias_identity_check");
  const std::size_t n = data.size();
  if (prefix.size() >= n)
    throw std::invalid_argument(
        "bias_identity_check: prefix must leave at least one index unused");

  std::vector<bool> used(n, false);
  for (std::size_t v : prefix) {
    if (v >= n || used[v])
      throw std::invalid_argument(
          "bias_identity_check: prefix is not a valid partial permutation");
    used[v] = true;
  }
  const double remaining = static_cast<double>(n - prefix.size());

  // The estimate's memory average, recomputed exactly rather than read from
  // the solver's running copy.
  Vector table_mean = Vector::Zero(state.w.size());
  for (const Vector& g : state.grad_table) table_mean += g;
  table_mean /= static_cast<double>(n);

  Vector enumerated = Vector::Zero(state.w.size());
  for (std::size_t v = 0; v < n; ++v) {
    if (used[v]) continue;
    enumerated += sample_grad(model, state.w, data.samples[v]) -
                  state.grad_table[v] + table_mean;
  }
  enumerated /= remaining;

  // Memory cells that were never overwritten still hold their initialization;
  // only written cells have a recorded iterate to re-evaluate at.
  Vector memory_mean = Vector::Zero(state.w.size());
  std::vector<Vector> memory_grads(n);
  for (std::size_t v = 0; v < n; ++v) {
    memory_grads[v] =
        state.phi_written[v]
            ? sample_grad(model, state.phi_table[v], data.samples[v])
            : state.grad_table[v];
    memory_mean += memory_grads[v];
  }
  memory_mean /= static_cast<double>(n);

  Vector formula = Vector::Zero(state.w.size());
  for (std::size_t v = 0; v < n; ++v) {
    if (used[v]) continue;
    formula += sample_grad(model, state.w, data.samples[v]) - memory_grads[v];
  }
  formula = formula / remaining + memory_mean;

  BiasReport report;
  report.enumerated_mean = enumerated;
  report.formula_value = formula;
  report.agreement_err = (enumerated - formula).norm();
  report.bias_norm = (enumerated - full_grad(model, state.w, data)).norm();
  return report;
}

Vector uniform_estimator_mean(const SagaState& state, const Dataset& data,
                              const LossModel& model, const Vector& w) {
  const std::size_t n = data.size();
  Vector table_mean = Vector::Zero(w.size());
  for (const Vector& g : state.grad_table) table_mean += g;
  table_mean /= static_cast<double>(n);

  Vector mean = Vector::Zero(w.size());
  for (std::size_t v = 0; v < n; ++v)
    mean += sample_grad(model, w, data.samples[v]) - state.grad_table[v] +
            table_mean;
  return mean / static_cast<double>(n);
}

UnbiasednessReport asymptotic_unbiasedness_check(
    const Dataset& data, const LossModel& model, const ReferenceSolution& ref,
    double mu, std::size_t epochs, std::uint64_t seed, double eps) {
  if (!(eps > 0.0))
    throw std::invalid_argument(
        "asymptotic_unbiasedness_check: eps must be positive");
  const std::size_t n = data.size();
  const CurvatureConstants c = curvature(model, data);
  const Vector grad_star = full_grad(model, ref.w_star, data);

  UnbiasednessReport report;
  report.eps = eps;
  report.bound = 3.0 * c.delta * eps;

  AvrgState state(data.dim);
  RngStream rng(seed);
  std::vector<Vector> transcript;
  std::vector<Vector> snap_grads(n);
  bool prev_within = false;  // previous epoch's iterates all within eps

  for (std::size_t t = 0; t < epochs; ++t) {
    const std::vector<std::size_t> order = random_permutation(rng, n);
    transcript.clear();
    avrg_epoch(state, data, model, order, mu, &transcript);

    bool within = true;
    for (const Vector& w : transcript)
      if ((w - ref.w_star).norm() > eps) {
        within = false;
        break;
      }

    // g_current was built from the previous epoch; both epochs must sit
    // inside the eps ball for the bound to apply.
    if (within && prev_within) {
      ++report.qualifying_epochs;
      for (std::size_t v = 0; v < n; ++v)
        snap_grads[v] = sample_grad(model, state.w_snapshot, data.samples[v]);
      std::vector<bool> used(n, false);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t v = 0; v < n; ++v) {
          if (used[v]) continue;
          const Vector estimate =
              sample_grad(model, transcript[i], data.samples[v]) -
              snap_grads[v] + state.g_current;
          const double dev = (estimate - grad_star).norm();
          report.max_dev = std::max(report.max_dev, dev);
          ++report.checks;
        }
        used[order[i]] = true;
      }
    }
    prev_within = within;
  }

  if (report.qualifying_epochs == 0) {
    report.status = CheckStatus::Inconclusive;
  } else {
    report.status = report.max_dev <= report.bound ? CheckStatus::Pass
                                                   : CheckStatus::Fail;
  }
  return report;
}

DecayReport decay_check(const std::vector<std::vector<EpochTrace>>& per_seed,
                        double initial_rel_mse, const ReferenceSolution& ref,
                        const TheoremConstants& constants, double ratio_slack,
                        double envelope_slack) {
  const double wstar_sq = ref.w_star.squaredNorm();
  const double initial_msd = initial_rel_mse * wstar_sq;

  DecayReport report;
  report.alpha = constants.alpha;
  report.energy = energy(per_seed, initial_msd, wstar_sq, constants.gamma,
                         constants.kind);
  report.asserted = !constants.mu_exceeds_bound;
  report.floor = 1e3 * std::numeric_limits<double>::epsilon() *
                 report.energy.front();

  for (std::size_t t = 0; t + 1 < report.energy.size(); ++t) {
    if (report.energy[t] <= report.floor) continue;
    const double ratio = report.energy[t + 1] / report.energy[t];
    report.max_ratio = std::max(report.max_ratio, ratio);
    ++report.ratios_checked;
  }
  report.ratio_ok = report.ratios_checked == 0 ||
                    report.max_ratio <= constants.alpha * ratio_slack;

  // Envelope on the seed-averaged squared error itself.
  const std::size_t epochs = per_seed.front().size();
  const double seeds = static_cast<double>(per_seed.size());
  report.envelope_ok = initial_msd <= report.energy.front() * envelope_slack;
  double alpha_pow = 1.0;
  for (std::size_t t = 0; t < epochs; ++t) {
    alpha_pow *= constants.alpha;
    double msd = 0.0;
    for (const auto& trace : per_seed)
      msd += trace[t].rel_mse * wstar_sq / seeds;
    if (msd > alpha_pow * report.energy.front() * envelope_slack) {
      report.envelope_ok = false;
      break;
    }
  }
  return report;
}

}  // namespace vropt
