#include "vropt/solvers.hpp"

#include "vropt/sampling.hpp"

#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>

namespace vropt {

namespace {

void check_order_size(std::span<const std::size_t> order, std::size_t n,
                      const char* who) {
  if (order.size() != n)
    throw std::invalid_argument(std::string(who) +
                                ": epoch order must have one entry per sample");
}

void check_index(std::size_t n, std::size_t size, const char* who) {
  if (n >= size)
    throw std::invalid_argument(std::string(who) + ": sample index " +
                                std::to_string(n) + " out of range");
}

void check_finite(const Vector& w, std::size_t inner) {
  if (!w.allFinite())
    throw divergence_error(-1, static_cast<long>(inner));
}

void check_permutation(std::span<const std::size_t> order, std::size_t n,
                       const char* who) {
  std::vector<bool> seen(n, false);
  for (std::size_t v : order) {
    if (v >= n || seen[v])
      throw std::invalid_argument(std::string(who) +
                                  ": order is not a permutation");
    seen[v] = true;
  }
}

}  // namespace

SagaState::SagaState(Eigen::Index dim, std::size_t n,
                     PhiConvention convention, bool diagnostic)
    : w(Vector::Zero(dim)),
      grad_table(n, Vector::Zero(dim)),
      table_avg(Vector::Zero(dim)),
      convention(convention),
      diagnostic(diagnostic) {
  if (n == 0)
    throw std::invalid_argument("SagaState: need at least one sample");
  if (diagnostic) {
    phi_table.assign(n, Vector::Zero(dim));
    phi_written.assign(n, 0);
  }
}

EpochStats saga_steps(SagaState& state, const Dataset& data,
                      const LossModel& model,
                      std::span<const std::size_t> order, double mu,
                      std::size_t count, std::vector<Vector>* transcript,
                      const SagaObserver& observer) {
  if (count > order.size())
    throw std::invalid_argument("saga_steps: count exceeds order length");
  const double inv_n = 1.0 / static_cast<double>(data.size());
  EpochStats stats;
  Vector w_before;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t n = order[i];
    check_index(n, data.size(), "saga_steps");
    if (state.diagnostic && state.convention == PhiConvention::PreStep)
      w_before = state.w;
    const Vector grad_here = sample_grad(model, state.w, data.samples[n]);
    ++stats.grad_evals;
    state.w -= mu * (grad_here - state.grad_table[n] + state.table_avg);
    check_finite(state.w, i);

    Vector new_entry;
    if (state.convention == PhiConvention::PostStep) {
      new_entry = sample_grad(model, state.w, data.samples[n]);
      ++stats.grad_evals;
    } else {
      new_entry = grad_here;
    }
    state.table_avg += inv_n * (new_entry - state.grad_table[n]);
    state.grad_table[n] = std::move(new_entry);
    if (state.diagnostic) {
      state.phi_table[n] =
          state.convention == PhiConvention::PostStep ? state.w : w_before;
      state.phi_written[n] = 1;
    }
    if (transcript) transcript->push_back(state.w);
    if (observer) observer(i, state);
  }
  return stats;
}

EpochStats saga_epoch(SagaState& state, const Dataset& data,
                      const LossModel& model,
                      std::span<const std::size_t> order, double mu,
                      std::vector<Vector>* transcript,
                      const SagaObserver& observer) {
  check_order_size(order, data.size(), "saga_epoch");
  if (transcript) transcript->push_back(state.w);
  EpochStats stats = saga_steps(state, data, model, order, mu, order.size(),
                                transcript, observer);
  // Resync the running average so drift cannot accumulate across epochs.
  Vector exact = Vector::Zero(state.w.size());
  for (const Vector& g : state.grad_table) exact += g;
  state.table_avg = exact / static_cast<double>(data.size());
  return stats;
}

Vector saga_gradient_estimate(const SagaState& state, const Dataset& data,
                              const LossModel& model, const Vector& w,
                              std::size_t n) {
  check_index(n, data.size(), "saga_gradient_estimate");
  return sample_grad(model, w, data.samples[n]) - state.grad_table[n] +
         state.table_avg;
}

SvrgState::SvrgState(Eigen::Index dim)
    : w(Vector::Zero(dim)),
      w_snapshot(Vector::Zero(dim)),
      snapshot_full_grad(Vector::Zero(dim)) {}

EpochStats svrg_epoch(SvrgState& state, const Dataset& data,
                      const LossModel& model,
                      std::span<const std::size_t> order, double mu,
                      std::vector<Vector>* transcript) {
  check_order_size(order, data.size(), "svrg_epoch");
  EpochStats stats;
  state.snapshot_full_grad = full_grad(model, state.w_snapshot, data);
  stats.grad_evals += data.size();
  if (transcript) transcript->push_back(state.w);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t n = order[i];
    check_index(n, data.size(), "svrg_epoch");
    const Vector grad_here = sample_grad(model, state.w, data.samples[n]);
    const Vector grad_snap = sample_grad(model, state.w_snapshot, data.samples[n]);
    stats.grad_evals += 2;
    state.w -= mu * (grad_here - grad_snap + state.snapshot_full_grad);
    check_finite(state.w, i);
    if (transcript) transcript->push_back(state.w);
  }
  state.w_snapshot = state.w;
  return stats;
}

AvrgState::AvrgState(Eigen::Index dim)
    : w(Vector::Zero(dim)),
      w_snapshot(Vector::Zero(dim)),
      g_current(Vector::Zero(dim)),
      g_accum(Vector::Zero(dim)) {}

EpochStats avrg_epoch(AvrgState& state, const Dataset& data,
                      const LossModel& model,
                      std::span<const std::size_t> order, double mu,
                      std::vector<Vector>* transcript,
                      const AvrgObserver& observer) {
  check_order_size(order, data.size(), "avrg_epoch");
  check_permutation(order, data.size(), "avrg_epoch");
  const double inv_n = 1.0 / static_cast<double>(data.size());
  EpochStats stats;
  state.w_snapshot = state.w;
  state.g_current = state.g_accum;
  state.g_accum.setZero();
  if (transcript) transcript->push_back(state.w);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t n = order[i];
    const Vector grad_here = sample_grad(model, state.w, data.samples[n]);
    const Vector grad_snap =
        sample_grad(model, state.w_snapshot, data.samples[n]);
    stats.grad_evals += 2;
    state.g_accum += inv_n * grad_here;  // reuses the step's own gradient
    state.w -= mu * (grad_here - grad_snap + state.g_current);
    check_finite(state.w, i);
    if (transcript) transcript->push_back(state.w);
    if (observer) observer(i, state);
  }
  return stats;
}

Vector avrg_gradient_estimate(const AvrgState& state, const Dataset& data,
                              const LossModel& model, const Vector& w,
                              std::size_t n) {
  check_index(n, data.size(), "avrg_gradient_estimate");
  return sample_grad(model, w, data.samples[n]) -
         sample_grad(model, state.w_snapshot, data.samples[n]) +
         state.g_current;
}

SgdState::SgdState(Eigen::Index dim) : w(Vector::Zero(dim)) {}

EpochStats sgd_epoch(SgdState& state, const Dataset& data,
                     const LossModel& model,
                     std::span<const std::size_t> order, double mu,
                     std::vector<Vector>* transcript) {
  check_order_size(order, data.size(), "sgd_epoch");
  EpochStats stats;
  if (transcript) transcript->push_back(state.w);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t n = order[i];
    check_index(n, data.size(), "sgd_epoch");
    state.w -= mu * sample_grad(model, state.w, data.samples[n]);
    ++stats.grad_evals;
    check_finite(state.w, i);
    if (transcript) transcript->push_back(state.w);
  }
  return stats;
}

RunResult run(const RunSpec& spec, const Dataset& data, const LossModel& model,
              const ReferenceSolution& ref) {
  if (spec.epochs == 0)
    throw std::invalid_argument("run: epochs must be >= 1");
  if (!(spec.mu > 0.0)) throw std::invalid_argument("run: mu must be positive");
  if (data.size() == 0) throw std::invalid_argument("run: empty dataset");
  if (spec.solver == SolverKind::Avrg &&
      spec.sampling == SamplingScheme::Uniform)
    throw std::invalid_argument("AVRG requires random reshuffling");

  const std::size_t n = data.size();
  RngStream rng(spec.seed);
  using State = std::variant<SgdState, SagaState, SvrgState, AvrgState>;
  State state = [&]() -> State {
    switch (spec.solver) {
      case SolverKind::Sgd:
        return SgdState(data.dim);
      case SolverKind::Saga:
        return SagaState(data.dim, n, spec.phi_convention);
      case SolverKind::Svrg:
        return SvrgState(data.dim);
      case SolverKind::Avrg:
        return AvrgState(data.dim);
    }
    throw std::invalid_argument("run: unknown solver");
  }();

  RunResult out;
  const Vector w0 = Vector::Zero(data.dim);
  out.initial_rel_mse = relative_mse(w0, ref);
  out.initial_excess_risk = excess_risk(model, data, w0, ref);
  out.epochs.reserve(spec.epochs);

  const DifferenceConvention conv = spec.solver == SolverKind::Avrg
                                        ? DifferenceConvention::Avrg
                                        : DifferenceConvention::Saga;
  std::vector<Vector> transcript;
  std::vector<std::size_t> order;
  for (std::size_t t = 0; t < spec.epochs; ++t) {
    if (spec.sampling == SamplingScheme::RandomReshuffling) {
      order = random_permutation(rng, n);
    } else {
      order.resize(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = uniform_index(rng, n);
    }
    transcript.clear();
    std::vector<Vector>* sink = spec.diagnostics ? &transcript : nullptr;
    EpochStats stats;
    try {
      stats = std::visit(
          [&](auto& st) -> EpochStats {
            using T = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<T, SgdState>)
              return sgd_epoch(st, data, model, order, spec.mu, sink);
            else if constexpr (std::is_same_v<T, SagaState>)
              return saga_epoch(st, data, model, order, spec.mu, sink);
            else if constexpr (std::is_same_v<T, SvrgState>)
              return svrg_epoch(st, data, model, order, spec.mu, sink);
            else
              return avrg_epoch(st, data, model, order, spec.mu, sink);
          },
          state);
    } catch (const divergence_error& e) {
      throw divergence_error(static_cast<long>(t), e.inner_index());
    }

    const Vector& w = std::visit([](auto& st) -> const Vector& { return st.w; },
                                 state);
    EpochTrace trace;
    trace.epoch = t;
    trace.rel_mse = relative_mse(w, ref);
    trace.excess_risk = excess_risk(model, data, w, ref);
    trace.grad_evals = stats.grad_evals;
    if (spec.diagnostics) {
      const InnerDifferences d = inner_differences(transcript, conv);
      trace.a_sq = d.a_sq;
      trace.b_sq = d.b_sq;
    }
    out.epochs.push_back(trace);
  }
  return out;
}

}  // namespace vropt
