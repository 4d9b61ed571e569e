#include "vropt/analysis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vropt {

namespace {

ReferenceSolution solve_quadratic(const LossModel& model, const Dataset& data,
                                  double tol) {
  const Eigen::Index m = data.dim;
  const double n = static_cast<double>(data.size());
  Eigen::MatrixXd a = model.rho * Eigen::MatrixXd::Identity(m, m);
  Vector b = Vector::Zero(m);
  for (const Sample& s : data.samples) {
    a.noalias() += s.features * s.features.transpose() / n;
    b += (static_cast<double>(s.label) / n) * s.features;
  }
  ReferenceSolution ref;
  ref.w_star = a.ldlt().solve(b);
  ref.risk_star = full_risk(model, ref.w_star, data);
  ref.grad_norm = full_grad(model, ref.w_star, data).norm();
  ref.tol = tol;
  return ref;
}

// Fixed-step descent at 1/delta.  delta is a certified global smoothness
// bound, so the step contracts |w - w*| by (1 - nu/delta) without a line
// search; a risk-based sufficient-decrease test would stall once per-step
// progress drops under the rounding floor of the risk value.
ReferenceSolution solve_logistic(const LossModel& model, const Dataset& data,
                                 double tol) {
  const CurvatureConstants c = curvature(model, data);
  const double step = 1.0 / c.delta;
  Vector w = Vector::Zero(data.dim);
  const int max_iters = 200000;
  for (int it = 0; it < max_iters; ++it) {
    const Vector grad = full_grad(model, w, data);
    const double gnorm = grad.norm();
    if (gnorm <= tol) {
      ReferenceSolution ref;
      ref.w_star = w;
      ref.risk_star = full_risk(model, w, data);
      ref.grad_norm = gnorm;
      ref.tol = tol;
      return ref;
    }
    w -= step * grad;
  }
  throw std::runtime_error(
      "reference_minimizer: iteration cap reached with |grad| = " +
      std::to_string(full_grad(model, w, data).norm()) +
      " > tol = " + std::to_string(tol));
}

}  // namespace

ReferenceSolution reference_minimizer(const LossModel& model,
                                      const Dataset& data, double tol) {
  if (data.size() == 0)
    throw std::invalid_argument("reference_minimizer: empty dataset");
  if (!(tol > 0.0))
    throw std::invalid_argument("reference_minimizer: tol must be positive");
  return model.kind == LossKind::QuadraticL2 ? solve_quadratic(model, data, tol)
                                             : solve_logistic(model, data, tol);
}

double relative_mse(const Vector& w, const ReferenceSolution& ref) {
  const double denom = ref.w_star.squaredNorm();
  if (denom == 0.0)
    throw std::invalid_argument("relative_mse: zero reference minimizer");
  return (w - ref.w_star).squaredNorm() / denom;
}

double excess_risk(const LossModel& model, const Dataset& data,
                   const Vector& w, const ReferenceSolution& ref) {
  const double value = full_risk(model, w, data) - ref.risk_star;
  if (std::abs(value) <= 10.0 * ref.tol * (1.0 + std::abs(ref.risk_star)))
    return 0.0;
  return value;
}

double step_size_bound(TheoremKind kind, const CurvatureConstants& c,
                       std::size_t n) {
  if (!(c.delta > 0.0) || !(c.nu > 0.0) || c.nu > c.delta)
    throw std::invalid_argument("step_size_bound: need 0 < nu <= delta");
  if (n == 0) throw std::invalid_argument("step_size_bound: n must be >= 1");
  const double factor = kind == TheoremKind::SagaRR ? 11.0 : 9.0;
  return c.nu / (factor * c.delta * c.delta * static_cast<double>(n));
}

TheoremConstants theorem_constants(TheoremKind kind, double mu,
                                   const CurvatureConstants& c, std::size_t n,
                                   ConstantVariant variant) {
  if (!(mu > 0.0))
    throw std::invalid_argument("theorem_constants: mu must be positive");

  const double dn = static_cast<double>(n);
  TheoremConstants out;
  out.kind = kind;
  out.mu = mu;
  out.mu_max = step_size_bound(kind, c, n);
  out.mu_exceeds_bound = mu > out.mu_max;

  const double lead = kind == TheoremKind::SagaRR ? 9.0 : 6.0;
  out.gamma = variant == ConstantVariant::Derived
                  ? lead * mu * dn * c.delta * c.delta / c.nu
                  : lead * mu * c.delta * dn;
  // alpha = (1 - mu nu N / 4) / (1 - 3 gamma delta^2 mu^2 N^2); the cubic
  // term inherits whichever gamma is in force.
  const double num = 1.0 - mu * c.nu * dn / 4.0;
  const double den =
      1.0 - 3.0 * out.gamma * c.delta * c.delta * mu * mu * dn * dn;
  out.alpha = num / den;
  return out;
}

InnerDifferences inner_differences(std::span<const Vector> iterates,
                                   DifferenceConvention convention) {
  if (iterates.size() < 2)
    throw std::invalid_argument(
        "inner_differences: need the full epoch trajectory w_0..w_N");
  const std::size_t n = iterates.size() - 1;
  const Vector& first = iterates[0];
  const Vector& last = iterates[n];
  const std::size_t begin = convention == DifferenceConvention::Saga ? 1 : 0;
  InnerDifferences out;
  for (std::size_t i = begin; i < n; ++i) {
    out.a_sq += (iterates[i] - first).squaredNorm();
    out.b_sq += (last - iterates[i]).squaredNorm();
  }
  out.a_sq /= static_cast<double>(n);
  out.b_sq /= static_cast<double>(n);
  return out;
}

std::vector<double> energy(const std::vector<std::vector<EpochTrace>>& per_seed,
                           double initial_msd, double wstar_sq_norm,
                           double gamma, TheoremKind kind) {
  if (per_seed.empty() || per_seed.front().empty())
    throw std::invalid_argument("energy: no traces");
  const std::size_t epochs = per_seed.front().size();
  for (const auto& trace : per_seed)
    if (trace.size() != epochs)
      throw std::invalid_argument("energy: ragged traces across seeds");

  const double seeds = static_cast<double>(per_seed.size());
  std::vector<double> msd(epochs + 1, 0.0);  // E|w_0^t - w*|^2
  std::vector<double> a_sq(epochs, 0.0), b_sq(epochs, 0.0);
  msd[0] = initial_msd;
  for (const auto& trace : per_seed) {
    for (std::size_t t = 0; t < epochs; ++t) {
      if (!trace[t].a_sq || !trace[t].b_sq)
        throw std::invalid_argument(
            "energy: traces lack a_sq/b_sq; run with diagnostics enabled");
      msd[t + 1] += trace[t].rel_mse * wstar_sq_norm / seeds;
      a_sq[t] += *trace[t].a_sq / seeds;
      b_sq[t] += *trace[t].b_sq / seeds;
    }
  }

  const double coef = kind == TheoremKind::SagaRR ? 11.0 / 16.0 : 13.0 / 16.0;
  std::vector<double> v(epochs, 0.0);
  for (std::size_t t = 0; t < epochs; ++t) {
    const double b_prev = t == 0 ? 0.0 : b_sq[t - 1];
    v[t] = msd[t] + coef * gamma * (a_sq[t] + b_prev);
  }
  return v;
}

}  // namespace vropt
