#pragma once

#include "vropt/data.hpp"
#include "vropt/model.hpp"
#include "vropt/types.hpp"

#include <span>
#include <vector>

namespace vropt {

struct ReferenceSolution {
  Vector w_star;
  double risk_star = 0.0;
  double grad_norm = 0.0;  // achieved, <= tol
  double tol = 0.0;        // requested
};

// Quadratic ridge objectives are solved by normal equations; logistic ones by
// full-gradient descent with Armijo backtracking until |grad| <= tol.  Throws
// std::runtime_error if the iteration cap is hit, reporting the norm reached.
ReferenceSolution reference_minimizer(const LossModel& model,
                                      const Dataset& data, double tol = 1e-12);

// |w - w*|^2 / |w*|^2; a zero minimizer throws std::invalid_argument.
double relative_mse(const Vector& w, const ReferenceSolution& ref);

// J(w) - J(w*), floored at zero when it is within the reference oracle's
// noise band 10 * tol * (1 + |J(w*)|).
double excess_risk(const LossModel& model, const Dataset& data,
                   const Vector& w, const ReferenceSolution& ref);

enum class TheoremKind { SagaRR, Avrg };

// Both constant sets appear in two variants.  Derived is the internally
// consistent pair (gamma carries delta^2/nu and alpha's cubic term follows
// from it); Printed is the looser gamma = c * mu * delta * N form quoted
// alongside the rate statements, kept for comparison.
enum class ConstantVariant { Derived, Printed };

struct TheoremConstants {
  TheoremKind kind = TheoremKind::SagaRR;
  double mu = 0.0;
  double mu_max = 0.0;
  double gamma = 0.0;
  double alpha = 0.0;
  bool mu_exceeds_bound = false;
};

// The step-size threshold mu_max under which the rate statement holds:
// nu / (11 delta^2 N) for SagaRR, nu / (9 delta^2 N) for Avrg.
double step_size_bound(TheoremKind kind, const CurvatureConstants& c,
                       std::size_t n);

TheoremConstants theorem_constants(TheoremKind kind, double mu,
                                   const CurvatureConstants& c, std::size_t n,
                                   ConstantVariant variant =
                                       ConstantVariant::Derived);

// Sum range for the within-epoch drift statistics: Saga averages
// i = 1..N-1, Avrg averages i = 0..N-1 (its backward term keeps the
// full-epoch difference |w_N - w_0|^2).
enum class DifferenceConvention { Saga, Avrg };

struct InnerDifferences {
  double a_sq = 0.0;  // mean |w_i - w_0|^2
  double b_sq = 0.0;  // mean |w_N - w_i|^2
};

// iterates must hold the full inner trajectory w_0..w_N of one epoch.
InnerDifferences inner_differences(std::span<const Vector> iterates,
                                   DifferenceConvention convention);

// Seed-averaged energy V_t = E|w_0^t - w*|^2 + coef * gamma * (a_t^2 + b_{t-1}^2)
// with coef 11/16 (SagaRR) or 13/16 (Avrg) and b_{-1}^2 = 0.  Traces must
// carry a_sq/b_sq (diagnostics on) and initial_msd is E|w_0^0 - w*|^2.
// Returns V_0..V_{T-1}.
std::vector<double> energy(const std::vector<std::vector<EpochTrace>>& per_seed,
                           double initial_msd, double wstar_sq_norm,
                           double gamma, TheoremKind kind);

}  // namespace vropt
