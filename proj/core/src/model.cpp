#include "vropt/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vropt {

namespace {

void check_dims(const Vector& w, const Sample& s) {
  if (w.size() != s.features.size())
    throw std::invalid_argument(
        "weight dimension " + std::to_string(w.size()) +
        " does not match feature dimension " +
        std::to_string(s.features.size()));
}

// ln(1 + exp(x)) without overflow for large |x|.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// 1 / (1 + exp(x)), i.e. sigmoid(-x), evaluated stably.
double sigmoid_neg(double x) {
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

}  // namespace

LossModel make_loss(LossKind kind, double rho) {
  if (!(rho > 0.0))
    throw std::invalid_argument("make_loss: rho must be positive");
  return {kind, rho};
}

double sample_loss(const LossModel& model, const Vector& w, const Sample& s) {
  check_dims(w, s);
  const double ridge = 0.5 * model.rho * w.squaredNorm();
  const double hw = s.features.dot(w);
  if (model.kind == LossKind::LogisticL2)
    return ridge + softplus(-static_cast<double>(s.label) * hw);
  const double r = hw - static_cast<double>(s.label);
  return ridge + 0.5 * r * r;
}

Vector sample_grad(const LossModel& model, const Vector& w, const Sample& s) {
  check_dims(w, s);
  const double hw = s.features.dot(w);
  if (model.kind == LossKind::LogisticL2) {
    const double g = static_cast<double>(s.label);
    return model.rho * w - (g * sigmoid_neg(g * hw)) * s.features;
  }
  return model.rho * w + (hw - static_cast<double>(s.label)) * s.features;
}

double full_risk(const LossModel& model, const Vector& w, const Dataset& data) {
  if (data.size() == 0)
    throw std::invalid_argument("full_risk: empty dataset");
  double total = 0.0;
  for (const Sample& s : data.samples) total += sample_loss(model, w, s);
  return total / static_cast<double>(data.size());
}

Vector full_grad(const LossModel& model, const Vector& w, const Dataset& data) {
  if (data.size() == 0)
    throw std::invalid_argument("full_grad: empty dataset");
  Vector total = Vector::Zero(w.size());
  for (const Sample& s : data.samples) total += sample_grad(model, w, s);
  return total / static_cast<double>(data.size());
}

CurvatureConstants curvature(const LossModel& model, const Dataset& data) {
  if (data.size() == 0)
    throw std::invalid_argument("curvature: empty dataset");
  double max_sq = 0.0;
  for (const Sample& s : data.samples)
    max_sq = std::max(max_sq, s.features.squaredNorm());
  // Logistic curvature peaks at sigmoid'(0) = 1/4; the quadratic term
  // contributes the full outer product.
  const double factor = model.kind == LossKind::LogisticL2 ? 0.25 : 1.0;
  return {model.rho + factor * max_sq, model.rho};
}

}  // namespace vropt
