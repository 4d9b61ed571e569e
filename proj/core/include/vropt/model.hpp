#pragma once

#include "vropt/data.hpp"
#include "vropt/types.hpp"

namespace vropt {

// Per-sample objective Q(w; x) = (rho/2)|w|^2 + loss(label * features . w).
// LogisticL2 uses ln(1 + exp(-z)); QuadraticL2 uses (1/2)(features . w - label)^2.
struct LossModel {
  LossKind kind = LossKind::LogisticL2;
  double rho = 0.0;
};

LossModel make_loss(LossKind kind, double rho);

// Smoothness and strong-convexity constants valid for every per-sample
// objective of the dataset: delta from the sharpest per-sample Hessian bound,
// nu = rho from the ridge term.
struct CurvatureConstants {
  double delta = 0.0;
  double nu = 0.0;
};

double sample_loss(const LossModel& model, const Vector& w, const Sample& s);
Vector sample_grad(const LossModel& model, const Vector& w, const Sample& s);

double full_risk(const LossModel& model, const Vector& w, const Dataset& data);
Vector full_grad(const LossModel& model, const Vector& w, const Dataset& data);

CurvatureConstants curvature(const LossModel& model, const Dataset& data);

}  // namespace vropt
