#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vropt/analysis.hpp>
#include <vropt/sampling.hpp>
#include <vropt/solvers.hpp>
#include <vropt/verify.hpp>

#include "test_support.hpp"

#include <cmath>
#include <numeric>
#include <vector>

using namespace vropt;
using support::close;

namespace {

Dataset quad_set(std::size_t n, Eigen::Index m, std::uint64_t seed) {
  RngStream rng(seed);
  Dataset d;
  d.dim = m;
  for (std::size_t k = 0; k < n; ++k) {
    Sample s;
    s.features.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) s.features[j] = rng.next_gaussian();
    s.features /= s.features.norm();
    s.label = rng.next_double() < 0.5 ? -1 : 1;
    d.samples.push_back(std::move(s));
  }
  return d;
}

double phi_sq_sum(const SagaState& state) {
  double acc = 0.0;
  for (const Vector& phi : state.phi_table) acc += phi.squaredNorm();
  return acc;
}

}  // namespace

TEST_CASE("chi-square tail matches frozen external values") {
  // Reference numbers computed with an independent scientific library.
  CHECK(close(chi_square_pvalue(49.728, 23), 0.0010000699821430886, 1e-9));
  CHECK(close(chi_square_pvalue(14.0671, 7), 0.050000704055509472, 1e-9));
  CHECK(close(chi_square_pvalue(3.8414588206941236, 1), 0.05, 1e-9));
  CHECK(close(chi_square_pvalue(13.276704135987625, 4), 0.01, 1e-9));
  CHECK(close(chi_square_pvalue(7.814727903251178, 3), 0.05, 1e-9));
  CHECK(close(chi_square_pvalue(35.0, 23), 0.052015561345783889, 1e-9));

  CHECK(chi_square_pvalue(0.0, 5) == 1.0);
  CHECK_THROWS_AS(chi_square_pvalue(1.0, 0), std::invalid_argument);

  double prev = 1.0;
  for (double stat : {0.5, 2.0, 8.0, 20.0, 60.0}) {
    const double p = chi_square_pvalue(stat, 6);
    CHECK(p < prev);
    CHECK(p > 0.0);
    prev = p;
  }
}

TEST_CASE("freezing an epoch start snapshots a consistent memory") {
  const Dataset data = synth_logistic(12, 3, 3);
  const LossModel model = make_loss(LossKind::LogisticL2, 1.0 / 12.0);
  const FrozenEpochStart frozen = freeze_epoch_start(data, model, 0.05, 2, 17);
  CHECK(frozen.state.diagnostic);
  CHECK(frozen.state.convention == PhiConvention::PostStep);
  CHECK(frozen.prev_iterates.size() == 12);
  CHECK(frozen.mu == 0.05);
  for (char written : frozen.state.phi_written) CHECK(written == 1);
  // The memory must hold exactly the previous epoch's iterates.
  CHECK(close(phi_sq_sum(frozen.state),
              std::accumulate(frozen.prev_iterates.begin(),
                              frozen.prev_iterates.end(), 0.0,
                              [](double acc, const Vector& v) {
                                return acc + v.squaredNorm();
                              }),
              1e-15));
}

TEST_CASE("memory uniformity holds at a pinned seed") {
  const Dataset data = quad_set(8, 3, 21);
  const LossModel model = make_loss(LossKind::QuadraticL2, 0.125);
  const FrozenEpochStart frozen = freeze_epoch_start(data, model, 0.05, 2, 5);

  RngStream rng(71);
  const Lemma1Report report = lemma1_check(frozen, data, model, 3, 4000, rng);
  CHECK(report.n == 8);
  CHECK(report.i == 3);
  CHECK(report.trials == 4000);
  REQUIRE(report.frequencies.size() == 8);
  CHECK(close(std::accumulate(report.frequencies.begin(),
                              report.frequencies.end(), 0.0),
              1.0, 1e-12));
  for (double f : report.frequencies) {
    CHECK(f > 0.05);
    CHECK(f < 0.25);
  }
  CHECK(report.p_value > 0.001);
}

TEST_CASE("memory uniformity sharpens as trials grow") {
  const Dataset data = quad_set(4, 2, 22);
  const LossModel model = make_loss(LossKind::QuadraticL2, 0.25);
  const FrozenEpochStart frozen = freeze_epoch_start(data, model, 0.05, 2, 6);

  auto mean_max_dev = [&](std::size_t trials, std::uint64_t seed_base) {
    double acc = 0.0;
    const int reps = 10;
    for (int rep = 0; rep < reps; ++rep) {
      RngStream rng(derive_seed(seed_base, static_cast<std::uint64_t>(rep)));
      const Lemma1Report r = lemma1_check(frozen, data, model, 1, trials, rng);
      double dev = 0.0;
      for (double f : r.frequencies) dev = std::max(dev, std::abs(f - 0.25));
      acc += dev;
    }
    return acc / reps;
  };

  const double coarse = mean_max_dev(1500, 100);
  const double fine = mean_max_dev(6000, 200);
  // Quadrupling the trials should roughly halve the deviation.
  CHECK(fine < 0.75 * coarse);
}

TEST_CASE("memory uniformity degenerate and invalid inputs") {
  Dataset one;
  one.dim = 1;
  one.samples = {support::make_sample({1.0}, +1)};
  const LossModel model = make_loss(LossKind::QuadraticL2, 1.0);
  const FrozenEpochStart frozen = freeze_epoch_start(one, model, 0.1, 1, 2);
  RngStream rng(1);
  const Lemma1Report r = lemma1_check(frozen, one, model, 0, 50, rng);
  CHECK(r.p_value == 1.0);
  CHECK(r.frequencies == std::vector<double>{1.0});

  const Dataset data = quad_set(4, 2, 23);
  const LossModel quad = make_loss(LossKind::QuadraticL2, 0.25);
  const FrozenEpochStart f4 = freeze_epoch_start(data, quad, 0.05, 1, 3);
  CHECK_THROWS_AS(lemma1_check(f4, data, quad, 4, 10, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(lemma1_check(f4, data, quad, 1, 0, rng),
                  std::invalid_argument);

  FrozenEpochStart fake{SagaState(1, 2, PhiConvention::PostStep, true),
                        {Vector::Zero(1), Vector::Zero(1)},
                        0.1};
  CHECK_THROWS_AS(lemma1_check(fake, quad_set(2, 1, 1), quad, 0, 10, rng),
                  std::invalid_argument);
}

TEST_CASE("second moment identity is exact at the epoch edges") {
  const Dataset data = quad_set(8, 3, 24);
  const LossModel model = make_loss(LossKind::QuadraticL2, 0.125);
  const FrozenEpochStart frozen = freeze_epoch_start(data, model, 0.04, 2, 7);

  RngStream rng(41);
  const MomentReport at0 = lemma2_check(frozen, data, model, 0, 40, rng);
  CHECK(at0.rel_err <= 1e-12);
  const MomentReport atN = lemma2_check(frozen, data, model, 8, 40, rng);
  CHECK(atN.rel_err <= 1e-12);
  CHECK_THROWS_AS(lemma2_check(frozen, data, model, 9, 10, rng),
                  std::invalid_argument);
}

TEST_CASE("second moment identity concentrates mid-epoch") {
  const Dataset data = quad_set(8, 3, 24);
  const LossModel model = make_loss(LossKind::QuadraticL2, 0.125);
  const FrozenEpochStart frozen = freeze_epoch_start(data, model, 0.04, 2, 7);

  RngStream rng(42);
  const MomentReport mid = lemma2_check(frozen, data, model, 4, 20000, rng);
  CHECK(mid.trials == 20000);
  CHECK(mid.lhs > 0.0);
  CHECK(mid.rhs > 0.0);
  INFO("lemma2 mid-epoch relative error: " << mid.rel_err);
  CHECK(mid.rel_err <= 0.05);
}

TEST_CASE("with-replacement moment identity") {
  const Dataset data = quad_set(6, 2, 25);
  const LossModel model = make_loss(LossKind::QuadraticL2, 1.0 / 6.0);
  const FrozenEpochStart frozen = freeze_epoch_start(data, model, 0.05, 2, 8);

  // Deterministic coincidence with the reshuffling carry at a fresh epoch
  // start: the memory is the previous iterates, permuted.
  double prev_sq = 0.0;
  for (const Vector& v : frozen.prev_iterates) prev_sq += v.squaredNorm();
  CHECK(close(phi_sq_sum(frozen.state), prev_sq, 1e-15));

  RngStream rng(43);
  const MomentReport one_step = lemma2_with_replacement_check(
      frozen.state, data, model, frozen.mu, 20000, rng);
  INFO("one-step relative error: " << one_step.rel_err);
  CHECK(one_step.rel_err <= 0.05);

  // Degenerate single-sample case is exact for any number of trials.
  Dataset single;
  single.dim = 1;
  single.samples = {support::make_sample({1.0}, +1)};
  const LossModel quad = make_loss(LossKind::QuadraticL2, 1.0);
  const FrozenEpochStart fs = freeze_epoch_start(single, quad, 0.1, 1, 9);
  const MomentReport deg = lemma2_with_replacement_check(
      fs.state, single, quad, 0.1, 25, rng);
  CHECK(deg.rel_err <= 1e-12);

  SagaState plain(2, 6, PhiConvention::PostStep, false);
  CHECK_THROWS_AS(
      lemma2_with_replacement_check(plain, data, model, 0.05, 10, rng),
      std::invalid_argument);
  SagaState pre(2, 6, PhiConvention::PreStep, true);
  CHECK_THROWS_AS(
      lemma2_with_replacement_check(pre, data, model, 0.05, 10, rng),
      std::invalid_argument);
}

TEST_CASE("conditional bias identity from empty memory") {
  const Dataset data = support::quad3_dataset();
  const LossModel model = make_loss(LossKind::QuadraticL2, 0.25);
  SagaState state(2, 3, PhiConvention::PostStep, true);
  state.w << 0.3, -0.4;

  const BiasReport report = bias_identity_check(state, data, model, {});
  CHECK(report.agreement_err <= 1e-15);
  // With zero tables the conditional mean is the plain mean gradient.
  CHECK(report.bias_norm <= 1e-15);
  CHECK(support::max_abs_diff(report.enumerated_mean,
                              full_grad(model, state.w, data)) <= 1e-15);
}

TEST_CASE("conditional bias vanishes when memory sits at the iterate") {
  const Dataset data = synth_logistic(7, 3, 31);
  const LossModel model = make_loss(LossKind::LogisticL2, 1.0 / 7.0);
  SagaState state(3, 7, PhiConvention::PostStep, true);
  RngStream rng(12);
  for (Eigen::Index j = 0; j < 3; ++j) state.w[j] = rng.next_gaussian();
  Vector avg = Vector::Zero(3);
  for (std::size_t v = 0; v < 7; ++v) {
    state.phi_table[v] = state.w;
    state.phi_written[v] = 1;
    state.grad_table[v] = sample_grad(model, state.w, data.samples[v]);
    avg += state.grad_table[v];
  }
  state.table_avg = avg / 7.0;

  const std::vector<std::size_t> prefix{2, 5};
  const BiasReport report = bias_identity_check(state, data, model, prefix);
  CHECK(report.agreement_err <= 1e-14);
  CHECK(report.bias_norm <= 1e-14);
}

TEST_CASE("conditional bias identity mid-training") {
  const Dataset data = synth_logistic(10, 3, 47);
  const LossModel model = make_loss(LossKind::LogisticL2, 0.1);
  FrozenEpochStart frozen = freeze_epoch_start(data, model, 0.05, 3, 29);

  RngStream rng(55);
  const std::vector<std::size_t> order = random_permutation(rng, 10);
  saga_steps(frozen.state, data, model, order, frozen.mu, 3);
  const std::vector<std::size_t> prefix(order.begin(), order.begin() + 3);

  const BiasReport report =
      bias_identity_check(frozen.state, data, model, prefix);
  INFO("agreement: " << report.agreement_err << " bias: " << report.bias_norm);
  CHECK(report.agreement_err <= 1e-12);
}

TEST_CASE("conditional bias identity validates inputs") {
  const Dataset data = support::quad3_dataset();
  const LossModel model = make_loss(LossKind::QuadraticL2, 0.25);
  SagaState diag(2, 3, PhiConvention::PostStep, true);
  const std::vector<std::size_t> all{0, 1, 2};
  CHECK_THROWS_AS(bias_identity_check(diag, data, model, all),
                  std::invalid_argument);
  const std::vector<std::size_t> dup{1, 1};
  CHECK_THROWS_AS(bias_identity_check(diag, data, model, dup),
                  std::invalid_argument);
  SagaState plain(2, 3, PhiConvention::PostStep, false);
  CHECK_THROWS_AS(bias_identity_check(plain, data, model, {}),
                  std::invalid_argument);
}

TEST_CASE("uniform sampling of the estimate is exactly unbiased") {
  const Dataset data = synth_logistic(9, 3, 63);
  const LossModel model = make_loss(LossKind::LogisticL2, 1.0 / 9.0);
  const FrozenEpochStart frozen = freeze_epoch_start(data, model, 0.05, 2, 30);

  RngStream rng(77);
  Vector w(3);
  for (int rep = 0; rep < 5; ++rep) {
    for (Eigen::Index j = 0; j < 3; ++j) w[j] = rng.next_gaussian();
    const Vector mean =
        uniform_estimator_mean(frozen.state, data, model, w);
    CHECK((mean - full_grad(model, w, data)).norm() <= 1e-13);
  }
}

TEST_CASE("asymptotic unbiasedness on a run pinned at the optimum") {
  Dataset d;
  d.dim = 1;
  d.samples = {support::make_sample({1.0}, +1),
               support::make_sample({1.0}, -1)};
  const LossModel model = make_loss(LossKind::QuadraticL2, 1.0);
  const ReferenceSolution ref = reference_minimizer(model, d);
  REQUIRE(ref.w_star.norm() <= 1e-14);  // labels cancel exactly

  const UnbiasednessReport report =
      asymptotic_unbiasedness_check(d, model, ref, 0.05, 6, 11, 1e-8);
  CHECK(report.status == CheckStatus::Pass);
  CHECK(report.qualifying_epochs == 5);  // first epoch has no history
  CHECK(report.max_dev == 0.0);
  CHECK(close(report.bound, 3.0 * curvature(model, d).delta * 1e-8, 1e-15));
}

TEST_CASE("asymptotic unbiasedness is inconclusive before convergence") {
  const Dataset data = synth_logistic(8, 2, 71);
  const LossModel model = make_loss(LossKind::LogisticL2, 0.125);
  const ReferenceSolution ref = reference_minimizer(model, data);
  const UnbiasednessReport report =
      asymptotic_unbiasedness_check(data, model, ref, 0.01, 3, 4, 1e-14);
  CHECK(report.status == CheckStatus::Inconclusive);
  CHECK(report.qualifying_epochs == 0);
  CHECK_THROWS_AS(
      asymptotic_unbiasedness_check(data, model, ref, 0.01, 3, 4, 0.0),
      std::invalid_argument);
}

TEST_CASE("asymptotic unbiasedness passes once the run settles") {
  const Dataset data = synth_logistic(10, 2, 83);
  const LossModel model = make_loss(LossKind::LogisticL2, 0.1);
  const ReferenceSolution ref = reference_minimizer(model, data);
  const CurvatureConstants c = curvature(model, data);
  const double mu = step_size_bound(TheoremKind::Avrg, c, 10);

  const UnbiasednessReport report = asymptotic_unbiasedness_check(
      data, model, ref, mu, 4000, 13, 1e-3 * (1.0 + ref.w_star.norm()));
  INFO("qualifying epochs: " << report.qualifying_epochs
                             << " max dev: " << report.max_dev
                             << " bound: " << report.bound);
  CHECK(report.status == CheckStatus::Pass);
  CHECK(report.qualifying_epochs > 0);
  CHECK(report.max_dev <= report.bound);
}

TEST_CASE("decay check on traces pinned at the optimum") {
  EpochTrace row;
  row.rel_mse = 0.0;
  row.a_sq = 0.0;
  row.b_sq = 0.0;
  std::vector<std::vector<EpochTrace>> per_seed{{row, row, row}};
  ReferenceSolution ref;
  ref.w_star = Vector::Constant(2, 1.0);
  CurvatureConstants c{1.0, 0.5};
  const TheoremConstants constants = theorem_constants(
      TheoremKind::SagaRR, 0.5 * step_size_bound(TheoremKind::SagaRR, c, 3),
      c, 3);

  const DecayReport report = decay_check(per_seed, 0.0, ref, constants);
  CHECK(report.asserted);
  CHECK(report.ratios_checked == 0);  // everything sits below the zero floor
  CHECK(report.ratio_ok);
  CHECK(report.envelope_ok);
}

TEST_CASE("decay check reports without asserting above the step bound") {
  EpochTrace row;
  row.rel_mse = 2.0;  // grows: would fail any contraction claim
  row.a_sq = 1.0;
  row.b_sq = 1.0;
  EpochTrace worse = row;
  worse.rel_mse = 8.0;
  std::vector<std::vector<EpochTrace>> per_seed{{row, worse}};
  ReferenceSolution ref;
  ref.w_star = Vector::Constant(2, 1.0);
  CurvatureConstants c{1.0, 0.5};
  const TheoremConstants constants = theorem_constants(
      TheoremKind::SagaRR, 4.0 * step_size_bound(TheoremKind::SagaRR, c, 3),
      c, 3);
  CHECK(constants.mu_exceeds_bound);

  const DecayReport report = decay_check(per_seed, 1.0, ref, constants);
  CHECK(!report.asserted);
  CHECK(report.energy.size() == 2);
  CHECK(report.max_ratio > 1.0);
}

TEST_CASE("decay check passes on a real reshuffled saga run") {
  const Dataset data = synth_logistic(20, 3, 91);
  const LossModel model = make_loss(LossKind::LogisticL2, 1.0 / 20.0);
  const ReferenceSolution ref = reference_minimizer(model, data);
  const CurvatureConstants c = curvature(model, data);
  const double mu = step_size_bound(TheoremKind::SagaRR, c, 20);
  const TheoremConstants constants =
      theorem_constants(TheoremKind::SagaRR, mu, c, 20);

  std::vector<std::vector<EpochTrace>> per_seed;
  double initial = 0.0;
  for (std::uint64_t k = 0; k < 60; ++k) {
    RunSpec spec;
    spec.solver = SolverKind::Saga;
    spec.mu = mu;
    spec.epochs = 50;
    spec.seed = derive_seed(4242, k);
    spec.diagnostics = true;
    RunResult r = run(spec, data, model, ref);
    initial = r.initial_rel_mse;
    per_seed.push_back(std::move(r.epochs));
  }

  const DecayReport report = decay_check(per_seed, initial, ref, constants);
  INFO("max ratio " << report.max_ratio << " vs alpha " << report.alpha);
  CHECK(report.asserted);
  CHECK(report.ratio_ok);
  CHECK(report.envelope_ok);
  CHECK(report.ratios_checked > 0);
}
