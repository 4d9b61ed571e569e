// vropt: convergence experiments and verification checks from the shell.
// Exit codes: 0 success, 1 configuration or input error, 2 divergence,
// 3 verification failure.

#include <vropt/analysis.hpp>
#include <vropt/data.hpp>
#include <vropt/experiment.hpp>
#include <vropt/model.hpp>
#include <vropt/sampling.hpp>
#include <vropt/solvers.hpp>
#include <vropt/verify.hpp>

#include <CLI11.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

using namespace vropt;

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const std::map<std::string, SolverKind> kSolverNames{
    {"saga", SolverKind::Saga},
    {"svrg", SolverKind::Svrg},
    {"avrg", SolverKind::Avrg},
    {"sgd", SolverKind::Sgd}};

const std::map<std::string, SamplingScheme> kSamplingNames{
    {"rr", SamplingScheme::RandomReshuffling},
    {"uniform", SamplingScheme::Uniform}};

const std::map<std::string, PhiConvention> kPhiNames{
    {"post-step", PhiConvention::PostStep},
    {"pre-step", PhiConvention::PreStep}};

const std::map<std::string, LossKind> kLossNames{
    {"logistic-l2", LossKind::LogisticL2},
    {"quadratic-l2", LossKind::QuadraticL2}};

const std::map<std::string, ConstantVariant> kVariantNames{
    {"derived", ConstantVariant::Derived},
    {"printed", ConstantVariant::Printed}};

// Shared dataset/objective flags for `run` and `reference`.
struct DatasetCli {
  std::vector<std::uint64_t> synthetic;  // n m
  std::uint64_t data_seed = 0;
  std::string data_path;
  bool normalize = false;
  LossKind loss = LossKind::LogisticL2;
  double rho = -1.0;  // <0 means default 1/N
  double ref_tol = 1e-12;

  void attach(CLI::App* cmd) {
    cmd->add_option("--synthetic", synthetic,
                    "Synthetic logistic dataset: sample count and dimension")
        ->expected(2);
    cmd->add_option("--data", data_path, "LIBSVM file to load");
    cmd->add_option("--data-seed", data_seed,
                    "Seed for the synthetic dataset");
    cmd->add_flag("--normalize", normalize,
                  "Scale every sample to unit norm after loading");
    cmd->add_option("--loss", loss, "Objective")
        ->transform(CLI::CheckedTransformer(kLossNames));
    cmd->add_option("--rho", rho, "Ridge coefficient (default 1/N)");
    cmd->add_option("--ref-tol", ref_tol,
                    "Gradient tolerance of the reference minimizer");
  }

  void fill(ExperimentConfig& config) const {
    if (!synthetic.empty())
      config.synthetic = {static_cast<std::size_t>(synthetic[0]),
                          static_cast<Eigen::Index>(synthetic[1])};
    config.data_seed = data_seed;
    config.data_path = data_path;
    config.normalize = normalize;
    config.loss = loss;
    if (rho >= 0.0) config.rho = rho;
    config.ref_tol = ref_tol;
  }
};

int cmd_run(const DatasetCli& dataset, ExperimentConfig config,
            const std::vector<std::uint64_t>& seed_list, double mu,
            double mu_frac, const std::string& out_path) {
  dataset.fill(config);
  if (mu >= 0.0) config.mu = mu;
  if (mu_frac >= 0.0) config.mu_frac = mu_frac;
  config.seed_list = seed_list;

  const ExperimentResult result = run_experiment(config);
  if (out_path.empty()) {
    emit_csv(result, std::cout);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out)
      throw std::runtime_error("cannot open output file: " + out_path);
    emit_csv(result, out);
  }
  return 0;
}

int cmd_reference(const DatasetCli& dataset) {
  ExperimentConfig config;
  dataset.fill(config);
  const Dataset data = load_dataset(config);
  const double rho =
      dataset.rho >= 0.0 ? dataset.rho : 1.0 / static_cast<double>(data.size());
  const LossModel model = make_loss(config.loss, rho);
  const ReferenceSolution ref =
      reference_minimizer(model, data, config.ref_tol);
  const CurvatureConstants curv = curvature(model, data);

  std::cout << "n=" << data.size() << "\n";
  std::cout << "m=" << data.dim << "\n";
  std::cout << "loss=" << to_string(config.loss) << "\n";
  std::cout << "rho=" << fmt(rho) << "\n";
  std::cout << "nu=" << fmt(curv.nu) << "\n";
  std::cout << "delta=" << fmt(curv.delta) << "\n";
  std::cout << "tol=" << fmt(ref.tol) << "\n";
  std::cout << "grad_norm=" << fmt(ref.grad_norm) << "\n";
  std::cout << "risk_star=" << fmt(ref.risk_star) << "\n";
  std::cout << "w_star=";
  for (Eigen::Index j = 0; j < ref.w_star.size(); ++j) {
    if (j) std::cout << ' ';
    std::cout << fmt(ref.w_star[j]);
  }
  std::cout << "\n";
  return 0;
}

// Common scaffolding for the lemma checks: a synthetic problem and a run
// frozen at an epoch start after a short warmup.
struct FreezeCli {
  std::uint64_t n = 8;
  std::uint64_t m = 3;
  std::uint64_t data_seed = 1;
  std::uint64_t warmup = 2;
  std::uint64_t seed = 7;
  LossKind loss = LossKind::LogisticL2;
  double mu_frac = 0.5;

  void attach(CLI::App* cmd) {
    cmd->add_option("--n", n, "Sample count")->check(CLI::PositiveNumber);
    cmd->add_option("--m", m, "Feature dimension")->check(CLI::PositiveNumber);
    cmd->add_option("--data-seed", data_seed, "Synthetic dataset seed");
    cmd->add_option("--warmup", warmup, "Warmup epochs before freezing")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Stream seed");
    cmd->add_option("--loss", loss, "Objective")
        ->transform(CLI::CheckedTransformer(kLossNames));
    cmd->add_option("--mu-frac", mu_frac,
                    "Step size as a fraction of the reshuffled-saga bound");
  }

  Dataset dataset() const {
    return synth_logistic(n, static_cast<Eigen::Index>(m), data_seed);
  }

  LossModel model() const {
    return make_loss(loss, 1.0 / static_cast<double>(n));
  }

  FrozenEpochStart freeze(const Dataset& data, const LossModel& m_) const {
    const double mu =
        mu_frac * step_size_bound(TheoremKind::SagaRR, curvature(m_, data), n);
    return freeze_epoch_start(data, m_, mu, warmup, seed);
  }
};

int cmd_lemma1(const FreezeCli& freeze, std::uint64_t i, std::uint64_t trials,
               double p_floor) {
  const Dataset data = freeze.dataset();
  const LossModel model = freeze.model();
  const FrozenEpochStart frozen = freeze.freeze(data, model);
  RngStream rng(derive_seed(freeze.seed, 1));
  const Lemma1Report r = lemma1_check(frozen, data, model, i, trials, rng);

  std::cout << "memory cell distribution after " << i << " of " << freeze.n
            << " steps, " << trials << " trials\n";
  for (std::size_t k = 0; k < r.frequencies.size(); ++k)
    std::cout << "  iterate " << k + 1 << ": " << fmt(r.frequencies[k])
              << " (expected " << fmt(1.0 / static_cast<double>(freeze.n))
              << ")\n";
  std::cout << "chi_square=" << fmt(r.chi_square) << " p=" << fmt(r.p_value)
            << " floor=" << fmt(p_floor) << "\n";
  const bool ok = r.p_value > p_floor;
  std::cout << (ok ? "uniformity not rejected" : "uniformity REJECTED")
            << "\n";
  return ok ? 0 : 3;
}

int cmd_lemma2(const FreezeCli& freeze, std::uint64_t i, std::uint64_t trials,
               double tol) {
  const Dataset data = freeze.dataset();
  const LossModel model = freeze.model();
  const FrozenEpochStart frozen = freeze.freeze(data, model);
  RngStream rng(derive_seed(freeze.seed, 2));
  const MomentReport r = lemma2_check(frozen, data, model, i, trials, rng);
  std::cout << "second moment after " << i << " of " << freeze.n
            << " steps: measured=" << fmt(r.lhs) << " predicted=" << fmt(r.rhs)
            << " rel_err=" << fmt(r.rel_err) << " tol=" << fmt(tol) << "\n";
  return r.rel_err <= tol ? 0 : 3;
}

int cmd_lemma2_wr(const FreezeCli& freeze, std::uint64_t trials, double tol) {
  const Dataset data = freeze.dataset();
  const LossModel model = freeze.model();
  const FrozenEpochStart frozen = freeze.freeze(data, model);
  RngStream rng(derive_seed(freeze.seed, 3));
  const MomentReport r = lemma2_with_replacement_check(
      frozen.state, data, model, frozen.mu, trials, rng);
  std::cout << "one-step second moment (with replacement): measured="
            << fmt(r.lhs) << " predicted=" << fmt(r.rhs)
            << " rel_err=" << fmt(r.rel_err) << " tol=" << fmt(tol) << "\n";
  return r.rel_err <= tol ? 0 : 3;
}

int cmd_bias(std::uint64_t states, std::uint64_t n, std::uint64_t m,
             double tol) {
  double worst_agreement = 0.0;
  double worst_uniform = 0.0;
  RngStream rng(333);
  for (std::uint64_t rep = 0; rep < states; ++rep) {
    const Dataset data =
        synth_logistic(n, static_cast<Eigen::Index>(m), 400 + rep);
    const LossModel model = make_loss(LossKind::LogisticL2,
                                      1.0 / static_cast<double>(n));
    FrozenEpochStart frozen =
        freeze_epoch_start(data, model, 0.05, 1 + rep % 3, 500 + rep);

    const std::vector<std::size_t> order = random_permutation(rng, n);
    const std::size_t i = uniform_index(rng, n);
    saga_steps(frozen.state, data, model, order, frozen.mu, i);
    const std::vector<std::size_t> prefix(order.begin(), order.begin() + i);

    const BiasReport bias =
        bias_identity_check(frozen.state, data, model, prefix);
    worst_agreement = std::max(worst_agreement, bias.agreement_err);

    Vector w(static_cast<Eigen::Index>(m));
    for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = rng.next_gaussian();
    const Vector mean = uniform_estimator_mean(frozen.state, data, model, w);
    worst_uniform =
        std::max(worst_uniform, (mean - full_grad(model, w, data)).norm());
  }
  std::cout << "over " << states << " mid-epoch states: max agreement err="
            << fmt(worst_agreement) << ", max uniform deviation="
            << fmt(worst_uniform) << ", tol=" << fmt(tol) << "\n";
  return worst_agreement <= tol && worst_uniform <= tol ? 0 : 3;
}

int cmd_unbiased(std::uint64_t n, std::uint64_t m, std::uint64_t data_seed,
                 std::uint64_t epochs, std::uint64_t seed, double mu_frac,
                 double eps_scale) {
  const Dataset data =
      synth_logistic(n, static_cast<Eigen::Index>(m), data_seed);
  const LossModel model =
      make_loss(LossKind::LogisticL2, 1.0 / static_cast<double>(n));
  const ReferenceSolution ref = reference_minimizer(model, data);
  const double mu =
      mu_frac * step_size_bound(TheoremKind::Avrg, curvature(model, data), n);
  const double eps = eps_scale * (1.0 + ref.w_star.norm());
  const UnbiasednessReport r =
      asymptotic_unbiasedness_check(data, model, ref, mu, epochs, seed, eps);

  const char* status = r.status == CheckStatus::Pass ? "pass"
                       : r.status == CheckStatus::Fail ? "FAIL"
                                                       : "inconclusive";
  std::cout << "qualifying epochs: " << r.qualifying_epochs << " of " << epochs
            << " (eps=" << fmt(r.eps) << ")\n";
  std::cout << "estimate deviations checked: " << r.checks
            << ", max=" << fmt(r.max_dev) << ", bound=" << fmt(r.bound)
            << "\n";
  std::cout << "status: " << status << "\n";
  return r.status == CheckStatus::Pass ? 0 : 3;
}

int cmd_decay(SolverKind solver, std::uint64_t n, std::uint64_t m,
              std::uint64_t data_seed, double mu_frac, std::uint64_t epochs,
              std::uint64_t seeds, std::uint64_t base_seed,
              ConstantVariant variant) {
  ExperimentConfig config;
  config.synthetic = {static_cast<std::size_t>(n),
                      static_cast<Eigen::Index>(m)};
  config.data_seed = data_seed;
  config.solver = solver;
  config.mu_frac = mu_frac;
  config.epochs = epochs;
  config.base_seed = base_seed;
  config.seed_count = seeds;
  config.diagnostics = true;
  config.variant = variant;

  const ExperimentResult result = run_experiment(config);
  const DecayReport report = decay_check(result.per_seed,
                                         result.initial_rel_mse, result.ref,
                                         result.constants);
  if (!report.asserted) {
    std::cout << "step size mu=" << fmt(result.mu)
              << " lies outside the rate bound mu_max="
              << fmt(result.constants.mu_max)
              << "; contraction not asserted\n";
    return 0;
  }
  std::cout << "alpha=" << fmt(report.alpha) << " max_ratio="
            << fmt(report.max_ratio) << " over " << report.ratios_checked
            << " epoch pairs (slack 1.05)\n";
  std::cout << "envelope " << (report.envelope_ok ? "held" : "BROKEN")
            << ", per-epoch ratio " << (report.ratio_ok ? "held" : "BROKEN")
            << "\n";
  return report.ratio_ok && report.envelope_ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Variance-reduced stochastic optimization toolkit"};
  cli.require_subcommand(1);

  // run
  CLI::App* run_cmd =
      cli.add_subcommand("run", "Run a solver and emit a CSV trace");
  DatasetCli run_dataset;
  run_dataset.attach(run_cmd);
  ExperimentConfig run_config;
  double run_mu = -1.0;
  double run_mu_frac = -1.0;
  std::vector<std::uint64_t> run_seed_list;
  std::string run_out;
  run_cmd->add_option("--solver", run_config.solver, "Solver")
      ->transform(CLI::CheckedTransformer(kSolverNames));
  run_cmd->add_option("--sampling", run_config.sampling, "Index sampling")
      ->transform(CLI::CheckedTransformer(kSamplingNames));
  run_cmd
      ->add_option("--phi-convention", run_config.phi_convention,
                   "Which iterate saga stores per memory cell")
      ->transform(CLI::CheckedTransformer(kPhiNames));
  run_cmd->add_option("--mu", run_mu, "Step size");
  run_cmd->add_option("--mu-frac", run_mu_frac,
                      "Step size as a fraction of the solver's rate bound");
  run_cmd->add_option("--epochs", run_config.epochs, "Epoch count")
      ->required();
  run_cmd->add_option("--seeds", run_config.seed_count,
                      "Number of runs, seeded from --base-seed");
  run_cmd->add_option("--seed-list", run_seed_list,
                      "Explicit run indices (overrides --seeds)");
  run_cmd
      ->add_option("--base-seed", run_config.base_seed,
                   "Base seed for run derivation")
      ->envname("VROPT_BASE_SEED");
  run_cmd->add_flag("--diagnostics", run_config.diagnostics,
                    "Track inner iterates and energy diagnostics");
  run_cmd->add_option("--variant", run_config.variant,
                      "Rate constant variant")
      ->transform(CLI::CheckedTransformer(kVariantNames));
  run_cmd->add_option("--out", run_out, "Write the CSV here (default stdout)");

  // reference
  CLI::App* ref_cmd = cli.add_subcommand(
      "reference", "Solve for the minimizer and print its metadata");
  DatasetCli ref_dataset;
  ref_dataset.attach(ref_cmd);

  // verify
  CLI::App* verify_cmd =
      cli.add_subcommand("verify", "Statistical and exact identity checks");
  verify_cmd->require_subcommand(1);

  CLI::App* lemma1_cmd = verify_cmd->add_subcommand(
      "lemma1", "Memory cells are uniform over the previous epoch's iterates");
  FreezeCli lemma1_freeze;
  lemma1_freeze.attach(lemma1_cmd);
  std::uint64_t lemma1_i = 0;
  std::uint64_t lemma1_trials = 20000;
  double lemma1_floor = 0.001;
  lemma1_cmd->add_option("--i", lemma1_i, "Inner step to inspect")->required();
  lemma1_cmd->add_option("--trials", lemma1_trials, "Replay count");
  lemma1_cmd->add_option("--p-floor", lemma1_floor,
                         "Reject uniformity below this p-value");

  CLI::App* lemma2_cmd = verify_cmd->add_subcommand(
      "lemma2", "Second-moment identity of the reshuffled memory");
  FreezeCli lemma2_freeze;
  lemma2_freeze.attach(lemma2_cmd);
  std::uint64_t lemma2_i = 0;
  std::uint64_t lemma2_trials = 50000;
  double lemma2_tol = 0.02;
  lemma2_cmd->add_option("--i", lemma2_i, "Inner step to inspect")->required();
  lemma2_cmd->add_option("--trials", lemma2_trials, "Replay count");
  lemma2_cmd->add_option("--tol", lemma2_tol, "Relative error tolerance");

  CLI::App* lemma2wr_cmd = verify_cmd->add_subcommand(
      "lemma2-wr", "One-step second-moment identity with replacement");
  FreezeCli lemma2wr_freeze;
  lemma2wr_freeze.attach(lemma2wr_cmd);
  std::uint64_t lemma2wr_trials = 50000;
  double lemma2wr_tol = 0.02;
  lemma2wr_cmd->add_option("--trials", lemma2wr_trials, "Replay count");
  lemma2wr_cmd->add_option("--tol", lemma2wr_tol, "Relative error tolerance");

  CLI::App* bias_cmd = verify_cmd->add_subcommand(
      "bias", "Conditional mean of the reshuffled estimate, enumerated "
              "against the closed form");
  std::uint64_t bias_states = 50;
  std::uint64_t bias_n = 12;
  std::uint64_t bias_m = 4;
  double bias_tol = 1e-12;
  bias_cmd->add_option("--states", bias_states, "Mid-epoch states to sample");
  bias_cmd->add_option("--n", bias_n, "Sample count")
      ->check(CLI::PositiveNumber);
  bias_cmd->add_option("--m", bias_m, "Feature dimension")
      ->check(CLI::PositiveNumber);
  bias_cmd->add_option("--tol", bias_tol, "Agreement tolerance");

  CLI::App* unbiased_cmd = verify_cmd->add_subcommand(
      "unbiased", "Near the minimizer, avrg estimates stay within the "
                  "asymptotic deviation bound");
  std::uint64_t unb_n = 10, unb_m = 2, unb_data_seed = 83, unb_epochs = 4000,
                unb_seed = 29;
  double unb_mu_frac = 1.0, unb_eps_scale = 1e-3;
  unbiased_cmd->add_option("--n", unb_n, "Sample count")
      ->check(CLI::PositiveNumber);
  unbiased_cmd->add_option("--m", unb_m, "Feature dimension")
      ->check(CLI::PositiveNumber);
  unbiased_cmd->add_option("--data-seed", unb_data_seed,
                           "Synthetic dataset seed");
  unbiased_cmd->add_option("--epochs", unb_epochs, "Epochs to run");
  unbiased_cmd->add_option("--seed", unb_seed, "Stream seed");
  unbiased_cmd->add_option("--mu-frac", unb_mu_frac,
                           "Step size as a fraction of the avrg rate bound");
  unbiased_cmd->add_option("--eps-scale", unb_eps_scale,
                           "Qualification radius as a fraction of 1+|w*|");

  CLI::App* decay_cmd = verify_cmd->add_subcommand(
      "decay", "Per-epoch energy contraction at the given step size");
  SolverKind decay_solver = SolverKind::Saga;
  std::uint64_t decay_n = 50, decay_m = 5, decay_data_seed = 2,
                decay_epochs = 200, decay_seeds = 100, decay_base_seed = 77;
  double decay_mu_frac = 1.0;
  ConstantVariant decay_variant = ConstantVariant::Derived;
  decay_cmd->add_option("--solver", decay_solver, "saga or avrg")
      ->transform(CLI::CheckedTransformer(kSolverNames));
  decay_cmd->add_option("--n", decay_n, "Sample count")
      ->check(CLI::PositiveNumber);
  decay_cmd->add_option("--m", decay_m, "Feature dimension")
      ->check(CLI::PositiveNumber);
  decay_cmd->add_option("--data-seed", decay_data_seed,
                        "Synthetic dataset seed");
  decay_cmd->add_option("--mu-frac", decay_mu_frac,
                        "Step size as a fraction of the solver's rate bound");
  decay_cmd->add_option("--epochs", decay_epochs, "Epochs per run");
  decay_cmd->add_option("--seeds", decay_seeds, "Runs to average");
  decay_cmd->add_option("--base-seed", decay_base_seed,
                        "Base seed for run derivation");
  decay_cmd->add_option("--variant", decay_variant, "Rate constant variant")
      ->transform(CLI::CheckedTransformer(kVariantNames));

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run_cmd->parsed())
      return cmd_run(run_dataset, run_config, run_seed_list, run_mu,
                     run_mu_frac, run_out);
    if (ref_cmd->parsed()) return cmd_reference(ref_dataset);
    if (lemma1_cmd->parsed())
      return cmd_lemma1(lemma1_freeze, lemma1_i, lemma1_trials, lemma1_floor);
    if (lemma2_cmd->parsed())
      return cmd_lemma2(lemma2_freeze, lemma2_i, lemma2_trials, lemma2_tol);
    if (lemma2wr_cmd->parsed())
      return cmd_lemma2_wr(lemma2wr_freeze, lemma2wr_trials, lemma2wr_tol);
    if (bias_cmd->parsed())
      return cmd_bias(bias_states, bias_n, bias_m, bias_tol);
    if (unbiased_cmd->parsed())
      return cmd_unbiased(unb_n, unb_m, unb_data_seed, unb_epochs, unb_seed,
                          unb_mu_frac, unb_eps_scale);
    if (decay_cmd->parsed())
      return cmd_decay(decay_solver, decay_n, decay_m, decay_data_seed,
                       decay_mu_frac, decay_epochs, decay_seeds,
                       decay_base_seed, decay_variant);
  } catch (const divergence_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
