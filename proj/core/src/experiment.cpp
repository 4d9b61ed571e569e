#include "vropt/experiment.hpp"

#include "vropt/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vropt {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void validate(const ExperimentConfig& c) {
  if (c.synthetic.has_value() == !c.data_path.empty())
    throw std::invalid_argument(
        "config error: exactly one dataset source (synthetic or file) is "
        "required");
  if (c.synthetic && (c.synthetic->first == 0 || c.synthetic->second <= 0))
    throw std::invalid_argument("config error: synthetic needs n >= 1, m >= 1");
  if (c.epochs == 0)
    throw std::invalid_argument("config error: epochs must be >= 1");
  if (c.mu.has_value() == c.mu_frac.has_value())
    throw std::invalid_argument(
        "config error: exactly one of mu and mu-frac is required");
  if (c.mu && !(*c.mu > 0.0))
    throw std::invalid_argument("config error: mu must be positive");
  if (c.mu_frac && !(*c.mu_frac > 0.0))
    throw std::invalid_argument("config error: mu-frac must be positive");
  if (c.rho && !(*c.rho > 0.0))
    throw std::invalid_argument("config error: rho must be positive");
  if (!(c.ref_tol > 0.0))
    throw std::invalid_argument("config error: ref-tol must be positive");
  if (c.seed_list.empty() && c.seed_count == 0)
    throw std::invalid_argument("config error: need at least one seed");
  if (c.solver == SolverKind::Avrg &&
      c.sampling == SamplingScheme::Uniform)
    throw std::invalid_argument("AVRG requires random reshuffling");
}

bool rate_applies(const ExperimentConfig& c) {
  return (c.solver == SolverKind::Saga &&
          c.sampling == SamplingScheme::RandomReshuffling) ||
         c.solver == SolverKind::Avrg;
}

}  // namespace

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Sgd: return "sgd";
    case SolverKind::Saga: return "saga";
    case SolverKind::Svrg: return "svrg";
    case SolverKind::Avrg: return "avrg";
  }
  return "?";
}

std::string to_string(SamplingScheme scheme) {
  return scheme == SamplingScheme::RandomReshuffling ? "rr" : "uniform";
}

std::string to_string(PhiConvention convention) {
  return convention == PhiConvention::PostStep ? "post-step" : "pre-step";
}

std::string to_string(LossKind kind) {
  return kind == LossKind::LogisticL2 ? "logistic-l2" : "quadratic-l2";
}

Dataset load_dataset(const ExperimentConfig& config) {
  Dataset data = config.synthetic
                     ? synth_logistic(config.synthetic->first,
                                      config.synthetic->second,
                                      config.data_seed)
                     : parse_libsvm_file(config.data_path);
  if (config.normalize) data = normalize_unit(data);
  return data;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  return run_experiment(config, load_dataset(config));
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const Dataset& data) {
  validate(config);

  ExperimentResult result;
  result.config = config;
  result.n = data.size();
  result.m = data.dim;
  result.rho = config.rho.value_or(1.0 / static_cast<double>(data.size()));
  const LossModel model = make_loss(config.loss, result.rho);
  result.curv = curvature(model, data);

  const TheoremKind kind = config.solver == SolverKind::Avrg
                               ? TheoremKind::Avrg
                               : TheoremKind::SagaRR;
  result.mu = config.mu ? *config.mu
                        : *config.mu_frac *
                              step_size_bound(kind, result.curv, data.size());
  result.constants =
      theorem_constants(kind, result.mu, result.curv, data.size(),
                        config.variant);
  result.ref = reference_minimizer(model, data, config.ref_tol);

  std::vector<std::uint64_t> indices = config.seed_list;
  if (indices.empty()) {
    indices.resize(config.seed_count);
    for (std::size_t r = 0; r < config.seed_count; ++r) indices[r] = r;
  }

  RunSpec spec;
  spec.solver = config.solver;
  spec.sampling = config.sampling;
  spec.phi_convention = config.phi_convention;
  spec.mu = result.mu;
  spec.epochs = config.epochs;
  spec.diagnostics = config.diagnostics;

  result.per_seed.reserve(indices.size());
  for (std::uint64_t index : indices) {
    spec.seed = derive_seed(config.base_seed, index);
    RunResult run_out = run(spec, data, model, result.ref);
    result.initial_rel_mse = run_out.initial_rel_mse;
    result.initial_excess_risk = run_out.initial_excess_risk;
    result.per_seed.push_back(std::move(run_out.epochs));
  }

  const double seeds = static_cast<double>(result.per_seed.size());
  result.averaged.resize(config.epochs);
  for (std::size_t t = 0; t < config.epochs; ++t) {
    EpochTrace& avg = result.averaged[t];
    avg.epoch = t;
    avg.grad_evals = result.per_seed.front()[t].grad_evals;
    if (config.diagnostics) {
      avg.a_sq = 0.0;
      avg.b_sq = 0.0;
    }
    for (const auto& trace : result.per_seed) {
      if (trace[t].grad_evals != avg.grad_evals)
        throw std::logic_error(
            "run_experiment: gradient counters differ across seeds");
      avg.rel_mse += trace[t].rel_mse / seeds;
      avg.excess_risk += trace[t].excess_risk / seeds;
      if (config.diagnostics) {
        *avg.a_sq += *trace[t].a_sq / seeds;
        *avg.b_sq += *trace[t].b_sq / seeds;
      }
    }
  }

  if (config.diagnostics && rate_applies(config)) {
    const double wstar_sq = result.ref.w_star.squaredNorm();
    const std::vector<double> v =
        energy(result.per_seed, result.initial_rel_mse * wstar_sq, wstar_sq,
               result.constants.gamma, kind);
    for (std::size_t t = 0; t < config.epochs; ++t)
      result.averaged[t].energy = v[t];
  }

  if (config.solver == SolverKind::Svrg)
    result.notes.push_back(
        "svrg epochs cost 3N gradient evaluations as implemented (N for the "
        "snapshot refresh plus 2N inner); the 2.5N figure sometimes quoted "
        "assumes an amortized snapshot accounting this implementation does "
        "not use");
  if (config.solver == SolverKind::Saga)
    result.notes.push_back(
        config.phi_convention == PhiConvention::PostStep
            ? "saga post-step memory writes cost 2N evaluations per epoch; "
              "the pre-step convention costs N"
            : "saga pre-step memory reuses each step's gradient, costing N "
              "evaluations per epoch");
  if (result.constants.mu_exceeds_bound)
    result.notes.push_back(
        "warning: mu exceeds the step-size bound mu_max; rate constants are "
        "out of hypothesis");
  return result;
}

void emit_csv(const ExperimentResult& result, std::ostream& out) {
  const ExperimentConfig& c = result.config;
  out << "# solver=" << to_string(c.solver) << "\n";
  out << "# sampling=" << to_string(c.sampling) << "\n";
  if (c.solver == SolverKind::Saga)
    out << "# phi_convention=" << to_string(c.phi_convention) << "\n";
  out << "# loss=" << to_string(c.loss) << "\n";
  out << "# rho=" << fmt(result.rho) << "\n";
  if (c.synthetic) {
    out << "# dataset=synthetic n=" << c.synthetic->first
        << " m=" << c.synthetic->second << " seed=" << c.data_seed << "\n";
  } else {
    out << "# dataset=file path=" << c.data_path
        << " normalized=" << (c.normalize ? "yes" : "no") << "\n";
  }
  out << "# epochs=" << c.epochs << "\n";
  out << "# base_seed=" << c.base_seed << "\n";
  if (c.seed_list.empty()) {
    out << "# seed_count=" << c.seed_count << "\n";
  } else {
    out << "# seed_list=";
    for (std::size_t r = 0; r < c.seed_list.size(); ++r)
      out << (r ? "," : "") << c.seed_list[r];
    out << "\n";
  }
  out << "# mu=" << fmt(result.mu) << "\n";
  out << "# mu_max=" << fmt(result.constants.mu_max) << " rule="
      << (result.constants.kind == TheoremKind::SagaRR ? "saga-rr" : "avrg")
      << "\n";
  if (rate_applies(c)) {
    out << "# gamma=" << fmt(result.constants.gamma) << "\n";
    out << "# alpha=" << fmt(result.constants.alpha) << "\n";
  }
  out << "# delta=" << fmt(result.curv.delta) << "\n";
  out << "# nu=" << fmt(result.curv.nu) << "\n";
  out << "# ref_grad_norm=" << fmt(result.ref.grad_norm) << "\n";
  out << "# initial_rel_mse=" << fmt(result.initial_rel_mse) << "\n";
  for (const std::string& note : result.notes) out << "# note=" << note << "\n";

  out << "epoch,rel_mse,excess_risk,grad_evals,a_sq,b_sq,energy\n";
  for (const EpochTrace& row : result.averaged) {
    out << row.epoch << ',' << fmt(row.rel_mse) << ',' << fmt(row.excess_risk)
        << ',' << row.grad_evals << ',';
    if (row.a_sq) out << fmt(*row.a_sq);
    out << ',';
    if (row.b_sq) out << fmt(*row.b_sq);
    out << ',';
    if (row.energy) out << fmt(*row.energy);
    out << '\n';
  }
}

ParsedTrace parse_trace_csv(std::istream& in) {
  ParsedTrace parsed;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(line.find_first_not_of(" \t", 1));
      const auto eq = body.find('=');
      if (eq != std::string::npos)
        parsed.meta.emplace(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (!header_seen) {
      if (line != "epoch,rel_mse,excess_risk,grad_evals,a_sq,b_sq,energy")
        throw std::runtime_error("trace parse error at line " +
                                 std::to_string(line_no) +
                                 ": unexpected header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 7)
      throw std::runtime_error("trace parse error at line " +
                               std::to_string(line_no) + ": expected 7 fields");
    auto number = [&](const std::string& s) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("trace parse error at line " +
                                 std::to_string(line_no) + ": bad number '" +
                                 s + "'");
      return v;
    };
    EpochTrace row;
    row.epoch = static_cast<std::size_t>(number(fields[0]));
    row.rel_mse = number(fields[1]);
    row.excess_risk = number(fields[2]);
    row.grad_evals = static_cast<std::uint64_t>(number(fields[3]));
    if (!fields[4].empty()) row.a_sq = number(fields[4]);
    if (!fields[5].empty()) row.b_sq = number(fields[5]);
    if (!fields[6].empty()) row.energy = number(fields[6]);
    parsed.rows.push_back(row);
  }
  if (!header_seen)
    throw std::runtime_error("trace parse error: missing header row");
  return parsed;
}

}  // namespace vropt
