#include "vropt/data.hpp"

#include "vropt/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vropt {

namespace {

struct RawSample {
  double label;
  std::vector<std::pair<Eigen::Index, double>> entries;
};

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("libsvm parse error at line " +
                           std::to_string(line_no) + ": " + what);
}

double parse_number(const std::string& tok, std::size_t line_no,
                    const char* what) {
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  if (begin != end && *begin == '+') ++begin;  // from_chars rejects "+1"
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    parse_fail(line_no, std::string("bad ") + what + " '" + tok + "'");
  return value;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

Dataset parse_libsvm(std::istream& in) {
  std::vector<RawSample> raws;
  Eigen::Index max_index = 0;
  bool saw_zero_label = false;
  bool saw_negative_label = false;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::istringstream fields(line);
    std::string tok;
    fields >> tok;
    RawSample raw;
    raw.label = parse_number(tok, line_no, "label");
    if (raw.label != -1.0 && raw.label != 0.0 && raw.label != 1.0)
      parse_fail(line_no, "label must be -1, 0, or +1, got '" + tok + "'");
    saw_zero_label = saw_zero_label || raw.label == 0.0;
    saw_negative_label = saw_negative_label || raw.label == -1.0;

    Eigen::Index prev_index = 0;
    while (fields >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        parse_fail(line_no, "expected index:value, got '" + tok + "'");
      const double idx_val =
          parse_number(tok.substr(0, colon), line_no, "feature index");
      if (idx_val < 1.0 || idx_val != std::floor(idx_val))
        parse_fail(line_no, "feature index must be a positive integer, got '" +
                                tok.substr(0, colon) + "'");
      const Eigen::Index index = static_cast<Eigen::Index>(idx_val);
      if (index <= prev_index)
        parse_fail(line_no, "feature indices must be strictly increasing");
      const double value =
          parse_number(tok.substr(colon + 1), line_no, "feature value");
      raw.entries.emplace_back(index, value);
      prev_index = index;
    }
    max_index = std::max(max_index, prev_index);
    raws.push_back(std::move(raw));
  }

  if (raws.empty()) throw std::runtime_error("libsvm parse error: empty input");
  if (saw_zero_label && saw_negative_label)
    throw std::runtime_error(
        "libsvm parse error: file mixes 0/1 and -1/+1 label conventions");

  Dataset data;
  data.dim = max_index;
  data.samples.reserve(raws.size());
  for (const RawSample& raw : raws) {
    Sample s;
    s.features = Vector::Zero(max_index);
    for (const auto& [index, value] : raw.entries)
      s.features[index - 1] = value;
    // A pure 0/1 file is mapped onto the -1/+1 convention used everywhere else.
    if (saw_zero_label)
      s.label = raw.label == 0.0 ? -1 : 1;
    else
      s.label = raw.label < 0.0 ? -1 : 1;
    data.samples.push_back(std::move(s));
  }
  return data;
}

Dataset parse_libsvm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  return parse_libsvm(in);
}

void serialize_libsvm(const Dataset& data, std::ostream& out) {
  std::string line;
  for (const Sample& s : data.samples) {
    line.clear();
    line += s.label > 0 ? "+1" : "-1";
    for (Eigen::Index j = 0; j < s.features.size(); ++j) {
      line += ' ';
      line += std::to_string(j + 1);
      line += ':';
      append_double(line, s.features[j]);
    }
    line += '\n';
    out << line;
  }
}

Dataset normalize_unit(const Dataset& data) {
  Dataset out;
  out.dim = data.dim;
  out.samples.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double norm = data.samples[i].features.norm();
    if (norm == 0.0)
      throw std::invalid_argument("normalize_unit: sample " +
                                  std::to_string(i) + " has zero norm");
    out.samples.push_back(
        {data.samples[i].features / norm, data.samples[i].label});
  }
  return out;
}

Dataset synth_logistic(std::size_t n, Eigen::Index m, std::uint64_t seed) {
  if (n == 0 || m <= 0)
    throw std::invalid_argument("synth_logistic: need n >= 1 and m >= 1");
  RngStream rng(seed);

  Vector hidden(m);
  for (Eigen::Index j = 0; j < m; ++j) hidden[j] = rng.next_gaussian();

  Dataset data;
  data.dim = m;
  data.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.features = Vector(m);
    for (Eigen::Index j = 0; j < m; ++j) s.features[j] = rng.next_gaussian();
    const double norm = s.features.norm();
    if (norm > 0.0) s.features /= norm;
    else s.features[0] = 1.0;
    const double z = s.features.dot(hidden);
    const double p_positive = 1.0 / (1.0 + std::exp(-z));
    s.label = rng.next_double() < p_positive ? 1 : -1;
    data.samples.push_back(std::move(s));
  }
  return data;
}

}  // namespace vropt
