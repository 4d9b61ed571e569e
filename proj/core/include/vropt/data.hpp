#pragma once

#include "vropt/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace vropt {

struct Sample {
  Vector features;
  int label = 1;  // -1 or +1
};

struct Dataset {
  std::vector<Sample> samples;
  Eigen::Index dim = 0;

  std::size_t size() const { return samples.size(); }
};

// Reads LIBSVM text: one sample per line, "<label> <index>:<value> ...",
// 1-based strictly increasing indices, LF or CRLF endings.  The feature
// dimension is the largest index seen.  Labels may be -1/+1 or 0/1; a file
// using the 0/1 convention is mapped to -1/+1.  Malformed input throws
// std::runtime_error naming the offending line.
Dataset parse_libsvm(std::istream& in);
Dataset parse_libsvm_file(const std::string& path);

// Writes every index of every sample (zeros included) so that parsing the
// output reproduces the dataset exactly, dimension and all.
void serialize_libsvm(const Dataset& data, std::ostream& out);

// Scales each sample to unit Euclidean norm.  A zero-norm sample throws
// std::invalid_argument naming its (0-based) position.
Dataset normalize_unit(const Dataset& data);

// Synthetic logistic data, bit-reproducible given (n, m, seed): a hidden
// weight vector and the features are standard gaussian draws, features are
// unit-normalized, and each label is +1 with probability
// sigmoid(features . hidden).
Dataset synth_logistic(std::size_t n, Eigen::Index m, std::uint64_t seed);

}  // namespace vropt
