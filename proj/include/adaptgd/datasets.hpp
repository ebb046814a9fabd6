#pragma once

#include <cstddef>
#include <string>

#include "adaptgd/core.hpp"

namespace adaptgd {

/// Missing or unreadable dataset file; base of the ingestion errors.
class DatasetError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DatasetError {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// More than two distinct labels in a binary classification file.
class LabelError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

/// An id exceeds the declared matrix bounds.
class DimensionError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

struct LabeledData {
  Matrix A;  // dense n x d
  Vector b;  // labels in {-1, +1}
};

/// LIBSVM text, one "label idx:val idx:val ..." per line with 1-based indices.
///
/// Two distinct raw labels map, in ascending order, to -1 and +1; a single
/// label maps to +1 when positive and -1 otherwise. num_features = 0 infers d
/// from the largest index.
LabeledData load_libsvm(const std::string& path, int num_features = 0);

struct RatingsData {
  Matrix A;  // unobserved entries are 0
  std::size_t entries = 0;     // distinct (user, item) pairs
  std::size_t duplicates = 0;  // repeated (user, item) pairs; the last one wins
};

/// Tab-separated "user item rating timestamp" rows with 1-based ids.
/// rows/cols = 0 infer the size from the largest ids.
RatingsData load_movielens(const std::string& path, int rows = 943, int cols = 1682);

}  // namespace adaptgd
