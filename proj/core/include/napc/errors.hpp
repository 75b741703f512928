#pragma once

#include <stdexcept>
#include <string>

namespace napc {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed, inconsistent or missing input data (stores, model files, CSV).
class DataError : public Error {
public:
  explicit DataError(const std::string& what) : Error(what) {}
};

/// Non-finite values, divergence or integer overflow during computation.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

/// The greedy scale search ran out of draws for one layer.
class QuantizeExhausted : public Error {
public:
  QuantizeExhausted(const std::string& what, int layer)
      : Error(what), layer_index(layer) {}
  int layer_index;
};

}  // namespace napc
