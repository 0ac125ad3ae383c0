#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "twr/autodiff.hpp"

namespace twr {

/// Ordered, named collection of trainable matrices.
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const { return values_.size(); }
  std::size_t index(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::string& name(std::size_t i) const { return names_[i]; }

  Matrix& operator[](std::size_t i) { return values_[i]; }
  const Matrix& operator[](std::size_t i) const { return values_[i]; }
  Matrix& operator[](std::string_view name) { return values_[index(name)]; }
  const Matrix& operator[](std::string_view name) const {
    return values_[index(name)];
  }

  std::span<Matrix> values() { return values_; }
  std::span<const Matrix> values() const { return values_; }

  /// Register every parameter as a leaf, in order.
  std::vector<Var> bind(Tape& tape) const;

  std::size_t scalar_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

}  // namespace twr
