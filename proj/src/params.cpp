#include "twr/params.hpp"

#include <stdexcept>

namespace twr {

std::size_t ParameterSet::add(std::string name, Matrix value) {
  if (contains(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParameterSet::index(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

std::vector<Var> ParameterSet::bind(Tape& tape) const {
  std::vector<Var> out;
  out.reserve(values_.size());
  for (const Matrix& m : values_) out.push_back(tape.leaf(m));
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Matrix& m : values_) n += static_cast<std::size_t>(m.size());
  return n;
}

}  // namespace twr
