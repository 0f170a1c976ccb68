#pragma once

#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace adaptsde::csv {

/// Shortest round-trip representation; stable across runs and platforms.
std::string num(double value);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void header(std::initializer_list<std::string_view> names);
  void header(const std::vector<std::string>& names);

  Writer& cell(std::string_view text);
  Writer& cell(double value);
  Writer& cell(long long value);
  Writer& cell(unsigned long long value);
  Writer& cell(int value) { return cell(static_cast<long long>(value)); }
  Writer& cell(std::size_t value) { return cell(static_cast<unsigned long long>(value)); }
  void end_row();

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace adaptsde::csv
