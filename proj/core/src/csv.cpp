#include "adaptsde/csv.hpp"

#include <fmt/format.h>

#include <cmath>

namespace adaptsde::csv {

std::string num(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return fmt::format("{}", value);
}

void Writer::header(std::initializer_list<std::string_view> names) {
  for (auto name : names) cell(name);
  end_row();
}

void Writer::header(const std::vector<std::string>& names) {
  for (const auto& name : names) cell(std::string_view(name));
  end_row();
}

Writer& Writer::cell(std::string_view text) {
  if (!first_) out_ << ',';
  out_ << text;
  first_ = false;
  return *this;
}

Writer& Writer::cell(double value) { return cell(std::string_view(num(value))); }

Writer& Writer::cell(long long value) { return cell(std::string_view(fmt::format("{}", value))); }

Writer& Writer::cell(unsigned long long value) {
  return cell(std::string_view(fmt::format("{}", value)));
}

void Writer::end_row() {
  out_ << '\n';
  first_ = true;
}

}  // namespace adaptsde::csv
