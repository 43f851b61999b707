#include "truncgen/errors.hpp"

namespace truncgen {

namespace {
std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}
}  // namespace

DanglingVerdicts::DanglingVerdicts(std::vector<std::string> ids)
    : std::runtime_error("verdicts reference unknown image ids: " + join_ids(ids)), ids_(std::move(ids)) {}

}  // namespace truncgen
