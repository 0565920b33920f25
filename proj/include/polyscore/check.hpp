#pragma once

#include <string>
#include <vector>

namespace polyscore {

/// One audited inequality: `holds` records whether lhs <= rhs (or whatever
/// relation the named check asserts); both sides are kept for the report.
struct Check {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline bool all_hold(const std::vector<Check>& checks) {
  for (const auto& c : checks) {
    if (!c.holds) return false;
  }
  return true;
}

}  // namespace polyscore
