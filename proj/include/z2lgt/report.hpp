#pragma once

#include "z2lgt/complex.hpp"
#include "z2lgt/forms.hpp"

#include <json.hpp>

#include <sstream>
#include <string>

namespace z2lgt {

/// Outcome of one verification: both sides as text, a scalar metric, and the verdict.
struct CheckRecord {
  std::string check;
  std::string complex;
  std::string gamma;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  std::string lhs;
  std::string rhs;
  double metric = 0;
  bool pass = false;
  std::string note;
};

inline void to_json(nlohmann::ordered_json& j, const CheckRecord& r) {
  j = nlohmann::ordered_json{{"check", r.check}, {"complex", r.complex}, {"gamma", r.gamma}, {"params", r.params},
                             {"lhs", r.lhs},     {"rhs", r.rhs},         {"metric", r.metric}, {"pass", r.pass}};
  if (!r.note.empty()) j["note"] = r.note;
}

inline std::string describe(const CellComplex& cx) {
  std::ostringstream os;
  os << "m=" << cx.dimension() << " extents=[";
  for (std::size_t i = 0; i < cx.extents().size(); ++i) os << (i ? "," : "") << cx.extents()[i];
  os << "]";
  return os.str();
}

/// Edge support of a loop as "{e1,e2,...}", the mod-2 content the model sees.
inline std::string describe(const Loop& gamma) {
  std::ostringstream os;
  os << "{";
  bool first = true;
  for (auto e : gamma.support().indices()) {
    os << (first ? "" : ",") << e;
    first = false;
  }
  os << "}";
  return os.str();
}

}  // namespace z2lgt
