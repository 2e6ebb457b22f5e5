#pragma once

#include <stdexcept>
#include <string>

namespace ecl {

// The three calibration notions the losses and metrics support.
enum class Paradigm { kCanonical, kTopLabel, kClassWise };

inline std::string to_string(Paradigm p) {
  switch (p) {
    case Paradigm::kCanonical: return "canonical";
    case Paradigm::kTopLabel: return "top-label";
    case Paradigm::kClassWise: return "class-wise";
  }
  return "?";
}

inline Paradigm paradigm_from_string(const std::string& s) {
  if (s == "canonical") return Paradigm::kCanonical;
  if (s == "top-label") return Paradigm::kTopLabel;
  if (s == "class-wise") return Paradigm::kClassWise;
  throw std::invalid_argument("unknown paradigm: " + s);
}

}  // namespace ecl
