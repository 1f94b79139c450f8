#pragma once

#include <stdexcept>
#include <string>

namespace nvreg {

enum class Errc {
  weak_field_violation,
  empty_register,
  index_out_of_range,
  dimension_mismatch,
  non_hermitian,
  too_close,
  coincident_sites,
  unreachable_coefficient,
  even_harmonic,
  overlapping_pulses,
  non_hermitian_segment,
  no_pair_designated,
  unsolvable,
  plan_unsolved,
  not_normalized,
  state_outside_dfs,
  too_many_nodes,
  config_parse,
  invalid_argument,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::weak_field_violation: return "WeakFieldViolation";
    case Errc::empty_register: return "EmptyRegister";
    case Errc::index_out_of_range: return "IndexOutOfRange";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::non_hermitian: return "NonHermitian";
    case Errc::too_close: return "TooClose";
    case Errc::coincident_sites: return "CoincidentSites";
    case Errc::unreachable_coefficient: return "UnreachableCoefficient";
    case Errc::even_harmonic: return "EvenHarmonic";
    case Errc::overlapping_pulses: return "OverlappingPulses";
    case Errc::non_hermitian_segment: return "NonHermitianSegment";
    case Errc::no_pair_designated: return "NoPairDesignated";
    case Errc::unsolvable: return "Unsolvable";
    case Errc::plan_unsolved: return "PlanUnsolved";
    case Errc::not_normalized: return "NotNormalized";
    case Errc::state_outside_dfs: return "StateOutsideDFS";
    case Errc::too_many_nodes: return "TooManyNodes";
    case Errc::config_parse: return "ConfigParse";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace nvreg
