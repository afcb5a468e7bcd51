#include "tiltlab/report.hpp"

#include "tiltlab/errors.hpp"

namespace tiltlab {

const char* check_name_str(CheckName c) {
  switch (c) {
    case CheckName::LogSobolev: return "log_sobolev";
    case CheckName::ReverseLsiFractional: return "reverse_lsi_fractional";
    case CheckName::ReverseLsiAdditive: return "reverse_lsi_additive";
    case CheckName::TransportIntermediate: return "transport_intermediate";
    case CheckName::Talagrand: return "talagrand";
    case CheckName::ReverseTransport: return "reverse_transport";
    case CheckName::Vitale: return "vitale";
    case CheckName::SecondMomentBound: return "second_moment_bound";
    case CheckName::EntropyWidthBound: return "entropy_width_bound";
    case CheckName::ReverseLsiHalvedLaplacian: return "reverse_lsi_halved_laplacian";
    case CheckName::ReverseLsiFullLaplacian: return "reverse_lsi_full_laplacian";
  }
  return "?";
}

CheckName parse_check_name(const std::string& s) {
  for (int i = 0; i < kCheckCount; ++i) {
    const CheckName c = static_cast<CheckName>(i);
    if (s == check_name_str(c)) return c;
  }
  throw ParameterError("unknown check name: " + s);
}

const char* verdict_str(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "HOLDS";
    case Verdict::Fails: return "FAILS";
    case Verdict::NotApplicable: return "NOT_APPLICABLE";
  }
  return "?";
}

Verdict verdict_from_margin(double margin, double margin_se, double bias_allowance) {
  return margin >= -(3.0 * margin_se + bias_allowance) ? Verdict::Holds
                                                       : Verdict::Fails;
}

}  // namespace tiltlab
