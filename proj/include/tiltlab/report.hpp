#pragma once

#include <map>
#include <string>

#include "tiltlab/measures.hpp"

namespace tiltlab {

// The eleven standing inequality checks.
enum class CheckName {
  LogSobolev,                 // kl <= fisher/2
  ReverseLsiFractional,       // fisher/2 <= kl + m_plus/2 + width^(2/3) fisher^(1/3)
  ReverseLsiAdditive,         // fisher/2 <= kl + m + width
  TransportIntermediate,      // fisher/2 <= m + width + w2_sq/2
  Talagrand,                  // w2_sq/2 <= kl
  ReverseTransport,           // kl <= w2_sq/2 + m + width
  Vitale,                     // log int e^Z dgamma <= width
  SecondMomentBound,          // int <x, grad f> dnu <= 2 kl + width
  EntropyWidthBound,          // entropy gap <= width/2
  ReverseLsiHalvedLaplacian,  // fisher/2 <= kl - laplacian_mean/2 + width/2
  ReverseLsiFullLaplacian,    // fisher/2 <= kl - laplacian_mean + width
};

inline constexpr int kCheckCount = 11;

const char* check_name_str(CheckName c);
CheckName parse_check_name(const std::string& s);

enum class Verdict { Holds, Fails, NotApplicable };

const char* verdict_str(Verdict v);

struct InequalityReport {
  CheckName name = CheckName::LogSobolev;
  std::string instance;
  Estimate lhs;
  Estimate rhs;
  std::map<std::string, Estimate> terms;
  double margin = 0.0;     // rhs - lhs
  double margin_se = 0.0;  // combined standard error of the margin
  double bias_allowance = 0.0;
  Verdict verdict = Verdict::NotApplicable;
  std::string note;  // tolerance policy snapshot / applicability notes
};

// HOLDS iff margin >= -(3 * combined SE + bias allowance).
Verdict verdict_from_margin(double margin, double margin_se, double bias_allowance);

}  // namespace tiltlab
