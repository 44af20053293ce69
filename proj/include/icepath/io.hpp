#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "icepath/estimators.hpp"

namespace icepath::io {

/// 17 significant digits, enough to round-trip a double.
std::string fmt(double x);

inline constexpr const char* kTrialHeader = "l0,a,l1,d1,r1,l2,d2,r2,y";
inline constexpr const char* kSingleHeader = "l0,a,l1,r,d,y,d_a_r0,d_a_r1,y_a_r0_d0,y_a_r0_d1";

void write_trial_csv(std::ostream& out, std::span<const sim::TrialRecord> rows);
void write_single_csv(std::ostream& out, std::span<const sim::SinglePeriodRecord> rows);

/// Reads either layout, chosen by the header line. A single-visit file may
/// stop after the factual columns (l0,a,l1,r,d,y).
est::Dataset read_dataset(std::istream& in);
est::Dataset read_dataset_file(const std::string& path);

} // namespace icepath::io
