#pragma once

#include <string>

#include "hetbounds/pipeline.hpp"
#include "hetbounds/studies.hpp"

namespace hb::io {

// Fixed %.10g formatting everywhere so reruns are byte-identical.
std::string format_double(double v);

void write_curves_csv(const std::string& path, const pipeline::EstimateResult& result);
void write_intervals_csv(const std::string& path, const pipeline::EstimateResult& result);
void write_bands_csv(const std::string& path, const pipeline::EstimateResult& result);
void write_coverage_csv(const std::string& path, const studies::CoverageResult& result);
void write_power_csv(const std::string& path, const studies::PowerResult& result);

}  // namespace hb::io
