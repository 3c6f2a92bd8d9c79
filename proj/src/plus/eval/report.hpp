#pragma once

#include <filesystem>

#include "plus/eval/metrics.hpp"

namespace plus::eval {

// Report files: metrics.json (full report), metrics.csv (one flat row in the
// fixed column order below), roc.tsv (screening ROC points).

extern const char* kCsvHeader;

std::string report_to_json(const MetricsReport& rep, const std::string& label);
std::string report_to_csv_row(const MetricsReport& rep, const std::string& label);

void write_report_files(const std::filesystem::path& dir, const MetricsReport& rep,
                        const std::string& label);

}  // namespace plus::eval
