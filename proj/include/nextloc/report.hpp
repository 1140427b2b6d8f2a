// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nextloc/eval.hpp"
#include "nextloc/fileio.hpp"

namespace nextloc {

/// Fixed six-decimal rendering used in every CSV and JSON number we emit.
std::string format_metric(double v);

/// One row per (report, run): model,dataset,shots,C,H,run,acc1,acc3,acc5,n,empty_count,halluc_count.
/// The acc columns follow `ks`; an absent value is an empty cell.
std::string reports_to_csv(const std::vector<EvalReport>& reports, const std::vector<std::size_t>& ks = kDefaultKs);

/// Parses what reports_to_csv wrote back into reports (runs only; call aggregate()).
std::vector<EvalReport> reports_from_csv(const std::string& csv);

Json report_to_json(const EvalReport& report);
Json attribution_to_json(const AttributionReport& a);
Json ablation_to_json(const AblationReport& a);

/// Mean ACC@k per model, one bar per shots setting (zero purple, one dark
/// blue, few light blue), with +/- one SD whiskers.
std::string grouped_bar_svg(const std::vector<EvalReport>& reports, std::size_t k = 5);

/// Relative change of each non-default arm against C=6,H=15, one bar per series.
std::string relative_change_svg(const std::vector<std::pair<std::string, AblationReport>>& series, std::size_t k = 5);

/// Human-readable rendering of a report for stdout.
std::string report_summary_text(const EvalReport& report);

}  // namespace nextloc
