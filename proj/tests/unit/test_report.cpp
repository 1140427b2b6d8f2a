// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "nextloc/report.hpp"

using namespace nextloc;

namespace {

EvalReport sample(std::string model, std::string shots, std::vector<double> acc5) {
    EvalReport r;
    r.model = std::move(model);
    r.dataset = "syn";
    r.shots = std::move(shots);
    int run = 1;
    for (double a : acc5) {
        RunReport rr;
        rr.run_index = run++;
        rr.acc = {{1, a / 2}, {3, std::nullopt}, {5, a}};
        rr.n = 100;
        rr.empty_count = 3;
        rr.halluc_count = 2;
        r.runs.push_back(rr);
    }
    r.aggregate();
    return r;
}

}  // namespace

TEST_CASE("metric formatting") {
    CHECK(format_metric(0.5) == "0.500000");
    CHECK(format_metric(1.0 / 3) == "0.333333");
}

TEST_CASE("csv round trip keeps runs and empty cells") {
    const std::vector<EvalReport> reports = {sample("gpt-4o", "zero", {0.3, 0.4, 0.5}), sample("llama", "few", {0.2})};
    const auto csv = reports_to_csv(reports);
    CHECK(csv.rfind("model,dataset,shots,C,H,run,acc1,acc3,acc5,n,empty_count,halluc_count\n", 0) == 0);
    CHECK(csv.find("gpt-4o,syn,zero,6,15,1,0.150000,,0.300000,100,3,2\n") != std::string::npos);
    auto back = reports_from_csv(csv);
    REQUIRE(back.size() == 2);
    for (auto& b : back) b.aggregate();
    CHECK(reports_to_csv(back) == csv);
    CHECK(*back[0].mean(5) == doctest::Approx(0.4));
    CHECK_FALSE(back[0].runs[0].acc.at(3));
    CHECK(back[1].aggregates.at(5)->single_run);
}

TEST_CASE("json views") {
    const auto j = report_to_json(sample("m", "one", {0.2, 0.4}));
    CHECK(j["model"] == "m");
    CHECK(j.dump().find("acc") != std::string::npos);
    AttributionReport a{1, 1, 1, 1};
    CHECK(attribution_to_json(a).dump().find("both") != std::string::npos);
}

TEST_CASE("svg figures are well formed") {
    const std::vector<EvalReport> reports = {sample("a", "zero", {0.3, 0.4}), sample("a", "one", {0.35}),
                                             sample("a", "few", {0.5, 0.45})};
    const auto bars = grouped_bar_svg(reports);
    CHECK(bars.rfind("<svg", 0) == 0);
    CHECK(bars.find("</svg>") != std::string::npos);
    CHECK(bars.find("<rect") != std::string::npos);

    AblationReport ab;
    for (const auto& arm : default_arms()) {
        ArmResult ar;
        ar.arm = arm;
        ar.report = sample("a", "zero", {arm.is_default() ? 0.4 : 0.3});
        ab.arms.push_back(ar);
    }
    attach_relative_changes(ab);
    const auto rel = relative_change_svg({{"a", ab}});
    CHECK(rel.rfind("<svg", 0) == 0);
    CHECK(rel.find("</svg>") != std::string::npos);
    CHECK(report_summary_text(reports[0]).find("a") != std::string::npos);
}
