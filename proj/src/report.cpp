// SPDX-License-Identifier: Apache-2.0
#include "nextloc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "nextloc/error.hpp"

namespace nextloc {
namespace {

const char* kZeroColour = "#7b2d8e";
const char* kOneColour = "#1f3a93";
const char* kFewColour = "#74b3e8";

std::string num(double v, int decimals = 1) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out.push_back(c);
    }
    return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back().push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back().push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back().push_back(c);
        }
    }
    return out;
}

Json optional_metric(const std::optional<double>& v) { return v ? Json(std::round(*v * 1e6) / 1e6) : Json(nullptr); }

struct SvgCanvas {
    SvgCanvas(double w, double h) : width(w), height(h) {}

    double width, height, left = 70, right = 20, top = 40, bottom = 90;
    std::ostringstream body;

    double plot_w() const { return width - left - right; }
    double plot_h() const { return height - top - bottom; }
};

std::string svg_open(const SvgCanvas& c, const std::string& title) {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(c.width, 0) << "\" height=\"" << num(c.height, 0)
      << "\" viewBox=\"0 0 " << num(c.width, 0) << ' ' << num(c.height, 0) << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << num(c.width / 2) << "\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">" << xml_escape(title)
      << "</text>\n";
    return o.str();
}

}  // namespace

std::string format_metric(double v) { return num(v, 6); }

std::string reports_to_csv(const std::vector<EvalReport>& reports, const std::vector<std::size_t>& ks) {
    std::ostringstream o;
    o << "model,dataset,shots,C,H,run";
    for (auto k : ks) o << ",acc" << k;
    o << ",n,empty_count,halluc_count\n";
    for (const auto& r : reports) {
        for (const auto& run : r.runs) {
            o << csv_field(r.model) << ',' << csv_field(r.dataset) << ',' << csv_field(r.shots) << ',' << r.context
              << ',' << r.history << ',' << run.run_index;
            for (auto k : ks) {
                o << ',';
                const auto it = run.acc.find(k);
                if (it != run.acc.end() && it->second) o << format_metric(*it->second);
            }
            o << ',' << run.n << ',' << run.empty_count << ',' << run.halluc_count << '\n';
        }
    }
    return o.str();
}

std::vector<EvalReport> reports_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV");
    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* need : {"model", "dataset", "shots", "C", "H", "run", "n", "empty_count", "halluc_count"}) {
        if (!col.count(need)) throw DataError(std::string("CSV is missing column ") + need);
    }
    std::vector<std::size_t> ks;
    for (const auto& h : header) {
        if (h.rfind("acc", 0) == 0 && h.size() > 3) ks.push_back(std::stoul(h.substr(3)));
    }

    std::vector<EvalReport> out;
    std::map<std::string, std::size_t> index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) throw DataError("CSV line " + std::to_string(line_no) + " has wrong field count");
        const std::string key = f[col["model"]] + '\x1f' + f[col["dataset"]] + '\x1f' + f[col["shots"]] + '\x1f' +
                                f[col["C"]] + '\x1f' + f[col["H"]];
        auto [it, fresh] = index.emplace(key, out.size());
        if (fresh) {
            EvalReport r;
            r.model = f[col["model"]];
            r.dataset = f[col["dataset"]];
            r.shots = f[col["shots"]];
            r.context = std::stoul(f[col["C"]]);
            r.history = std::stoul(f[col["H"]]);
            out.push_back(std::move(r));
        }
        RunReport run;
        run.run_index = std::stoi(f[col["run"]]);
        for (auto k : ks) {
            const auto& cell = f[col["acc" + std::to_string(k)]];
            run.acc[k] = cell.empty() ? std::nullopt : std::optional<double>(std::stod(cell));
        }
        run.n = std::stoul(f[col["n"]]);
        run.empty_count = std::stoul(f[col["empty_count"]]);
        run.halluc_count = std::stoul(f[col["halluc_count"]]);
        out[it->second].runs.push_back(std::move(run));
    }
    return out;
}

Json report_to_json(const EvalReport& report) {
    Json runs = Json::array();
    for (const auto& run : report.runs) {
        Json acc = Json::object();
        for (const auto& [k, v] : run.acc) acc["acc" + std::to_string(k)] = optional_metric(v);
        runs.push_back({{"run", run.run_index},
                        {"acc", acc},
                        {"n", run.n},
                        {"parseable", run.parseable},
                        {"empty_count", run.empty_count},
                        {"halluc_count", run.halluc_count},
                        {"failed_count", run.failed_count}});
    }
    Json agg = Json::object();
    for (const auto& [k, a] : report.aggregates) {
        const auto key = "acc" + std::to_string(k);
        if (!a) {
            agg[key] = nullptr;
            continue;
        }
        agg[key] = {{"mean", optional_metric(a->mean)}, {"sd", optional_metric(a->sd)}, {"runs", a->runs},
                    {"single_run", a->single_run}};
    }
    return {{"model", report.model}, {"dataset", report.dataset}, {"shots", report.shots}, {"C", report.context},
            {"H", report.history},   {"runs", runs},              {"aggregate", agg}};
}

Json attribution_to_json(const AttributionReport& a) {
    Json j = {{"both", a.both}, {"history_only", a.history_only}, {"context_only", a.context_only},
              {"neither", a.neither}, {"correct", a.total()}};
    if (const auto f = a.fractions()) {
        j["fractions"] = {{"both", optional_metric((*f)[0])},
                          {"history_only", optional_metric((*f)[1])},
                          {"context_only", optional_metric((*f)[2])},
                          {"neither", optional_metric((*f)[3])}};
    } else {
        j["fractions"] = nullptr;
    }
    return j;
}

Json ablation_to_json(const AblationReport& a) {
    Json arms = Json::array();
    for (const auto& arm : a.arms) {
        Json rel = Json::object();
        for (const auto& [k, v] : arm.relative) rel["acc" + std::to_string(k)] = optional_metric(v);
        arms.push_back({{"arm", arm.arm.label()},
                        {"C", arm.arm.context},
                        {"H", arm.arm.history},
                        {"default", arm.arm.is_default()},
                        {"report", report_to_json(arm.report)},
                        {"relative_change", rel}});
    }
    return {{"arms", arms}};
}

std::string grouped_bar_svg(const std::vector<EvalReport>& reports, std::size_t k) {
    std::vector<std::string> models;
    std::map<std::string, std::map<std::string, const EvalReport*>> cells;
    for (const auto& r : reports) {
        if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
        cells[r.model][r.shots] = &r;
    }
    const std::vector<std::pair<std::string, const char*>> shots = {
        {"zero", kZeroColour}, {"one", kOneColour}, {"few", kFewColour}};

    double ymax = 0.1;
    for (const auto& r : reports) {
        const auto it = r.aggregates.find(k);
        if (it != r.aggregates.end() && it->second) ymax = std::max(ymax, it->second->mean + it->second->sd);
    }
    ymax = std::min(1.0, std::ceil(ymax * 10) / 10);

    SvgCanvas c(std::max(360.0, 100.0 + 110.0 * static_cast<double>(models.size())), 380);
    std::ostringstream& b = c.body;
    const double base = c.top + c.plot_h();
    const auto y_of = [&](double v) { return base - v / ymax * c.plot_h(); };

    for (int t = 0; t <= 5; ++t) {
        const double v = ymax * t / 5;
        b << "<line x1=\"" << num(c.left) << "\" x2=\"" << num(c.left + c.plot_w()) << "\" y1=\"" << num(y_of(v))
          << "\" y2=\"" << num(y_of(v)) << "\" stroke=\"#dddddd\"/>\n"
          << "<text x=\"" << num(c.left - 6) << "\" y=\"" << num(y_of(v) + 4)
          << "\" font-size=\"11\" text-anchor=\"end\">" << num(v, 2) << "</text>\n";
    }
    b << "<text x=\"16\" y=\"" << num(c.top + c.plot_h() / 2) << "\" font-size=\"12\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 16 " << num(c.top + c.plot_h() / 2) << ")\">ACC@" << k << "</text>\n";

    const double group_w = models.empty() ? c.plot_w() : c.plot_w() / static_cast<double>(models.size());
    const double bar_w = std::min(28.0, group_w / 4);
    for (std::size_t m = 0; m < models.size(); ++m) {
        const double gx = c.left + group_w * static_cast<double>(m) + group_w / 2;
        for (std::size_t s = 0; s < shots.size(); ++s) {
            const auto found = cells[models[m]].find(shots[s].first);
            if (found == cells[models[m]].end()) continue;
            const auto it = found->second->aggregates.find(k);
            if (it == found->second->aggregates.end() || !it->second) continue;
            const auto& a = *it->second;
            const double x = gx + (static_cast<double>(s) - 1.5) * bar_w;
            b << "<rect x=\"" << num(x) << "\" y=\"" << num(y_of(a.mean)) << "\" width=\"" << num(bar_w - 2)
              << "\" height=\"" << num(base - y_of(a.mean)) << "\" fill=\"" << shots[s].second << "\"><title>"
              << xml_escape(models[m]) << ' ' << shots[s].first << "-shot: " << num(a.mean, 3) << "</title></rect>\n";
            if (a.sd > 0) {
                const double cx = x + (bar_w - 2) / 2;
                b << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\"" << num(y_of(a.mean + a.sd))
                  << "\" y2=\"" << num(y_of(std::max(0.0, a.mean - a.sd))) << "\" stroke=\"black\"/>\n";
            }
        }
        b << "<text x=\"" << num(gx) << "\" y=\"" << num(base + 16) << "\" font-size=\"11\" text-anchor=\"end\" "
          << "transform=\"rotate(-30 " << num(gx) << ' ' << num(base + 16) << ")\">" << xml_escape(models[m])
          << "</text>\n";
    }
    b << "<line x1=\"" << num(c.left) << "\" x2=\"" << num(c.left + c.plot_w()) << "\" y1=\"" << num(base)
      << "\" y2=\"" << num(base) << "\" stroke=\"black\"/>\n";

    double lx = c.left;
    for (const auto& [name, colour] : shots) {
        b << "<rect x=\"" << num(lx) << "\" y=\"" << num(c.height - 22) << "\" width=\"12\" height=\"12\" fill=\""
          << colour << "\"/><text x=\"" << num(lx + 16) << "\" y=\"" << num(c.height - 12) << "\" font-size=\"11\">"
          << name << "-shot</text>\n";
        lx += 90;
    }
    return svg_open(c, "ACC@" + std::to_string(k) + " by model and prompt") + b.str() + "</svg>\n";
}

std::string relative_change_svg(const std::vector<std::pair<std::string, AblationReport>>& series, std::size_t k) {
    std::vector<AblationArm> arms;
    for (const auto& [name, rep] : series) {
        for (const auto& a : rep.arms) {
            if (!a.arm.is_default() && std::find(arms.begin(), arms.end(), a.arm) == arms.end()) arms.push_back(a.arm);
        }
    }
    double extent = 0.1;
    for (const auto& [name, rep] : series) {
        for (const auto& a : rep.arms) {
            const auto it = a.relative.find(k);
            if (it != a.relative.end() && it->second) extent = std::max(extent, std::abs(*it->second));
        }
    }
    extent = std::ceil(extent * 10) / 10;

    static const char* palette[] = {"#1f3a93", "#e67e22", "#27ae60", "#c0392b", "#7b2d8e", "#74b3e8", "#7f8c8d"};
    SvgCanvas c(std::max(420.0, 100.0 + 90.0 * static_cast<double>(arms.size())), 400);
    std::ostringstream& b = c.body;
    const double mid = c.top + c.plot_h() / 2;
    const auto y_of = [&](double v) { return mid - v / extent * (c.plot_h() / 2); };

    for (int t = -4; t <= 4; ++t) {
        const double v = extent * t / 4;
        b << "<line x1=\"" << num(c.left) << "\" x2=\"" << num(c.left + c.plot_w()) << "\" y1=\"" << num(y_of(v))
          << "\" y2=\"" << num(y_of(v)) << "\" stroke=\"" << (t == 0 ? "black" : "#dddddd") << "\"/>\n"
          << "<text x=\"" << num(c.left - 6) << "\" y=\"" << num(y_of(v) + 4)
          << "\" font-size=\"11\" text-anchor=\"end\">" << num(v * 100, 0) << "%</text>\n";
    }

    const double group_w = arms.empty() ? c.plot_w() : c.plot_w() / static_cast<double>(arms.size());
    const double bar_w = std::min(22.0, group_w / (static_cast<double>(series.size()) + 1));
    for (std::size_t a = 0; a < arms.size(); ++a) {
        const double gx = c.left + group_w * static_cast<double>(a) + group_w / 2;
        for (std::size_t s = 0; s < series.size(); ++s) {
            const auto* arm = series[s].second.find(arms[a]);
            if (!arm) continue;
            const auto it = arm->relative.find(k);
            if (it == arm->relative.end() || !it->second) continue;
            const double v = *it->second;
            const double x = gx + (static_cast<double>(s) - static_cast<double>(series.size()) / 2) * bar_w;
            b << "<rect x=\"" << num(x) << "\" y=\"" << num(std::min(y_of(v), mid)) << "\" width=\"" << num(bar_w - 2)
              << "\" height=\"" << num(std::abs(y_of(v) - mid)) << "\" fill=\"" << palette[s % 7] << "\"><title>"
              << xml_escape(series[s].first) << ' ' << arms[a].label() << ": " << num(v * 100, 2)
              << "%</title></rect>\n";
        }
        b << "<text x=\"" << num(gx) << "\" y=\"" << num(c.top + c.plot_h() + 16)
          << "\" font-size=\"11\" text-anchor=\"middle\">" << arms[a].label() << "</text>\n";
    }

    double lx = c.left;
    for (std::size_t s = 0; s < series.size(); ++s) {
        b << "<rect x=\"" << num(lx) << "\" y=\"" << num(c.height - 40) << "\" width=\"12\" height=\"12\" fill=\""
          << palette[s % 7] << "\"/><text x=\"" << num(lx + 16) << "\" y=\"" << num(c.height - 30)
          << "\" font-size=\"11\">" << xml_escape(series[s].first) << "</text>\n";
        lx += 150;
    }
    return svg_open(c, "Relative change of ACC@" + std::to_string(k) + " vs C=6,H=15") + b.str() + "</svg>\n";
}

std::string report_summary_text(const EvalReport& report) {
    std::ostringstream o;
    o << report.model << " | " << report.dataset << " | " << report.shots << "-shot | C=" << report.context
      << " H=" << report.history << '\n';
    for (const auto& [k, a] : report.aggregates) {
        o << "  ACC@" << k << ": ";
        if (!a) {
            o << "n/a\n";
            continue;
        }
        o << num(a->mean, 4) << " +/- " << num(a->sd, 4) << " over " << a->runs << " run(s)"
          << (a->single_run ? " (single run, sd not estimated)" : "") << '\n';
    }
    for (const auto& run : report.runs) {
        o << "  run " << run.run_index << ": n=" << run.n << " empty=" << run.empty_count
          << " hallucinated=" << run.halluc_count << " failed=" << run.failed_count << '\n';
    }
    return o.str();
}

}  // namespace nextloc
