#include "octroi/experiment/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "octroi/core.hpp"

namespace fs = std::filesystem;

namespace octroi::experiment {

namespace {

std::string fixed3(double v) {
    if (!std::isfinite(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string num(double v) {
    if (!std::isfinite(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Quote a CSV field only when it needs it.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string kind_label(RoiKind kind) {
    switch (kind) {
        case RoiKind::WholeImage: return "IMG";
        case RoiKind::IlmBm: return "ILM-BM";
        case RoiKind::RpeBm: return "RPE-BM";
        case RoiKind::BmCho: return "BM-CHO";
        case RoiKind::RpeBmMaskOnly: return "RPE-BM";
    }
    return "?";
}

std::string short_label(const RoiRequest& r) {
    auto [method, roi] = display_name(r);
    return method + " " + roi;
}

const std::pair<const char*, eval::Estimate eval::MetricsReport::*> kColumns[] = {
    {"AUROC", &eval::MetricsReport::auroc},
    {"Accuracy", &eval::MetricsReport::accuracy},
    {"Sensitivity", &eval::MetricsReport::sensitivity},
    {"Specificity", &eval::MetricsReport::specificity},
};

void markdown_rows(std::ostringstream& os, const RunResults& results, bool youden) {
    os << "| Model | ROI |";
    for (const auto& [title, _] : kColumns) os << ' ' << title << " |";
    os << " Threshold |\n|---|---|";
    for (std::size_t i = 0; i < std::size(kColumns); ++i) os << "---|";
    os << "---|\n";
    for (const auto& v : results.variants) {
        const auto& m = youden ? v.youden_metrics : v.metrics;
        auto [method, roi] = display_name(v.request);
        os << "| " << method << " | " << roi << " |";
        for (const auto& [_, field] : kColumns) os << ' ' << format_ci(m.*field) << " |";
        os << ' ' << fixed3(m.threshold) << " |\n";
    }
}

}  // namespace

std::string format_ci(const eval::Estimate& e) {
    return fixed3(e.point) + " [" + fixed3(e.ci_low) + " - " + fixed3(e.ci_high) + "]";
}

std::string format_p(double p) {
    if (std::isnan(p)) return "n/a";
    if (p < 0.001) return "<0.001";
    return fixed3(p);
}

std::pair<std::string, std::string> display_name(const RoiRequest& request) {
    if (request.kind == RoiKind::WholeImage) return {"Whole Image", "IMG"};
    if (request.kind == RoiKind::RpeBmMaskOnly) return {"Segmentation only", "RPE-BM"};
    return {request.method == RoiMethod::Masking ? "Masking" : "Cropping", kind_label(request.kind)};
}

std::string table1_markdown(const RunResults& results) {
    std::ostringstream os;
    os << "# Test-set performance\n\n";
    os << "Point estimates with bootstrap confidence intervals.\n\n";
    markdown_rows(os, results, false);
    os << "\n## Secondary: Youden-optimal threshold\n\n";
    os << "Threshold chosen on the test set itself, so these numbers are optimistic.\n\n";
    markdown_rows(os, results, true);
    return os.str();
}

std::string table1_csv(const RunResults& results) {
    std::ostringstream os;
    os << "model,roi,method";
    for (const auto& [title, _] : kColumns) os << ',' << title;
    os << '\n';
    for (const auto& v : results.variants) {
        auto [method, roi] = display_name(v.request);
        os << csv_field(method) << ',' << csv_field(roi) << ',' << v.name;
        for (const auto& [_, field] : kColumns) os << ',' << csv_field(format_ci(v.metrics.*field));
        os << '\n';
    }
    return os.str();
}

std::string metrics_csv(const RunResults& results) {
    std::ostringstream os;
    os << "model,roi,method";
    for (const char* name : {"auroc", "accuracy", "sensitivity", "specificity"})
        os << ',' << name << ',' << name << "_lo," << name << "_hi";
    os << ",n_pos,n_neg,threshold,youden_threshold\n";
    for (const auto& v : results.variants) {
        auto [method, roi] = display_name(v.request);
        os << csv_field(method) << ',' << csv_field(roi) << ',' << v.name;
        for (const auto& [_, field] : kColumns) {
            const auto& e = v.metrics.*field;
            os << ',' << num(e.point) << ',' << num(e.ci_low) << ',' << num(e.ci_high);
        }
        os << ',' << v.metrics.n_pos << ',' << v.metrics.n_neg << ',' << num(v.metrics.threshold) << ','
           << num(v.youden_metrics.threshold) << '\n';
    }
    return os.str();
}

// Upper triangle of pairwise p-values: row i, column j > i.
std::string table2_csv(const RunResults& results) {
    const auto& vs = results.variants;
    std::ostringstream os;
    os << "model";
    for (std::size_t j = 1; j < vs.size(); ++j) os << ',' << csv_field(short_label(vs[j].request));
    os << '\n';
    for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
        os << csv_field(short_label(vs[i].request));
        for (std::size_t j = 1; j < vs.size(); ++j) {
            os << ',';
            if (j <= i) continue;
            for (const auto& c : results.comparisons) {
                if (c.a == vs[i].name && c.b == vs[j].name) {
                    os << format_p(c.result.p_value);
                    break;
                }
            }
        }
        os << '\n';
    }
    return os.str();
}

std::string roc_csv(const std::vector<eval::RocPoint>& points) {
    std::ostringstream os;
    os << "fpr,tpr,threshold\n";
    for (const auto& p : points) {
        os << num(p.fpr) << ',' << num(p.tpr) << ',';
        os << (std::isinf(p.threshold) ? std::string("inf") : num(p.threshold)) << '\n';
    }
    return os.str();
}

std::string roc_svg(const RunResults& results) {
    constexpr double size = 400, margin = 50;
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    const double legend_h = 18.0 * static_cast<double>(results.variants.size());
    std::ostringstream os;
    char buf[128];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin + 220 << "\" height=\""
       << std::max(size + 2 * margin, legend_h + 2 * margin) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin + size << "\" x2=\"" << margin + size << "\" y2=\"" << margin
       << "\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n";
    os << "<text x=\"" << margin + size / 2 << "\" y=\"" << margin + size + 35
       << "\" text-anchor=\"middle\">False positive rate</text>\n";
    os << "<text x=\"15\" y=\"" << margin + size / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
       << margin + size / 2 << ")\">True positive rate</text>\n";
    for (int t = 0; t <= 4; ++t) {
        const double f = t / 4.0;
        std::snprintf(buf, sizeof buf, "%.2f", f);
        os << "<text x=\"" << margin + f * size << "\" y=\"" << margin + size + 16 << "\" text-anchor=\"middle\">"
           << buf << "</text>\n";
        os << "<text x=\"" << margin - 6 << "\" y=\"" << margin + size - f * size + 4 << "\" text-anchor=\"end\">"
           << buf << "</text>\n";
    }
    for (std::size_t v = 0; v < results.variants.size(); ++v) {
        const auto& var = results.variants[v];
        const char* color = colors[v % std::size(colors)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : eval::roc_points(var.scores)) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", margin + p.fpr * size, margin + size - p.tpr * size);
            os << buf;
        }
        os << "\"/>\n";
        const double y = margin + 12 + 18.0 * static_cast<double>(v);
        os << "<line x1=\"" << margin + size + 15 << "\" y1=\"" << y - 4 << "\" x2=\"" << margin + size + 35
           << "\" y2=\"" << y - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << margin + size + 40 << "\" y=\"" << y << "\">" << short_label(var.request) << " ("
           << fixed3(var.metrics.auroc.point) << ")</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<fs::path> emit_report(const RunResults& results, const fs::path& output_dir) {
    std::vector<fs::path> written;
    auto put = [&](const fs::path& name, const std::string& text) {
        write_file_atomic(output_dir / name, text);
        written.push_back(output_dir / name);
    };
    put("table1.md", table1_markdown(results));
    put("table1.csv", table1_csv(results));
    put("metrics.csv", metrics_csv(results));
    put("table2.csv", table2_csv(results));
    for (const auto& v : results.variants) put("roc_" + v.name + ".csv", roc_csv(eval::roc_points(v.scores)));
    put("roc.svg", roc_svg(results));
    for (const auto& v : results.variants)
        if (!v.history.empty()) put("history_" + v.name + ".csv", nn::history_to_csv(v.history));
    return written;
}

}  // namespace octroi::experiment
