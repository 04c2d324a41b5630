// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "trmoe/errors.hpp"

namespace trmoe {

namespace {

// Fixed formatting keeps output independent of stream state and locale.
std::string num(double v, int digits = 10) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
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

std::string svg_open(double w, double h) {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           num(w) + "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) +
           "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "start") {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + xml_escape(s) +
           "</text>\n";
}

// White to dark blue.
std::string shade(double p) {
    const double t = std::clamp(p, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(255 - t * (255 - 8)));
    const int g = static_cast<int>(std::lround(255 - t * (255 - 48)));
    const int b = static_cast<int>(std::lround(255 - t * (255 - 107)));
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

std::string dominance_csv(const RoutingSnapshot& snap) {
    std::string out = "layer,task,expert,dense,sparse,is_top1\n";
    const auto dom = top1_dominance(snap);
    for (std::size_t l = 0; l < snap.layers.size(); ++l) {
        const auto& layer = snap.layers[l];
        for (TaskId t : kAllTasks) {
            const auto i = task_index(t);
            for (std::size_t j = 0; j < layer.dense[i].size(); ++j) {
                double sparse = 0.0;
                for (std::size_t s = 0; s < layer.selected[i].size(); ++s)
                    if (layer.selected[i][s] == j) sparse = layer.sparse[i][s];
                out += layer.name + "," + std::string(task_name(t)) + "," + std::to_string(j) + "," +
                       num(layer.dense[i][j], 17) + "," + num(sparse, 17) + "," +
                       (dom[l][i].expert == j ? "1" : "0") + "\n";
            }
        }
    }
    return out;
}

std::string entropy_csv(const RoutingSnapshot& snap) {
    std::string out = "task,entropy\n";
    if (snap.layers.empty()) return out;
    const auto h = routing_entropy(snap);
    for (TaskId t : kAllTasks) out += std::string(task_name(t)) + "," + num(h[task_index(t)], 17) + "\n";
    return out;
}

std::string similarity_csv(const RoutingSnapshot& snap) {
    std::string out = "task,pol,imp,rea\n";
    if (snap.layers.empty()) return out;
    const auto m = gate_similarity_matrix(snap);
    for (TaskId t : kAllTasks) {
        out += std::string(task_name(t));
        for (double v : m[task_index(t)]) out += "," + num(v, 17);
        out += "\n";
    }
    return out;
}

std::string metrics_csv(const std::vector<StepRecord>& log) {
    std::string out = "step,loss_gen,loss_sep,loss_total,lr\n";
    for (const auto& r : log)
        out += std::to_string(r.step) + "," + num(r.loss_gen, 17) + "," + num(r.loss_sep, 17) + "," +
               num(r.loss_total, 17) + "," + num(r.lr, 17) + "\n";
    return out;
}

std::string heatmap_svg(const RoutingSnapshot& snap) {
    const double cell = 36, left = 60, top = 40, gap = 30;
    const std::size_t n = std::max<std::size_t>(snap.n_experts(), 1);
    const double panel_h = cell * kNumTasks + gap + 20;
    const double w = left + cell * static_cast<double>(n) + 80;
    const double h = top + panel_h * static_cast<double>(std::max<std::size_t>(snap.layers.size(), 1));
    std::string out = svg_open(w, h);
    out += text(left, 20, "top-1 routing per layer (rows: tasks, columns: experts)");
    const auto dom = top1_dominance(snap);
    for (std::size_t l = 0; l < snap.layers.size(); ++l) {
        const auto& layer = snap.layers[l];
        const double y0 = top + panel_h * static_cast<double>(l) + 14;
        out += text(left, y0 - 4, layer.name);
        for (TaskId t : kAllTasks) {
            const auto i = task_index(t);
            const double y = y0 + cell * static_cast<double>(i);
            out += text(left - 8, y + cell / 2 + 4, std::string(task_name(t)), "end");
            for (std::size_t j = 0; j < layer.dense[i].size(); ++j) {
                const double x = left + cell * static_cast<double>(j);
                const double p = layer.dense[i][j];
                const bool top1 = dom[l][i].expert == j;
                out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" +
                       num(cell) + "\" fill=\"" + shade(p) + "\" stroke=\"" + (top1 ? "#d62728" : "#999999") +
                       "\" stroke-width=\"" + (top1 ? "2" : "0.5") + "\"/>\n";
                out += "<text x=\"" + num(x + cell / 2) + "\" y=\"" + num(y + cell / 2 + 4) +
                       "\" text-anchor=\"middle\" font-size=\"9\" fill=\"" + (p > 0.55 ? "white" : "black") + "\">" +
                       num(p, 2) + "</text>\n";
            }
        }
        for (std::size_t j = 0; j < layer.dense[0].size(); ++j)
            out += text(left + cell * (static_cast<double>(j) + 0.5), y0 + cell * kNumTasks + 14,
                        "e" + std::to_string(j), "middle");
    }
    out += "</svg>\n";
    return out;
}

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::vector<double>& x,
                           const std::vector<Series>& series) {
    const double w = 520, h = 340, left = 60, right = 130, top = 40, bottom = 50;
    const double pw = w - left - right, ph = h - top - bottom;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.y.size(), x.size()); ++i) {
            if (std::isnan(s.y[i])) continue;
            if (!any) xmin = xmax = x[i], ymin = ymax = s.y[i], any = true;
            xmin = std::min(xmin, x[i]), xmax = std::max(xmax, x[i]);
            ymin = std::min(ymin, s.y[i]), ymax = std::max(ymax, s.y[i]);
        }
    if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
    if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
    auto px = [&](double v) { return left + (v - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double v) { return top + ph - (v - ymin) / (ymax - ymin) * ph; };

    std::string out = svg_open(w, h);
    out += text(left, 22, title);
    out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = ymin + (ymax - ymin) * k / 4.0;
        const double xv = xmin + (xmax - xmin) * k / 4.0;
        out += text(left - 6, py(yv) + 4, num(yv, 3), "end");
        out += text(px(xv), top + ph + 16, num(xv, 3), "middle");
    }
    out += text(left + pw / 2, h - 12, x_label, "middle");
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % std::size(kPalette)];
        std::string pts;
        for (std::size_t i = 0; i < std::min(series[s].y.size(), x.size()); ++i) {
            if (std::isnan(series[s].y[i])) continue;
            if (!pts.empty()) pts += ' ';
            pts += num(px(x[i]), 6) + "," + num(py(series[s].y[i]), 6);
            out += "<circle cx=\"" + num(px(x[i]), 6) + "\" cy=\"" + num(py(series[s].y[i]), 6) +
                   "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
               "\"/>\n";
        out += text(left + pw + 10, top + 14 + 16 * static_cast<double>(s), series[s].name);
        out += "<rect x=\"" + num(left + pw + 10 + 90) + "\" y=\"" + num(top + 6 + 16 * static_cast<double>(s)) +
               "\" width=\"12\" height=\"4\" fill=\"" + color + "\"/>\n";
    }
    out += "</svg>\n";
    return out;
}

std::string entropy_svg(const RoutingSnapshot& snap) {
    const double w = 360, h = 260, left = 50, top = 40, ph = 170, bar = 60;
    const auto ent = routing_entropy(snap);
    const double hmax = snap.n_experts() > 1 ? std::log(static_cast<double>(snap.n_experts())) : 1.0;
    std::string out = svg_open(w, h);
    out += text(left, 22, "routing entropy per task (nats, max ln N = " + num(hmax, 4) + ")");
    out += "<line x1=\"" + num(left) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(w - 20) + "\" y2=\"" +
           num(top + ph) + "\" stroke=\"black\"/>\n";
    for (TaskId t : kAllTasks) {
        const auto i = task_index(t);
        const double x = left + 20 + static_cast<double>(i) * (bar + 30);
        const double bh = snap.layers.empty() ? 0.0 : ent[i] / hmax * ph;
        out += "<rect x=\"" + num(x) + "\" y=\"" + num(top + ph - bh, 6) + "\" width=\"" + num(bar) + "\" height=\"" +
               num(bh, 6) + "\" fill=\"" + kPalette[i] + "\"/>\n";
        out += text(x + bar / 2, top + ph + 16, std::string(task_name(t)), "middle");
        out += text(x + bar / 2, top + ph - bh - 4, num(ent[i], 4), "middle");
    }
    out += "</svg>\n";
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

void emit_analysis(const RoutingSnapshot& snap, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
    const std::filesystem::path d(dir);
    write_text_file((d / "entropy.csv").string(), entropy_csv(snap));
    write_text_file((d / "dominance.csv").string(), dominance_csv(snap));
    write_text_file((d / "similarity.csv").string(), similarity_csv(snap));
    write_text_file((d / "heatmap.svg").string(), heatmap_svg(snap));
    write_text_file((d / "entropy.svg").string(), entropy_svg(snap));
}

}  // namespace trmoe
