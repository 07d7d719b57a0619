// Copyright 2026 The dicekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dicekit/errors.hpp"
#include "dicekit/experiments.hpp"
#include "dicekit/serialization.hpp"

namespace dicekit {
namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> line_of;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("missing column '" + name + "'", 1);
    return static_cast<int>(it - header.begin());
  }

  double number(std::size_t r, int c) const {
    const std::string& cell = rows[r][static_cast<std::size_t>(c)];
    if (cell.empty() || cell == "nan") return std::numeric_limits<double>::quiet_NaN();
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      return v;
    } catch (const std::exception&) {
      throw ParseError("not a number: '" + cell + "'", line_of[r]);
    }
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Table read_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  Table t;
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError("expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()),
                       number);
    }
    t.rows.push_back(std::move(cells));
    t.line_of.push_back(number);
  }
  if (t.header.empty()) throw ParseError("empty CSV", 1);
  return t;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
  bool line = true;
};

class Canvas {
 public:
  static constexpr double kW = 720, kH = 440, kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;

  Canvas(std::string title, std::string xlabel, std::string ylabel, bool log_x)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)), log_x_(log_x) {}

  void add(Series s) { series_.push_back(std::move(s)); }

  std::string render() const {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series_) {
      for (auto [x, y] : s.points) {
        if (!std::isfinite(y) || !std::isfinite(x) || (log_x_ && x <= 0.0)) continue;
        const double tx = log_x_ ? std::log10(x) : x;
        x0 = std::min(x0, tx);
        x1 = std::max(x1, tx);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
    if (!std::isfinite(x0)) {
      x0 = log_x_ ? -4.0 : 0.0;
      x1 = log_x_ ? 1.0 : 1.0;
      y0 = 0.0;
      y1 = 1.0;
    }
    if (log_x_) {
      x0 = std::floor(x0);
      x1 = std::ceil(x1);
    }
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 <= y0) {
      y0 -= 0.5;
      y1 += 0.5;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
    auto px = [&](double x) { return kLeft + ((log_x_ ? std::log10(x) : x) - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 "
        << kW << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n"
        << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title_)
        << "</text>\n"
        << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    // x ticks
    if (log_x_) {
      for (int e = static_cast<int>(x0); e <= static_cast<int>(x1); ++e) {
        const double x = kLeft + (e - x0) / (x1 - x0) * pw;
        svg << "<line x1=\"" << x << "\" y1=\"" << kTop + ph << "\" x2=\"" << x << "\" y2=\"" << kTop + ph + 5
            << "\" stroke=\"black\"/>\n<text x=\"" << x << "\" y=\"" << kTop + ph + 18
            << "\" text-anchor=\"middle\">1e" << e << "</text>\n";
      }
    } else {
      for (int k = 0; k <= 4; ++k) {
        const double v = x0 + (x1 - x0) * k / 4.0;
        const double x = kLeft + pw * k / 4.0;
        svg << "<line x1=\"" << x << "\" y1=\"" << kTop + ph << "\" x2=\"" << x << "\" y2=\"" << kTop + ph + 5
            << "\" stroke=\"black\"/>\n<text x=\"" << x << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
            << fmt(v) << "</text>\n";
      }
    }
    for (int k = 0; k <= 4; ++k) {
      const double v = y0 + (y1 - y0) * k / 4.0;
      const double y = py(v);
      svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\"" << y
          << "\" stroke=\"black\"/>\n<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
          << fmt(v) << "</text>\n";
    }
    svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << escape(xlabel_)
        << "</text>\n<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << kTop + ph / 2 << ")\">" << escape(ylabel_) << "</text>\n";

    for (std::size_t i = 0; i < series_.size(); ++i) {
      const auto& s = series_[i];
      const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
      std::ostringstream pts;
      for (auto [x, y] : s.points) {
        if (!std::isfinite(y) || (log_x_ && x <= 0.0)) continue;
        pts << px(x) << ',' << py(y) << ' ';
        svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
      if (s.line && !pts.str().empty()) {
        svg << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.5\"/>\n";
      }
      const double ly = kTop + 14 + 18 * static_cast<double>(i);
      svg << "<rect x=\"" << kW - kRight + 14 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"12\" fill=\""
          << color << "\"/>\n<text x=\"" << kW - kRight + 32 << "\" y=\"" << ly + 1 << "\">" << escape(s.label)
          << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
  }

 private:
  std::string title_, xlabel_, ylabel_;
  bool log_x_;
  std::vector<Series> series_;
};

// Mean of `value` per (series key, x), in first-appearance order.
std::vector<Series> mean_curves(const Table& t, const std::vector<std::string>& key_cols, const std::string& x_col,
                                const std::string& y_col) {
  std::vector<int> keys;
  for (const auto& k : key_cols) keys.push_back(t.column(k));
  const int xc = t.column(x_col);
  const int yc = t.column(y_col);
  std::vector<std::string> order;
  std::map<std::string, std::map<double, std::pair<double, int>>> acc;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::string label;
    for (int k : keys) label += (label.empty() ? "" : " ") + t.rows[r][static_cast<std::size_t>(k)];
    if (!acc.count(label)) order.push_back(label);
    auto& cell = acc[label][t.number(r, xc)];
    const double y = t.number(r, yc);
    if (std::isfinite(y)) {
      cell.first += y;
      ++cell.second;
    }
  }
  std::vector<Series> out;
  for (const auto& label : order) {
    Series s{label, {}, true};
    for (const auto& [x, sum] : acc.at(label)) {
      s.points.emplace_back(x, sum.second ? sum.first / sum.second : std::numeric_limits<double>::quiet_NaN());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string save(const std::filesystem::path& dir, const std::string& name, const Canvas& canvas) {
  const auto path = (dir / name).string();
  write_text_file(path, canvas.render());
  return path;
}

}  // namespace

std::vector<std::string> emit_plots(const std::string& csv_path, std::string_view kind, const std::string& output_dir) {
  const Table t = read_csv(csv_path);
  std::filesystem::path dir = output_dir.empty() ? std::filesystem::path(csv_path).parent_path() : std::filesystem::path(output_dir);
  if (dir.empty()) dir = ".";
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;

  if (kind == "fig1") {
    const std::vector<std::pair<std::string, std::string>> panels = {
        {"exact_return", "Policy return"}, {"viol_bf", "Bellman flow violation"}, {"viol_pc", "Policy correction violation"}};
    const char* names[] = {"fig1_return.svg", "fig1_viol_bf.svg", "fig1_viol_pc.svg"};
    for (std::size_t i = 0; i < panels.size(); ++i) {
      Canvas c(panels[i].second, "alpha / beta (log scale)", panels[i].first, true);
      for (auto& s : mean_curves(t, {"algorithm"}, "param_value", panels[i].first)) c.add(std::move(s));
      files.push_back(save(dir, names[i], c));
    }
  } else if (kind == "ope") {
    const int est = t.column("estimator");
    const int ec = t.column("estimate");
    const int xc = t.column("exact_mle");
    const int ac = t.column("alpha");
    std::vector<std::string> order;
    std::map<std::string, std::map<double, std::pair<double, int>>> acc;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const std::string& name = t.rows[r][static_cast<std::size_t>(est)];
      if (!acc.count(name)) order.push_back(name);
      const double d = t.number(r, ec) - t.number(r, xc);
      auto& cell = acc[name][t.number(r, ac)];
      if (std::isfinite(d)) {
        cell.first += d * d;
        ++cell.second;
      }
    }
    Canvas c("OPE RMSE against the exact value", "alpha (log scale)", "RMSE", true);
    for (const auto& name : order) {
      Series s{name, {}, true};
      for (const auto& [alpha, sum] : acc.at(name)) {
        s.points.emplace_back(alpha, sum.second ? std::sqrt(sum.first / sum.second) : std::numeric_limits<double>::quiet_NaN());
      }
      c.add(std::move(s));
    }
    files.push_back(save(dir, "ope_rmse.svg", c));
  } else if (kind == "constrained") {
    const int alg = t.column("algorithm");
    const int bind = t.column("binding");
    const int est = t.column("estimated_cost");
    const int exact = t.column("exact_cost");
    const int ct = t.column("c_tilde");
    const int feas = t.column("feasible");
    std::vector<std::string> order;
    std::map<std::string, Series> scatter;
    std::map<std::string, std::pair<int, int>> rate;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (t.rows[r][static_cast<std::size_t>(bind)] != "1") continue;
      const std::string& name = t.rows[r][static_cast<std::size_t>(alg)];
      if (!scatter.count(name)) {
        order.push_back(name);
        scatter[name] = Series{name, {}, false};
      }
      const double c_tilde = t.number(r, ct);
      scatter[name].points.emplace_back(t.number(r, exact) / c_tilde, t.number(r, est) / c_tilde);
      rate[name].first += t.rows[r][static_cast<std::size_t>(feas)] == "1" ? 1 : 0;
      ++rate[name].second;
    }
    Canvas sc("Estimated vs exact cost (relative to budget)", "exact cost / budget", "estimated cost / budget", false);
    for (const auto& name : order) sc.add(scatter.at(name));
    files.push_back(save(dir, "constrained_cost.svg", sc));
    Canvas fr("Feasibility rate on binding instances", "algorithm index", "feasible fraction", false);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto& [ok, n] = rate.at(order[i]);
      fr.add(Series{order[i], {{static_cast<double>(i), n ? static_cast<double>(ok) / n : 0.0}}, false});
    }
    files.push_back(save(dir, "constrained_feasibility.svg", fr));
  } else {
    throw ParameterError("unknown plot kind '" + std::string(kind) + "'");
  }
  return files;
}

}  // namespace dicekit
