#include "quasistab/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "quasistab/errors.hpp"

namespace quasistab {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  const auto parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out.good()) throw Error("failed to write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string csv_table(const std::vector<std::string>& headers,
                      const std::vector<std::vector<double>>& columns) {
  if (headers.size() != columns.size())
    throw ConfigError("csv_table: header count does not match column count");
  std::ostringstream out;
  for (std::size_t c = 0; c < headers.size(); ++c) {
    if (c) out << ',';
    out << headers[c];
  }
  out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& col : columns)
    if (col.size() != rows) throw ConfigError("csv_table: ragged columns");
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out << ',';
      out << format_double(columns[c][r]);
    }
    out << '\n';
  }
  return out.str();
}

namespace {

/// Fixed two-decimal pixel coordinate; snprintf output is locale-free here
/// because the "C" locale is never changed by this library.
std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

std::string svg_decay_plot(const std::vector<double>& times,
                           const std::vector<double>& values,
                           const std::string& y_label) {
  const double width = 720, height = 440;
  const double ml = 80, mr = 20, mt = 20, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;

  std::vector<double> ts, ls;
  for (std::size_t i = 0; i < times.size() && i < values.size(); ++i)
    if (values[i] > 0.0 && std::isfinite(values[i])) {
      ts.push_back(times[i]);
      ls.push_back(std::log10(values[i]));
    }

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  if (ts.size() < 2) {
    out << "<text x=\"" << px(width / 2) << "\" y=\"" << px(height / 2)
        << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">"
        << "no positive samples</text>\n</svg>\n";
    return out.str();
  }

  double t0 = ts.front(), t1 = ts.front(), l0 = ls.front(), l1 = ls.front();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    t0 = std::min(t0, ts[i]);
    t1 = std::max(t1, ts[i]);
    l0 = std::min(l0, ls[i]);
    l1 = std::max(l1, ls[i]);
  }
  if (t1 - t0 < 1e-12) t1 = t0 + 1.0;
  if (l1 - l0 < 1e-12) l1 = l0 + 1.0;

  auto X = [&](double t) { return ml + (t - t0) / (t1 - t0) * pw; };
  auto Y = [&](double l) { return mt + (l1 - l) / (l1 - l0) * ph; };

  out << "<line x1=\"" << px(ml) << "\" y1=\"" << px(mt + ph) << "\" x2=\""
      << px(ml + pw) << "\" y2=\"" << px(mt + ph)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << px(ml) << "\" y1=\"" << px(mt) << "\" x2=\""
      << px(ml) << "\" y2=\"" << px(mt + ph) << "\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double t = t0 + (t1 - t0) * i / 4.0;
    const double l = l0 + (l1 - l0) * i / 4.0;
    out << "<line x1=\"" << px(X(t)) << "\" y1=\"" << px(mt + ph) << "\" x2=\""
        << px(X(t)) << "\" y2=\"" << px(mt + ph + 5)
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(X(t)) << "\" y=\"" << px(mt + ph + 20)
        << "\" font-family=\"monospace\" font-size=\"11\" "
           "text-anchor=\"middle\">"
        << tick_label(t) << "</text>\n";
    out << "<line x1=\"" << px(ml - 5) << "\" y1=\"" << px(Y(l)) << "\" x2=\""
        << px(ml) << "\" y2=\"" << px(Y(l)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(ml - 8) << "\" y=\"" << px(Y(l) + 4)
        << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">"
        << tick_label(std::pow(10.0, l)) << "</text>\n";
  }

  out << "<text x=\"" << px(ml + pw / 2) << "\" y=\"" << px(height - 12)
      << "\" font-family=\"monospace\" font-size=\"12\" "
         "text-anchor=\"middle\">t</text>\n";
  out << "<text x=\"16\" y=\"" << px(mt + ph / 2)
      << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 16 "
      << px(mt + ph / 2) << ")\">" << y_label << "</text>\n";

  out << "<polyline fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"1.5\" "
         "points=\"";
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (i) out << ' ';
    out << px(X(ts[i])) << ',' << px(Y(ls[i]));
  }
  out << "\"/>\n</svg>\n";
  return out.str();
}

}  // namespace quasistab
