#include "koopagru/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace koopagru::plot {
namespace {

constexpr double kWidth = 900.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

struct Frame {
    double x0, x1, y0, y1;

    double px(double x) const { return kLeft + (x - x0) / std::max(x1 - x0, 1e-300) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / std::max(y1 - y0, 1e-300) * (kHeight - kTop - kBottom); }
};

void header(std::ostream& out, const std::string& title, const Frame& f, const std::string& x_label,
            const std::string& y_label) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
        << title << "</text>\n"
        << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight << "\" y2=\""
        << kHeight - kBottom << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << x_label << "</text>\n"
        << "<text x=\"16\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 16 " << kHeight / 2
        << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << y_label << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
        std::ostringstream tick;
        tick.precision(3);
        tick << y;
        out << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
            << tick.str() << "</text>\n";
    }
}

void polyline(std::ostream& out, const Frame& f, const std::vector<double>& y, const std::string& color, Index stride) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < y.size(); i += static_cast<std::size_t>(stride)) {
        // Keep the bucket maximum so isolated peaks survive downsampling.
        double v = y[i];
        for (std::size_t k = i; k < std::min(y.size(), i + static_cast<std::size_t>(stride)); ++k) v = std::max(v, y[k]);
        out << f.px(static_cast<double>(i)) << ',' << f.py(v) << ' ';
    }
    out << "\"/>\n";
}

}  // namespace

void write_lines(const std::string& path, const std::string& title, const std::vector<Line>& lines,
                 const std::string& x_label, const std::string& y_label) {
    Frame f{0.0, 1.0, std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
    for (const auto& line : lines) {
        f.x1 = std::max(f.x1, static_cast<double>(line.y.size()) - 1.0);
        for (const double v : line.y) {
            f.y0 = std::min(f.y0, v);
            f.y1 = std::max(f.y1, v);
        }
    }
    if (f.y0 > f.y1) f = {0.0, 1.0, 0.0, 1.0};
    if (f.y1 == f.y0) f.y1 = f.y0 + 1.0;

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    header(out, title, f, x_label, y_label);
    double legend_y = kTop + 10;
    for (const auto& line : lines) {
        polyline(out, f, line.y, line.color, 1);
        out << "<text x=\"" << kWidth - kRight - 10 << "\" y=\"" << legend_y
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << line.color << "\">"
            << line.label << "</text>\n";
        legend_y += 14;
    }
    out << "</svg>\n";
}

void write_scores(const std::string& path, const Eigen::VectorXd& scores, double delta, const Eigen::VectorXi& labels) {
    const std::vector<double> y(scores.data(), scores.data() + scores.size());
    Frame f{0.0, std::max(1.0, static_cast<double>(y.size()) - 1.0), 0.0, 1.0};
    if (!y.empty()) f.y1 = std::max(*std::max_element(y.begin(), y.end()), delta) * 1.05;
    if (f.y1 <= 0.0) f.y1 = 1.0;

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    header(out, "anomaly scores", f, "time index", "score");
    for (Index t = 0; t < labels.size();) {
        if (labels(t) == 0) {
            ++t;
            continue;
        }
        Index end = t;
        while (end < labels.size() && labels(end) != 0) ++end;
        const double x0 = f.px(static_cast<double>(t));
        const double x1 = std::max(f.px(static_cast<double>(end)), x0 + 1.0);
        out << "<rect x=\"" << x0 << "\" y=\"" << kTop << "\" width=\"" << x1 - x0 << "\" height=\""
            << kHeight - kTop - kBottom << "\" fill=\"#d62728\" fill-opacity=\"0.2\"/>\n";
        t = end;
    }
    const auto stride = std::max<Index>(1, static_cast<Index>(y.size()) / 3000);
    polyline(out, f, y, "#1f77b4", stride);
    out << "<line x1=\"" << kLeft << "\" y1=\"" << f.py(delta) << "\" x2=\"" << kWidth - kRight << "\" y2=\""
        << f.py(delta) << "\" stroke=\"#ff7f0e\" stroke-dasharray=\"6 4\"/>\n"
        << "</svg>\n";
}

}  // namespace koopagru::plot
