#pragma once

#include "koopagru/common.hpp"

#include <string>
#include <vector>

namespace koopagru::plot {

struct Line {
    std::string label;
    std::vector<double> y;
    std::string color = "#1f77b4";
};

// Static SVG charts.
void write_lines(const std::string& path, const std::string& title, const std::vector<Line>& lines,
                 const std::string& x_label, const std::string& y_label);

// Scores against the threshold, with labelled anomaly segments shaded.
void write_scores(const std::string& path, const Eigen::VectorXd& scores, double delta, const Eigen::VectorXi& labels);

}  // namespace koopagru::plot
