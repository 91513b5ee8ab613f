#pragma once

// Hand-emitted standalone SVG figures.

#include "emg2artic/types.hpp"

#include <string>
#include <vector>

namespace emg2artic::svg {

/// Cells coloured on a monotone dark-to-light ramp over [vmin, vmax]
/// (values outside are clamped for display only), each labelled with its value.
std::string heatmap(const MatD& values, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const std::string& title, double vmin, double vmax);

/// Vertical bars with optional error whiskers (empty ci vectors to omit).
std::string bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::vector<double>& ci_low, const std::vector<double>& ci_high, const std::string& title,
                      double ymin, double ymax);

/// Escapes &, <, >, " for text content and attributes.
std::string escape(const std::string& text);

}  // namespace emg2artic::svg
