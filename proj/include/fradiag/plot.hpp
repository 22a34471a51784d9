#pragma once

// Self-contained SVG charts with CSV twins of the plotted numbers.

#include <span>
#include <string>
#include <vector>

#include "fradiag/data.hpp"
#include "fradiag/metrics.hpp"

namespace fradiag {

struct PlotFiles {
    std::string svg;
    std::string csv;
};

struct BodeSeries {
    std::string label;
    FRASweep sweep;
};

/// Magnitude (dB) against log frequency; one polyline per series.
PlotFiles bode_plot(const FrequencyGrid& grid, std::span<const BodeSeries> series, const std::string& title);
/// Heat map with the count printed in every cell.
PlotFiles confusion_plot(const ConfusionMatrix& cm, const std::vector<std::string>& class_names, const std::string& title);
/// CC (x) against ED (y), one marker per sample coloured by degree.
PlotFiles cced_plot(const CurveStats& stats, const std::string& title);

/// Writes `svg_path` and the CSV twin next to it (same stem, .csv).
void write_plot(const PlotFiles& plot, const std::string& svg_path);

}  // namespace fradiag
