#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "unitbox/tensor.hpp"

namespace unitbox {

/// Reals are written with 6 significant digits.
std::string format_real(double v);
std::string format_int(long long v);

/// RFC-4180 style CSV: header row, comma separated, CRLF-free, quoted only when needed.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    void add_row(std::vector<std::string> row);

    const std::vector<std::string>& header() const { return header_; }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }

    std::string str() const;
    void write(const std::filesystem::path& file) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string csv_escape(const std::string& field);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal SVG line chart with axes, ticks and a legend.
std::string svg_line_plot(const std::vector<PlotSeries>& series, const std::string& title, const std::string& x_label,
                          const std::string& y_label);

/// Binary PGM (P5, maxval 255) of a single H x W plane; values are scaled by
/// `scale`, rounded and clamped to [0, 255].
void write_pgm(const std::filesystem::path& file, const Tensor& t, int n, int c, double scale);

struct PgmImage {
    int width = 0;
    int height = 0;
    std::vector<unsigned char> pixels;
};
PgmImage read_pgm(const std::filesystem::path& file);

}  // namespace unitbox
