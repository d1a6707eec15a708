#pragma once

#include <span>
#include <string>
#include <vector>

namespace rfp {

// Minimal static SVG line plots; output formatting is fixed so identical
// data produces identical bytes.
class LinePlot {
 public:
  LinePlot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)),
        xlabel_(std::move(xlabel)),
        ylabel_(std::move(ylabel)) {}

  void add_series(std::string name, std::span<const double> x,
                  std::span<const double> y);
  std::string render() const;
  void write(const std::string& path) const;

 private:
  struct Series {
    std::string name;
    std::vector<double> x, y;
  };
  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
};

}  // namespace rfp
