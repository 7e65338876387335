#include <cstdio>
#include <fstream>

#include "figo/error.hpp"
#include "figo/pipeline.hpp"

namespace figo {
namespace {

struct Figure {
  std::string name;
  std::string title;
  std::vector<EnhanceMethod> methods;
};

constexpr const char* kColors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string bar_chart(const Figure& fig, std::span<const ResultRow> rows) {
  const double width = 640, height = 360, left = 60, right = 20, top = 40, bottom = 60;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  const double group_w = plot_w / static_cast<double>(kAllLevels.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(fig.methods.size());

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) +
                    "\" height=\"" + fmt(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<text x=\"" + fmt(width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         fig.title + "</text>\n";
  for (int t = 0; t <= 10; t += 2) {
    const double y = top + plot_h * (1.0 - t / 10.0);
    svg += "<line x1=\"" + fmt(left) + "\" x2=\"" + fmt(width - right) + "\" y1=\"" + fmt(y) +
           "\" y2=\"" + fmt(y) + "\" stroke=\"#ddd\"/>\n";
    svg += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(y + 4) + "\" text-anchor=\"end\">" +
           std::to_string(t * 10) + "%</text>\n";
  }
  for (std::size_t g = 0; g < kAllLevels.size(); ++g) {
    const double gx = left + group_w * static_cast<double>(g) + group_w * 0.1;
    for (std::size_t m = 0; m < fig.methods.size(); ++m) {
      const double x = gx + bar_w * static_cast<double>(m);
      const ResultRow* row = nullptr;
      for (const ResultRow& r : rows) {
        if (r.level == kAllLevels[g] && r.method == fig.methods[m]) row = &r;
      }
      if (row == nullptr || !row->accuracy) {
        svg += "<text x=\"" + fmt(x + bar_w / 2) + "\" y=\"" + fmt(top + plot_h - 4) +
               "\" text-anchor=\"middle\" font-size=\"9\">n/a</text>\n";
        continue;
      }
      const double h = plot_h * *row->accuracy;
      svg += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(top + plot_h - h) + "\" width=\"" +
             fmt(bar_w - 2) + "\" height=\"" + fmt(h) + "\" fill=\"" + kColors[m % 4] + "\"/>\n";
    }
    svg += "<text x=\"" + fmt(left + group_w * (static_cast<double>(g) + 0.5)) + "\" y=\"" +
           fmt(top + plot_h + 18) + "\" text-anchor=\"middle\">" +
           std::string(to_string(kAllLevels[g])) + "</text>\n";
  }
  for (std::size_t m = 0; m < fig.methods.size(); ++m) {
    const double x = left + 150.0 * static_cast<double>(m);
    const double y = height - 18;
    svg += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y - 10) + "\" width=\"12\" height=\"12\" fill=\"" +
           kColors[m % 4] + "\"/>\n";
    svg += "<text x=\"" + fmt(x + 16) + "\" y=\"" + fmt(y) + "\">" +
           std::string(to_string(fig.methods[m])) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

std::vector<std::filesystem::path> write_report_svgs(std::span<const ResultRow> rows,
                                                     const std::filesystem::path& dir) {
  const std::vector<Figure> figures = {
      {"fig4", "Rank-1 accuracy without enhancement", {EnhanceMethod::None}},
      {"fig5", "Rank-1 accuracy with enhancement",
       {EnhanceMethod::None, EnhanceMethod::Gabor, EnhanceMethod::Pix2Pix}},
      {"fig6", "Rank-1 accuracy, chained enhancement",
       {EnhanceMethod::Gabor, EnhanceMethod::Pix2Pix, EnhanceMethod::GaborThenPix2Pix}},
  };
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const Figure& fig : figures) {
    const auto path = dir / (fig.name + ".svg");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << bar_chart(fig, rows);
    written.push_back(path);
  }
  return written;
}

}  // namespace figo
