#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ecl/metrics.hpp"

namespace ecl::metrics {

using nlohmann::json;

void write_reliability_csv(const std::string& path, const ReliabilityTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "bin_id,class_index,lo,hi,count,mean_confidence,empirical_frequency,gap\n";
  for (const ReliabilityBin& b : table.bins) {
    out << b.bin_id << ',' << b.class_index << ',' << b.lo << ',' << b.hi << ','
        << b.count << ',' << b.mean_confidence << ',' << b.empirical_frequency << ','
        << b.gap << '\n';
  }
}

namespace {

json table_to_json(const ReliabilityTable& table) {
  json bins = json::array();
  for (const ReliabilityBin& b : table.bins) {
    bins.push_back({{"bin_id", b.bin_id},
                    {"class_index", b.class_index},
                    {"lo", b.lo},
                    {"hi", b.hi},
                    {"count", b.count},
                    {"mean_confidence", b.mean_confidence},
                    {"empirical_frequency", b.empirical_frequency},
                    {"gap", b.gap}});
  }
  json j = {{"paradigm", to_string(table.paradigm)},
            {"sample_count", table.sample_count},
            {"bins", bins}};
  if (table.anchors.size() > 0) {
    json anchors = json::array();
    for (int i = 0; i < table.anchors.rows; ++i) {
      json row = json::array();
      for (int c = 0; c < table.anchors.cols; ++c) row.push_back(table.anchors.at(i, c));
      anchors.push_back(row);
    }
    j["anchors"] = anchors;
  }
  return j;
}

}  // namespace

std::string reliability_json(const ReliabilityTable& table) {
  return table_to_json(table).dump(2);
}

std::string report_json(const CalibrationReport& report) {
  json j = {{"schema_version", report.schema_version},
            {"arm", report.arm},
            {"ece", report.ece},
            {"cwece", report.cwece},
            {"canonical_ce", report.canonical_ce},
            {"accuracy", report.accuracy},
            {"delta_acc", report.delta_acc},
            {"seed", report.seed},
            {"config", report.config_echo},
            {"reliability",
             {{"top_label", table_to_json(report.top_label)},
              {"class_wise", table_to_json(report.class_wise)},
              {"canonical", table_to_json(report.canonical)}}}};
  return j.dump(2);
}

void write_report_json(const std::string& path, const CalibrationReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << report_json(report) << '\n';
}

void write_reliability_svg(const std::string& path, const ReliabilityTable& top_label) {
  const int width = 440, height = 440, margin = 40;
  const double plot = width - 2.0 * margin;
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
      << height << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  const int bins = static_cast<int>(top_label.bins.size());
  for (const ReliabilityBin& b : top_label.bins) {
    if (b.count == 0) continue;
    const double x = margin + b.lo * plot;
    const double w = plot / bins;
    const double h = b.empirical_frequency * plot;
    svg << "<rect x='" << x << "' y='" << (height - margin - h) << "' width='" << w
        << "' height='" << h << "' fill='steelblue' stroke='white'/>\n";
  }
  // Diagonal: perfect calibration reference.
  svg << "<line x1='" << margin << "' y1='" << (height - margin) << "' x2='"
      << (margin + plot) << "' y2='" << margin
      << "' stroke='crimson' stroke-dasharray='4,3'/>\n";
  svg << "<line x1='" << margin << "' y1='" << (height - margin) << "' x2='"
      << (margin + plot) << "' y2='" << (height - margin) << "' stroke='black'/>\n";
  svg << "<line x1='" << margin << "' y1='" << (height - margin) << "' x2='" << margin
      << "' y2='" << margin << "' stroke='black'/>\n";
  svg << "<text x='" << (width / 2) << "' y='" << (height - 8)
      << "' text-anchor='middle' font-size='12'>confidence</text>\n";
  svg << "<text x='12' y='" << (height / 2)
      << "' text-anchor='middle' font-size='12' transform='rotate(-90 12 "
      << (height / 2) << ")'>accuracy</text>\n";
  svg << "</svg>\n";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << svg.str();
}

}  // namespace ecl::metrics
