#include "plus/eval/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace plus::eval {

using nlohmann::json;

const char* kCsvHeader =
    "method,lesion_f1,lesion_precision,lesion_recall,"
    "malignant_f1,malignant_precision,malignant_recall,"
    "benign_f1,benign_precision,benign_recall,"
    "screening_f1,screening_accuracy,"
    "lesion_accuracy_matched,prior_accuracy_matched,lesion_macro_f1";

namespace {

json prf_json(const Prf& p) {
  return {{"f1", p.f1},        {"precision", p.precision}, {"recall", p.recall},
          {"tp", p.tp},        {"fp", p.fp},               {"fn", p.fn}};
}

}  // namespace

std::string report_to_json(const MetricsReport& rep, const std::string& label) {
  json per_class = json::array();
  for (double a : rep.per_class_auc) {
    if (std::isnan(a)) {
      per_class.push_back(nullptr);
    } else {
      per_class.push_back(a);
    }
  }
  json roc = json::array();
  for (const auto& p : rep.screening_roc) {
    roc.push_back({{"threshold", p.threshold}, {"tpr", p.tpr}, {"fpr", p.fpr}});
  }
  json j = {
      {"method", label},
      {"lesion_level", prf_json(rep.lesion_detection)},
      {"lesion_accuracy_matched", rep.lesion_accuracy_matched},
      {"prior_accuracy_matched", rep.prior_accuracy_matched},
      {"lesion_macro_f1", rep.lesion_macro_f1},
      {"patient_level",
       {{"malignant", prf_json(rep.patient_malignant)},
        {"benign", prf_json(rep.patient_benign)}}},
      {"screening",
       {{"f1", rep.screening.f1},
        {"precision", rep.screening.precision},
        {"recall", rep.screening.recall},
        {"accuracy", rep.screening_accuracy}}},
      {"per_class_auc", per_class},
      {"confusion_matrix", rep.confusion},
      {"counts",
       {{"matched", rep.matched},
        {"candidates", rep.candidates},
        {"gt_lesions", rep.gt_lesions},
        {"patients", rep.patients},
        {"skipped_cases", rep.skipped_cases}}},
      {"screening_roc", roc},
  };
  return j.dump(2);
}

std::string report_to_csv_row(const MetricsReport& rep, const std::string& label) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << label << "," << rep.lesion_detection.f1 << "," << rep.lesion_detection.precision << ","
     << rep.lesion_detection.recall << "," << rep.patient_malignant.f1 << ","
     << rep.patient_malignant.precision << "," << rep.patient_malignant.recall << ","
     << rep.patient_benign.f1 << "," << rep.patient_benign.precision << ","
     << rep.patient_benign.recall << "," << rep.screening.f1 << "," << rep.screening_accuracy
     << "," << rep.lesion_accuracy_matched << "," << rep.prior_accuracy_matched << ","
     << rep.lesion_macro_f1;
  return os.str();
}

void write_report_files(const std::filesystem::path& dir, const MetricsReport& rep,
                        const std::string& label) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.json");
    if (!out) throw DataError("cannot write " + (dir / "metrics.json").string());
    out << report_to_json(rep, label) << "\n";
  }
  {
    std::ofstream out(dir / "metrics.csv");
    if (!out) throw DataError("cannot write " + (dir / "metrics.csv").string());
    out << kCsvHeader << "\n" << report_to_csv_row(rep, label) << "\n";
  }
  {
    std::ofstream out(dir / "roc.tsv");
    if (!out) throw DataError("cannot write " + (dir / "roc.tsv").string());
    out << "threshold\ttpr\tfpr\n";
    out.precision(6);
    out << std::fixed;
    for (const auto& p : rep.screening_roc) {
      out << p.threshold << "\t" << p.tpr << "\t" << p.fpr << "\n";
    }
  }
}

}  // namespace plus::eval
