#include "durations/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "durations/rng.hpp"
#include "durations/stats.hpp"
#include "durations/version.hpp"

namespace durations {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) {
    --e;
  }
  return s.substr(b, e - b);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

TrialDataset read_dataset_csv(const std::string& path, bool lax) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open dataset file " + path);

  std::string line;
  int line_no = 0;
  size_t col_duration = SIZE_MAX;
  size_t col_cure = SIZE_MAX;

  if (!std::getline(f, line)) {
    throw CsvError(1, "missing header line");
  }
  ++line_no;
  {
    const std::vector<std::string> fields = split_fields(line);
    for (size_t i = 0; i < fields.size(); ++i) {
      const std::string name = lower(fields[i]);
      if (name == "duration") col_duration = i;
      if (name == "cure") col_cure = i;
    }
    if (col_duration == SIZE_MAX || col_cure == SIZE_MAX) {
      throw CsvError(1, "header must name duration and cure columns");
    }
    if (!lax && fields.size() != 2) {
      throw CsvError(1, "expected exactly the duration and cure columns; "
                        "rerun in lax mode to ignore extra columns");
    }
  }

  TrialDataset data;
  while (std::getline(f, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    const size_t needed = std::max(col_duration, col_cure) + 1;
    if (fields.size() < needed) {
      throw CsvError(line_no, "expected at least " + std::to_string(needed) +
                                  " fields, found " +
                                  std::to_string(fields.size()));
    }

    double duration = 0;
    try {
      size_t used = 0;
      duration = std::stod(fields[col_duration], &used);
      if (used != fields[col_duration].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw CsvError(line_no,
                     "invalid duration value '" + fields[col_duration] + "'");
    }
    if (!std::isfinite(duration) || duration <= 0) {
      throw CsvError(line_no, "duration must be positive and finite");
    }

    const std::string& cure = fields[col_cure];
    int outcome;
    if (cure == "0") {
      outcome = 0;
    } else if (cure == "1") {
      outcome = 1;
    } else {
      throw CsvError(line_no, "cure must be 0 or 1, found '" + cure + "'");
    }
    data.records.push_back({duration, outcome});
  }

  if (data.records.empty()) {
    throw std::invalid_argument("dataset " + path + " has no data rows");
  }
  return data;
}

TrialDesign design_from_data(const TrialDataset& data) {
  if (data.records.empty()) {
    throw std::invalid_argument("cannot derive a design from no records");
  }
  std::map<double, int> counts;
  for (const TrialRecord& r : data.records) ++counts[r.duration];

  TrialDesign design;
  for (const auto& [d, n] : counts) {
    design.arms.push_back(d);
    design.allocation.push_back(n);
  }
  design.d_min = design.arms.front();
  design.d_max = design.arms.back();
  design.n_total = static_cast<int>(data.records.size());
  design.validate();
  return design;
}

AnalysisReport analyze_dataset(const TrialDataset& data,
                               const AnalysisOptions& options) {
  validate_target(options.target);
  if (!method_supports(options.method, options.target)) {
    throw std::invalid_argument("method " + method_to_string(options.method) +
                                " cannot address target " +
                                target_to_string(options.target));
  }
  if (!(options.grid_step > 0)) {
    throw std::invalid_argument("grid step must be positive");
  }

  AnalysisReport report;
  report.options = options;
  report.design = design_from_data(data);
  report.curve = select_curve(aggregate(data), options.method_config);

  const RngStream rng = RngStream::from_words({options.seed});
  const MethodConfig& mc = options.method_config;
  switch (options.method) {
    case Method::conf_bands:
      report.recommendation = recommend_conf_bands(report.curve,
                                                   options.target,
                                                   report.design, mc);
      break;
    case Method::delta: {
      TableResult t = recommend_delta_detail(report.curve, options.target,
                                             report.design, mc);
      report.recommendation = t.recommendation;
      report.table = std::move(t.table);
      break;
    }
    case Method::boot_diff: {
      TableResult t = recommend_boot_diff_detail(
          data, report.curve, options.target, report.design, mc, rng);
      report.recommendation = t.recommendation;
      report.table = std::move(t.table);
      break;
    }
    case Method::boot_duration:
      report.recommendation = recommend_boot_duration(
          data, report.curve, options.target, report.design, mc, rng);
      break;
    case Method::gradient_point:
      report.recommendation = recommend_gradient_point(
          report.curve, options.target, report.design);
      break;
  }

  const double z = norm_quantile(0.5 * (1.0 + mc.conf_level));
  const double span = report.design.d_max - report.design.d_min;
  const long count =
      std::max(1l, std::lround(span / options.grid_step));
  for (long i = 0; i <= count; ++i) {
    const double d = i == count
                         ? report.design.d_max
                         : report.design.d_min +
                               options.grid_step * static_cast<double>(i);
    CurvePoint p;
    p.d = d;
    p.pi_hat = report.curve.probability(d);
    if (mc.bands_on_linear_predictor) {
      const double eta = report.curve.linear_predictor(d);
      const double se = report.curve.pointwise_se_eta(d);
      p.lower = expit(eta - z * se);
      p.upper = expit(eta + z * se);
    } else {
      const double se = report.curve.pointwise_se(d);
      p.lower = p.pi_hat - z * se;
      p.upper = p.pi_hat + z * se;
    }
    p.lower = std::clamp(p.lower, 0.0, 1.0);
    p.upper = std::clamp(p.upper, 0.0, 1.0);
    report.curve_points.push_back(p);
  }
  return report;
}

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_report_json(const AnalysisReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");

  nlohmann::json j;
  j["method"] = method_to_string(report.options.method);
  j["target"] = target_to_string(report.options.target);
  j["seed"] = report.options.seed;
  j["version"] = kVersion;
  j["design"] = {{"arms", report.design.arms},
                 {"allocation", report.design.allocation},
                 {"n_total", report.design.n_total}};

  const FittedCurve& c = report.curve;
  std::vector<double> coef(c.coef.data(), c.coef.data() + c.coef.size());
  std::vector<std::vector<double>> cov;
  for (int r = 0; r < c.covariance.rows(); ++r) {
    cov.emplace_back(c.covariance.row(r).begin(), c.covariance.row(r).end());
  }
  j["model"] = {{"powers", c.powers.label()},
                {"coefficients", coef},
                {"covariance", cov},
                {"deviance", c.deviance},
                {"converged", c.converged}};

  const Recommendation& rec = report.recommendation;
  j["recommendation"] = {
      {"recommended_duration", rec.recommended},
      {"d_star_hat", rec.d_star_hat},
      {"ci_lower", rec.ci.first},
      {"ci_upper", rec.ci.second},
      {"diagnostics",
       {{"bootstrap_requested", rec.diagnostics.bootstrap_requested},
        {"bootstrap_dropped", rec.diagnostics.bootstrap_dropped},
        {"bootstrap_retries", rec.diagnostics.bootstrap_retries},
        {"unreliable", rec.diagnostics.unreliable},
        {"clamped", rec.diagnostics.clamped},
        {"degenerate_interval", rec.diagnostics.degenerate_interval},
        {"not_attained", rec.diagnostics.not_attained}}}};

  nlohmann::json table = nlohmann::json::array();
  for (const DurationCiRow& row : report.table) {
    table.push_back({{"duration", row.duration},
                     {"estimate", row.estimate},
                     {"se", row.se},
                     {"lower", row.lower},
                     {"upper", row.upper},
                     {"allowed", row.allowed},
                     {"accepted", row.accepted}});
  }
  j["table"] = table;

  f << j.dump(2) << "\n";
}

void write_curve_csv(const AnalysisReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "d,pi_hat,lower,upper\n";
  for (const CurvePoint& p : report.curve_points) {
    f << fmt_g(p.d) << ',' << fmt_g(p.pi_hat) << ',' << fmt_g(p.lower) << ','
      << fmt_g(p.upper) << "\n";
  }
}

}  // namespace durations
