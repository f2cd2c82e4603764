#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <istream>
#include <limits>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "teesplit/error.hpp"
#include "teesplit/inversion.hpp"
#include "teesplit/network.hpp"
#include "teesplit/ssim.hpp"

namespace teesplit {

inline constexpr double kDefaultSsimThreshold = 0.2;
inline constexpr double kDefaultSlack = 0.05;

struct PrivacyPoint {
  std::string boundary_label;
  std::size_t boundary = 0;
  double mean_ssim = 0.0;
  std::size_t n_samples = 0;
  std::vector<double> per_sample_ssim;  // empty when loaded from CSV
  std::vector<Tensor> reconstructions;  // only when requested
};

struct PrivacyReport {
  std::string model_name;
  std::vector<PrivacyPoint> per_point;
  double threshold = kDefaultSsimThreshold;
  double slack = kDefaultSlack;
  std::optional<std::string> optimal_boundary;

  std::vector<std::pair<std::string, double>> curve() const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& p : per_point) out.emplace_back(p.boundary_label, p.mean_ssim);
    return out;
  }
};

/// For each point: does it fall at or below `threshold` with every later
/// score at or below `threshold + slack`?
inline std::vector<bool> qualifying_points(const std::vector<double>& scores, double threshold,
                                           double slack) {
  std::vector<bool> ok(scores.size(), false);
  double later_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = scores.size(); i-- > 0;) {
    ok[i] = scores[i] <= threshold && later_max <= threshold + slack;
    later_max = std::max(later_max, scores[i]);
  }
  return ok;
}

/// Earliest boundary whose score is at or below `threshold` and after which
/// every score stays at or below `threshold + slack`.
inline std::optional<std::string> select_optimal_partition(
    const std::vector<std::pair<std::string, double>>& scores, double threshold,
    double slack = kDefaultSlack) {
  if (scores.empty()) throw InvalidArgument("no scores to select from");
  if (!(threshold > 0)) throw InvalidArgument("threshold must be positive");
  if (!(slack >= 0)) throw InvalidArgument("slack must be nonnegative");
  std::vector<double> values;
  for (const auto& s : scores) values.push_back(s.second);
  const auto ok = qualifying_points(values, threshold, slack);
  for (std::size_t i = 0; i < ok.size(); ++i)
    if (ok[i]) return scores[i].first;
  return std::nullopt;
}

struct EvaluateOptions {
  double threshold = kDefaultSsimThreshold;
  double slack = kDefaultSlack;
  bool keep_reconstructions = false;
  unsigned threads = 0;  // 0: hardware concurrency
  std::vector<std::string> only_labels;  // empty: every partition point
};

/// Seed used for the attack on image `image` at layer boundary `point`.
inline std::uint64_t attack_seed(std::uint64_t base, std::size_t point, std::size_t image) {
  return detail::splitmix64(base ^ detail::splitmix64((point << 32) + image + 1));
}

/// Runs the inversion attack at every partition point for every image and
/// scores reconstructions with SSIM.
inline PrivacyReport evaluate_privacy(const Network& net, const std::vector<Tensor>& images,
                                      const AttackConfig& cfg, const SsimParams& params,
                                      const EvaluateOptions& opts = {}) {
  if (images.empty()) throw InvalidArgument("privacy evaluation needs at least one image");
  cfg.validate();
  params.validate();
  for (const auto& img : images)
    if (img.shape() != net.graph().input_shape())
      throw ShapeError("image " + shape_to_string(img.shape()) + " does not match model input " +
                       shape_to_string(net.graph().input_shape()));

  std::vector<PartitionPoint> points;
  if (opts.only_labels.empty()) {
    points = net.graph().partition_points();
  } else {
    for (const auto& p : net.graph().partition_points())
      if (std::find(opts.only_labels.begin(), opts.only_labels.end(), p.label) != opts.only_labels.end())
        points.push_back(p);
    for (const auto& l : opts.only_labels) net.graph().point(l);
  }
  struct Job {
    std::size_t point, image;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < points.size(); ++p)
    for (std::size_t i = 0; i < images.size(); ++i) jobs.push_back({p, i});

  std::vector<double> scores(jobs.size());
  std::vector<Tensor> recons(opts.keep_reconstructions ? jobs.size() : 0);
  auto run = [&](std::size_t j) {
    const auto [p, i] = jobs[j];
    AttackConfig c = cfg;
    c.init_seed = attack_seed(cfg.init_seed, points[p].boundary, i);
    const Tensor exposed = forward_prefix(net, images[i], points[p].boundary);
    AttackResult r = run_inversion(net, points[p].boundary, exposed, c);
    scores[j] = ssim(r.reconstruction, images[i], params);
    if (opts.keep_reconstructions) recons[j] = std::move(r.reconstruction);
  };

  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs.size()));
  if (threads <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run(j);
  } else {
    std::vector<std::future<void>> workers;
    for (unsigned t = 0; t < threads; ++t)
      workers.push_back(std::async(std::launch::async, [&, t] {
        for (std::size_t j = t; j < jobs.size(); j += threads) run(j);
      }));
    for (auto& w : workers) w.get();
  }

  PrivacyReport report;
  report.model_name = net.graph().name();
  report.threshold = opts.threshold;
  report.slack = opts.slack;
  for (std::size_t p = 0; p < points.size(); ++p) {
    PrivacyPoint pt;
    pt.boundary_label = points[p].label;
    pt.boundary = points[p].boundary;
    pt.n_samples = images.size();
    for (std::size_t i = 0; i < images.size(); ++i) {
      pt.per_sample_ssim.push_back(scores[p * images.size() + i]);
      if (opts.keep_reconstructions) pt.reconstructions.push_back(std::move(recons[p * images.size() + i]));
    }
    pt.mean_ssim = std::accumulate(pt.per_sample_ssim.begin(), pt.per_sample_ssim.end(), 0.0) /
                   static_cast<double>(images.size());
    report.per_point.push_back(std::move(pt));
  }
  if (!report.per_point.empty())
    report.optimal_boundary = select_optimal_partition(report.curve(), opts.threshold, opts.slack);
  return report;
}

/// Spearman rank correlation (average ranks for ties).
inline double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("need two equal-length samples");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0 || db == 0) return 0.0;
  return num / std::sqrt(da * db);
}

// CSV: boundary,label,mean_ssim,n_samples,below_threshold

inline void write_privacy_csv(std::ostream& os, const PrivacyReport& r) {
  os << "boundary,label,mean_ssim,n_samples,below_threshold\n";
  for (const auto& p : r.per_point) {
    std::ostringstream v;
    v << std::setprecision(10) << p.mean_ssim;
    os << p.boundary << ',' << p.boundary_label << ',' << v.str() << ',' << p.n_samples << ','
       << (p.mean_ssim <= r.threshold ? 1 : 0) << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

/// Reads a report written by write_privacy_csv and re-selects the optimal
/// boundary with the given threshold and slack.
inline PrivacyReport read_privacy_csv(std::istream& is, const std::string& model_name,
                                      double threshold = kDefaultSsimThreshold,
                                      double slack = kDefaultSlack) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("empty privacy report");
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected{"boundary", "label", "mean_ssim", "n_samples",
                                          "below_threshold"};
  if (header != expected) throw InvalidArgument("unexpected privacy report header: " + line);
  PrivacyReport r;
  r.model_name = model_name;
  r.threshold = threshold;
  r.slack = slack;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 5) throw InvalidArgument("privacy report row " + std::to_string(row) + " malformed");
    PrivacyPoint p;
    try {
      p.boundary = std::stoul(cells[0]);
      p.boundary_label = cells[1];
      p.mean_ssim = std::stod(cells[2]);
      p.n_samples = std::stoul(cells[3]);
    } catch (const std::exception&) {
      throw InvalidArgument("privacy report row " + std::to_string(row) + " malformed");
    }
    if (!(p.mean_ssim >= -1.0 && p.mean_ssim <= 1.0))
      throw InvalidArgument("privacy report row " + std::to_string(row) + ": SSIM outside [-1, 1]");
    r.per_point.push_back(std::move(p));
  }
  if (r.per_point.empty()) throw InvalidArgument("privacy report has no rows");
  r.optimal_boundary = select_optimal_partition(r.curve(), threshold, slack);
  return r;
}

}  // namespace teesplit
