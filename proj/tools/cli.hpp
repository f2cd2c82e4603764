#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "teesplit/teesplit.hpp"

namespace teesplit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConstraint = 2;

/// Default seed: PARTITION_SEED when set, else 0.
inline std::uint64_t default_seed() {
  const char* env = std::getenv("PARTITION_SEED");
  if (!env || !*env) return 0;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(std::string("PARTITION_SEED is not an unsigned integer: ") + env);
  }
}

struct Options {
  std::string model = "vgg16";
  std::string input;
  std::uint64_t weights_seed = 0;
  std::uint64_t seed = 0;
  std::string boundary;
  std::string profile;
  std::string privacy;
  double threshold = kDefaultSsimThreshold;
  double slack = kDefaultSlack;
  std::string images;
  std::size_t synthetic = 20;
  std::size_t steps = 2000;
  double step_size = 0.05;
  unsigned threads = 0;
  std::string out;
  std::string svg;
  std::string recon_dir;
  std::string image;
  std::vector<std::string> measurements;
  double full_enclave = 0;
  double full_accel = 0;
};

namespace detail {

inline std::string fixed(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline std::optional<Shape> input_override(const Options& o) {
  if (o.input.empty()) return std::nullopt;
  return parse_shape(o.input);
}

inline Network load_network(const Options& o, const std::optional<Shape>& shape) {
  return Network::initialize(resolve_model(o.model, shape), o.weights_seed);
}

// Sends text to --out (atomically) when given, else to `out`.
inline void emit(const Options& o, std::ostream& out, const std::string& text) {
  if (o.out.empty())
    out << text;
  else
    write_text_atomically(o.out, text);
}

inline std::vector<Tensor> attack_images(const Options& o, std::optional<Shape>& shape) {
  if (!o.images.empty()) {
    auto imgs = load_image_dir(o.images);
    // Built-in architectures adopt the image size unless --input says otherwise.
    if (!shape) shape = imgs.front().shape();
    return imgs;
  }
  if (o.synthetic == 0) throw InvalidArgument("--synthetic must be positive");
  const Shape s = shape ? *shape : resolve_model(o.model).input_shape();
  std::vector<Tensor> imgs;
  for (std::size_t i = 0; i < o.synthetic; ++i) imgs.push_back(synthetic_image(s, o.seed * 1000003ULL + i));
  return imgs;
}

inline PrivacyReport run_attacks(const Options& o, bool all_points) {
  std::optional<Shape> shape = input_override(o);
  const auto images = attack_images(o, shape);
  const Network net = load_network(o, shape);
  AttackConfig cfg;
  cfg.steps = o.steps;
  cfg.step_size = o.step_size;
  cfg.init_seed = o.seed;
  EvaluateOptions eo;
  eo.threshold = o.threshold;
  eo.slack = o.slack;
  eo.threads = o.threads;
  eo.keep_reconstructions = !o.recon_dir.empty();
  if (!all_points && !o.boundary.empty()) eo.only_labels = {o.boundary};
  PrivacyReport r = evaluate_privacy(net, images, cfg, SsimParams{}, eo);
  if (!o.recon_dir.empty()) {
    std::filesystem::create_directories(o.recon_dir);
    for (const auto& p : r.per_point)
      for (std::size_t i = 0; i < p.reconstructions.size(); ++i) {
        const auto path = std::filesystem::path(o.recon_dir) /
                          (p.boundary_label + "_" + std::to_string(i) + ".tensor");
        write_file_atomically(path, [&](std::ostream& os) { write_tensor(os, p.reconstructions[i]); });
      }
  }
  return r;
}

inline std::string privacy_csv(const PrivacyReport& r) {
  std::ostringstream os;
  write_privacy_csv(os, r);
  return os.str();
}

inline PrivacyReport load_privacy(const Options& o, const std::string& model_name) {
  std::ifstream in(o.privacy);
  if (!in) throw LookupError("cannot open privacy report " + o.privacy);
  return read_privacy_csv(in, model_name, o.threshold, o.slack);
}

inline std::vector<LineChart> report_charts(const PartitionPlan& plan, double threshold) {
  LineChart privacy{"Reconstruction SSIM by partition point", "mean SSIM", {}, {}, threshold};
  LineChart runtime{"Predicted runtime by partition point", "seconds", {}, {}, plan.full_enclave_seconds};
  ChartSeries ssim_s{"mean SSIM", "#1f77b4", {}};
  ChartSeries total_s{"partitioned total", "#2ca02c", {}};
  ChartSeries enclave_s{"enclave prefix", "#ff7f0e", {}};
  for (const auto& a : plan.alternatives) {
    privacy.x_labels.push_back(a.boundary_label);
    runtime.x_labels.push_back(a.boundary_label);
    ssim_s.values.push_back(a.mean_ssim);
    total_s.values.push_back(a.breakdown.total_seconds);
    enclave_s.values.push_back(a.breakdown.enclave_seconds);
  }
  privacy.series = {ssim_s};
  runtime.series = {total_s, enclave_s};
  return {privacy, runtime};
}

// --- subcommands -----------------------------------------------------------

inline int cmd_build(const Options& o, std::ostream& out) {
  emit(o, out, to_json(resolve_model(o.model, input_override(o))).dump(2) + "\n");
  return kExitOk;
}

inline int cmd_enumerate(const Options& o, std::ostream& out) {
  const ModelGraph g = resolve_model(o.model, input_override(o));
  const TransferModel& t = builtin_transfer_model();
  std::ostringstream os;
  os << "label,boundary,enclave_units,accelerator_units,exposed_shape,exposed_bytes,transfer_seconds\n";
  for (const auto& a : enumerate_partitions(g))
    os << a.boundary_label << ',' << a.boundary << ',' << format_units(a.enclave_units) << ','
       << format_units(a.accelerator_units) << ',' << shape_to_string(a.exposed_tensor_shape) << ','
       << a.exposed_tensor_bytes << ',' << fixed(t.seconds(a.exposed_tensor_bytes), 4) << '\n';
  emit(o, out, os.str());
  return kExitOk;
}

inline int cmd_calibrate(const Options& o, std::ostream& out) {
  const ModelGraph g = resolve_model(o.model, input_override(o));
  std::vector<std::pair<std::string, double>> ms;
  for (const auto& m : o.measurements) {
    const auto eq = m.rfind('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("--measure expects LABEL=SECONDS, got '" + m + "'");
    try {
      ms.emplace_back(m.substr(0, eq), std::stod(m.substr(eq + 1)));
    } catch (const std::logic_error&) {
      throw InvalidArgument("--measure expects LABEL=SECONDS, got '" + m + "'");
    }
  }
  const CostProfile p = calibrate(g, ms, o.full_enclave, o.full_accel, builtin_transfer_model());
  emit(o, out, to_json(p).dump(2) + "\n");
  return kExitOk;
}

inline int cmd_predict(const Options& o, std::ostream& out) {
  const ModelGraph g = resolve_model(o.model, input_override(o));
  const CostProfile p = load_profile(o.profile.empty() ? "builtin:" + o.model : o.profile);
  std::ostringstream os;
  os << "label,enclave_seconds,transfer_seconds,accelerator_seconds,total_seconds,full_enclave_seconds,speedup_percent\n";
  for (const auto& a : enumerate_partitions(g)) {
    if (!o.boundary.empty() && a.boundary_label != o.boundary) continue;
    const auto b = predict(p, a);
    os << b.boundary_label << ',' << fixed(b.enclave_seconds, 4) << ',' << fixed(b.transfer_seconds, 4) << ','
       << fixed(b.accelerator_seconds, 4) << ',' << fixed(b.total_seconds, 4) << ','
       << fixed(p.full_enclave_seconds, 4) << ',' << fixed(b.speedup_vs_full_enclave * 100.0, 2) << '\n';
  }
  if (!o.boundary.empty()) g.point(o.boundary);
  emit(o, out, os.str());
  return kExitOk;
}

inline int cmd_attack(const Options& o, std::ostream& out, bool all_points, std::ostream& err) {
  const PrivacyReport r = run_attacks(o, all_points);
  emit(o, out, privacy_csv(r));
  if (all_points)
    err << "optimal partition point: " << r.optimal_boundary.value_or("none (run fully in the enclave)") << '\n';
  if (!o.svg.empty()) {
    LineChart c{"Reconstruction SSIM by partition point", "mean SSIM", {}, {}, o.threshold};
    ChartSeries s{"mean SSIM", "#1f77b4", {}};
    for (const auto& p : r.per_point) {
      c.x_labels.push_back(p.boundary_label);
      s.values.push_back(p.mean_ssim);
    }
    c.series = {s};
    write_file_atomically(o.svg, [&](std::ostream& os) { write_svg(os, {c}); });
  }
  return kExitOk;
}

inline PartitionPlan make_plan(const Options& o) {
  if (o.privacy.empty()) throw InvalidArgument("--privacy is required");
  const ModelGraph g = resolve_model(o.model, input_override(o));
  const CostProfile p = load_profile(o.profile.empty() ? "builtin:" + o.model : o.profile);
  return plan(make_plan_request(g, p, load_privacy(o, g.name()), o.threshold, o.slack));
}

inline int cmd_plan(const Options& o, std::ostream& out, std::ostream& err) {
  const PartitionPlan pl = make_plan(o);
  std::ostringstream os;
  write_plan_csv(os, {pl});
  emit(o, out, os.str());
  if (!pl.feasible()) {
    err << "no private partition: every boundary fails the SSIM rule; run the whole model in the enclave\n";
    return kExitConstraint;
  }
  return kExitOk;
}

inline int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
  const PartitionPlan pl = make_plan(o);
  std::ostringstream os;
  os << "label,mean_ssim,feasible,enclave_seconds,transfer_seconds,accelerator_seconds,total_seconds,speedup_percent,chosen\n";
  for (const auto& a : pl.alternatives)
    os << a.boundary_label << ',' << fixed(a.mean_ssim, 6) << ',' << (a.feasible ? 1 : 0) << ','
       << fixed(a.breakdown.enclave_seconds, 4) << ',' << fixed(a.breakdown.transfer_seconds, 4) << ','
       << fixed(a.breakdown.accelerator_seconds, 4) << ',' << fixed(a.breakdown.total_seconds, 4) << ','
       << fixed(a.breakdown.speedup_vs_full_enclave * 100.0, 2) << ','
       << (pl.chosen_boundary == a.boundary_label ? 1 : 0) << '\n';
  emit(o, out, os.str());
  if (!o.svg.empty())
    write_file_atomically(o.svg, [&](std::ostream& s) { write_svg(s, report_charts(pl, o.threshold)); });
  err << plan_csv_row(pl) << '\n';
  return pl.feasible() ? kExitOk : kExitConstraint;
}

inline int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.boundary.empty()) throw InvalidArgument("--boundary is required");
  std::optional<Shape> shape = input_override(o);
  std::optional<Tensor> input;
  if (!o.image.empty()) {
    input = load_image(o.image);
    if (!shape) shape = input->shape();
  }
  const Network net = load_network(o, shape);
  if (!input) input = synthetic_image(net.graph().input_shape(), o.seed);
  std::optional<CostProfile> profile;
  if (!o.profile.empty()) profile = load_profile(o.profile);
  const auto r = simulate_pipeline(net, o.boundary, *input, profile ? &*profile : nullptr);
  std::ostringstream os;
  write_ledger_csv(os, r.ledger);
  out << os.str();
  if (r.breakdown)
    err << "predicted: enclave " << fixed(r.breakdown->enclave_seconds, 4) << " s, transfer "
        << fixed(r.breakdown->transfer_seconds, 4) << " s, accelerator "
        << fixed(r.breakdown->accelerator_seconds, 4) << " s, total " << fixed(r.breakdown->total_seconds, 4)
        << " s, speedup " << fixed(r.breakdown->speedup_vs_full_enclave * 100.0, 2) << "%\n";
  if (!o.out.empty()) write_file_atomically(o.out, [&](std::ostream& s) { write_tensor(s, r.output); });
  return kExitOk;
}

}  // namespace detail

/// Parses `args` (args[0] is the program name) and runs one subcommand.
inline int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Partition CNN inference between a trusted enclave and an untrusted accelerator.", "teesplit"};
  app.require_subcommand(1);
  app.fallthrough(false);

  auto add_model = [&](CLI::App* s) {
    s->add_option("--model", o.model, "architecture name (vgg16, resnet50, efficientnetb0, toy4) or model JSON path");
    s->add_option("--input", o.input, "input shape override, e.g. 3x64x64");
  };
  auto add_weights = [&](CLI::App* s) {
    s->add_option("--weights-seed", o.weights_seed, "seed for the random model weights");
  };
  auto add_rule = [&](CLI::App* s) {
    s->add_option("--threshold", o.threshold, "SSIM threshold")->check(CLI::PositiveNumber);
    s->add_option("--slack", o.slack, "allowed rise above the threshold after the chosen point")
        ->check(CLI::NonNegativeNumber);
  };
  auto add_attack = [&](CLI::App* s) {
    add_model(s);
    add_weights(s);
    add_rule(s);
    s->add_option("--images", o.images, "directory of PGM/PPM or tensor images");
    s->add_option("--synthetic", o.synthetic, "number of synthetic images when --images is absent");
    s->add_option("--steps", o.steps, "inversion steps")->check(CLI::PositiveNumber);
    s->add_option("--step-size", o.step_size, "initial inversion step size")->check(CLI::PositiveNumber);
    s->add_option("--seed", o.seed, "seed for attack initialisation and synthetic images");
    s->add_option("--threads", o.threads, "worker threads (0: all cores)");
    s->add_option("--out", o.out, "write the privacy report CSV here");
    s->add_option("--svg", o.svg, "write an SSIM chart here");
    s->add_option("--recon-dir", o.recon_dir, "save reconstructions as tensors in this directory");
  };

  auto* build = app.add_subcommand("build", "dump the model graph as JSON");
  add_model(build);
  build->add_option("--out", o.out, "output file");

  auto* enumerate = app.add_subcommand("enumerate", "list legal partition points");
  add_model(enumerate);
  enumerate->add_option("--out", o.out, "output CSV");

  auto* calib = app.add_subcommand("calibrate", "fit a cost profile from measured totals");
  add_model(calib);
  calib->add_option("--measure", o.measurements, "LABEL=SECONDS measured total at a boundary")->required();
  calib->add_option("--full-enclave", o.full_enclave, "measured all-enclave runtime (s)")->required();
  calib->add_option("--full-accelerator", o.full_accel, "measured all-accelerator runtime (s)")->required();
  calib->add_option("--out", o.out, "output profile JSON");

  auto* pred = app.add_subcommand("predict", "predicted runtime per partition point");
  add_model(pred);
  pred->add_option("--profile", o.profile, "builtin:<arch> or profile JSON path (default builtin:<model>)");
  pred->add_option("--boundary", o.boundary, "only this partition point");
  pred->add_option("--out", o.out, "output CSV");

  auto* attack = app.add_subcommand("attack", "inversion attack at one partition point (or all)");
  add_attack(attack);
  attack->add_option("--boundary", o.boundary, "partition point label (default: all)");

  auto* eval = app.add_subcommand("evaluate", "inversion attack at every partition point and select the optimum");
  add_attack(eval);

  auto* pl = app.add_subcommand("plan", "recommend the fastest private partition point");
  add_model(pl);
  add_rule(pl);
  pl->add_option("--profile", o.profile, "builtin:<arch> or profile JSON path (default builtin:<model>)");
  pl->add_option("--privacy", o.privacy, "privacy report CSV")->required();
  pl->add_option("--out", o.out, "output CSV");

  auto* sim = app.add_subcommand("simulate", "run the split pipeline and print the trust ledger");
  add_model(sim);
  add_weights(sim);
  sim->add_option("--boundary", o.boundary, "partition point label")->required();
  sim->add_option("--image", o.image, "input image (PGM/PPM or tensor); synthetic when absent");
  sim->add_option("--seed", o.seed, "seed for the synthetic input");
  sim->add_option("--profile", o.profile, "attach predicted runtime from this profile");
  sim->add_option("--out", o.out, "write the output tensor here");

  auto* rep = app.add_subcommand("report", "per-boundary privacy and runtime table with optional SVG");
  add_model(rep);
  add_rule(rep);
  rep->add_option("--profile", o.profile, "builtin:<arch> or profile JSON path (default builtin:<model>)");
  rep->add_option("--privacy", o.privacy, "privacy report CSV")->required();
  rep->add_option("--out", o.out, "output CSV");
  rep->add_option("--svg", o.svg, "output SVG chart");

  try {
    o.weights_seed = o.seed = default_seed();
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*build) return detail::cmd_build(o, out);
    if (*enumerate) return detail::cmd_enumerate(o, out);
    if (*calib) return detail::cmd_calibrate(o, out);
    if (*pred) return detail::cmd_predict(o, out);
    if (*attack) return detail::cmd_attack(o, out, false, err);
    if (*eval) return detail::cmd_attack(o, out, true, err);
    if (*pl) return detail::cmd_plan(o, out, err);
    if (*sim) return detail::cmd_simulate(o, out, err);
    if (*rep) return detail::cmd_report(o, out, err);
  } catch (const LedgerViolation& e) {
    err << "trust boundary violation: " << e.what() << '\n';
    return kExitConstraint;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace teesplit::cli
