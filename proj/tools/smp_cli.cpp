/*
 * Copyright 2026 The SMP Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end: FLOP and receptive-field reports, self-checks,
// training, inference and evaluation.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smp/smp.hpp"

namespace fs = std::filesystem;
using namespace smp;

namespace {

int cmd_flops(const std::string& arch, const std::string& input, bool json) {
  const auto variant = parse_variant(arch);
  const auto report = count_flops(build_runtime_net<float>(variant), parse_shape(input));
  if (json)
    std::cout << to_json(report).dump(2) << "\n";
  else
    std::cout << render_text(report);
  return 0;
}

Network<float> network_from_config(const KeyValues& kv) {
  const ArchConfig cfg = parse_arch_config(kv, train_config_keys());
  return build_variant<float>(cfg.variant, cfg.toy, false);
}

int cmd_rf(const std::string& config) {
  const auto report = receptive_field(network_from_config(read_key_values(config)));
  std::cout << render_text(report);
  std::cout << "receptive field: " << report.rf_h() << "x" << report.rf_w() << "\n";
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed) {
  const std::vector<std::string> suites = suite == "all" ? verify_suites() : std::vector<std::string>{suite};
  bool ok = true;
  for (const auto& s : suites) {
    for (const auto& r : run_verify_suite(s, seed)) {
      std::cout << (r.passed ? "PASS  " : "FAIL  ") << s << ": " << r.name << " (" << r.detail << ")\n";
      ok = ok && r.passed;
    }
  }
  return ok ? 0 : 1;
}

int cmd_equiv(std::size_t splits, std::uint64_t seed, std::size_t size) {
  const auto r = check_oracle(splits, seed, size);
  std::cout << r.name << ": " << r.detail << "\n";
  return r.passed ? 0 : 1;
}

int cmd_train(const std::string& config, std::optional<std::size_t> steps, std::optional<std::uint64_t> seed,
              const std::string& out_dir) {
  TrainConfig cfg = parse_train_config(read_key_values(config));
  if (steps) cfg.steps = *steps;
  if (seed) cfg.seed = *seed;
  validate(cfg);
  fs::create_directories(out_dir);
  std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl");
  if (!metrics) fail(ErrorKind::config, "cannot write to " + out_dir);
  const auto result = train_toy(cfg, [&](const EpochLog& e) {
    metrics << to_json(e).dump() << "\n";
    metrics.flush();
    std::cout << "epoch " << e.epoch << "  step " << e.step << "  loss " << e.loss << "  val mIoU " << e.val.mean_iou
              << "\n";
  });
  save_checkpoint(result.model, (fs::path(out_dir) / "model.smpn").string());

  nlohmann::json report;
  report["variant"] = std::string(to_string(cfg.variant));
  report["seed"] = cfg.seed;
  report["steps"] = cfg.steps;
  report["parameters"] = parameter_count(result.model);
  report["final"] = to_json(result.epochs.back().val);
  report["bn_running_vs_split_batch"] = nlohmann::json::array();
  for (const auto& g : result.bn_gap) report["bn_running_vs_split_batch"].push_back(to_json(g));
  std::ofstream(fs::path(out_dir) / "report.json") << report.dump(2) << "\n";
  std::cout << "saved " << (fs::path(out_dir) / "model.smpn").string() << "\n";
  return 0;
}

int cmd_infer(const std::string& model, const std::string& image, const std::string& out, std::size_t workers) {
  auto net = load_checkpoint(model);
  if (net.training) net = with_mode(std::move(net), false);
  const Tensor<float> x = image_to_tensor(ppm_read(image));
  auto [padded, extents] = zero_pad_to_divisible(x, subsampling_factor(net));
  bool has_split = false;
  for (const auto& l : net.layers) has_split = has_split || l.kind == LayerKind::split;
  const Tensor<float> logits =
      workers > 1 && has_split ? forward_parallel(net, padded, workers) : predict(net, padded);
  if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  pgm_write(out, labels_to_image(argmax_labels(crop_top_left(logits, extents.h, extents.w))));
  return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& truth_dir, std::size_t classes, bool json) {
  std::vector<fs::path> truths;
  for (const auto& e : fs::directory_iterator(truth_dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") truths.push_back(e.path());
  std::sort(truths.begin(), truths.end());
  if (truths.empty()) fail(ErrorKind::argument, "no .pgm files in " + truth_dir);
  IouAccumulator acc(classes);
  for (const auto& t : truths) {
    const fs::path p = fs::path(pred_dir) / t.filename();
    if (!fs::exists(p)) fail(ErrorKind::argument, "missing prediction " + p.string());
    const LabelMap truth = image_to_labels(pgm_read(t.string()));
    check_labels(truth, classes);
    acc.add(image_to_labels(pgm_read(p.string())), truth);
  }
  const auto report = acc.report();
  if (json) {
    std::cout << to_json(report).dump(2) << "\n";
    return 0;
  }
  std::printf("%-8s %12s %12s %8s\n", "class", "intersection", "union", "IoU");
  for (std::size_t c = 0; c < classes; ++c) {
    if (report.iou[c])
      std::printf("%-8zu %12llu %12llu %8.4f\n", c, static_cast<unsigned long long>(report.intersection[c]),
                  static_cast<unsigned long long>(report.union_[c]), *report.iou[c]);
    else
      std::printf("%-8zu %12s %12s %8s\n", c, "-", "-", "absent");
  }
  std::printf("mean IoU over %zu images: %.4f\n", truths.size(), report.mean_iou);
  return 0;
}

int cmd_synth(std::size_t count, std::uint64_t seed, std::size_t size, std::size_t first, const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "labels");
  SynthConfig cfg;
  cfg.height = cfg.width = size;
  cfg.seed = seed;
  for (std::size_t i = 0; i < count; ++i) {
    const auto s = gen_synthetic(cfg, first + i);
    char name[32];
    std::snprintf(name, sizeof name, "%05zu", first + i);
    ppm_write((fs::path(out_dir) / "images" / (std::string(name) + ".ppm")).string(), tensor_to_image(s.image));
    pgm_write((fs::path(out_dir) / "labels" / (std::string(name) + ".pgm")).string(), labels_to_image(s.label));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split-merge pooling toolkit"};
  app.require_subcommand(1);

  std::string arch, input;
  bool flops_json = false;
  auto* flops = app.add_subcommand("flops", "Per-layer GFLOPs of a runtime comparison network");
  flops->add_option("--arch", arch, "maxpool | dilated | split")->required()->check(
      CLI::IsMember({"maxpool", "dilated", "split"}));
  flops->add_option("--input", input, "Input shape NxCxHxW")->required();
  flops->add_flag("--json", flops_json, "Emit JSON");

  std::string rf_config;
  auto* rf = app.add_subcommand("rf", "Receptive field trace of a configured network");
  rf->add_option("--config", rf_config, "key = value config file")->required()->check(CLI::ExistingFile);

  std::string suite = "all";
  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "Run self-checks; nonzero exit on any failure");
  verify->add_option("--suite", suite)->check(CLI::IsMember({"roundtrip", "gradcheck", "oracle", "parallel", "all"}));
  verify->add_option("--seed", verify_seed);

  std::size_t splits = 2, equiv_size = 64;
  std::uint64_t equiv_seed = 0;
  auto* equiv = app.add_subcommand("equiv", "Full-split oracle against the split/merge forward");
  equiv->add_option("--splits", splits, "Number of pooling sites")->required()->check(CLI::Range(1, 4));
  equiv->add_option("--seed", equiv_seed)->required();
  equiv->add_option("--size", equiv_size, "Input extent");

  std::string train_config, train_out;
  std::optional<std::size_t> train_steps;
  std::optional<std::uint64_t> train_seed;
  auto* train = app.add_subcommand("train", "Train a toy network on the synthetic dataset");
  train->add_option("--config", train_config)->required()->check(CLI::ExistingFile);
  train->add_option("--steps", train_steps);
  train->add_option("--seed", train_seed);
  train->add_option("--out", train_out)->required();

  std::string model, image, pred_out;
  std::size_t workers = 1;
  auto* infer = app.add_subcommand("infer", "Segment one PPM image");
  infer->add_option("--model", model)->required()->check(CLI::ExistingFile);
  infer->add_option("--image", image)->required()->check(CLI::ExistingFile);
  infer->add_option("--out", pred_out)->required();
  infer->add_option("--workers", workers)->check(CLI::PositiveNumber);

  std::string pred_dir, truth_dir;
  std::size_t classes = 4;
  bool eval_json = false;
  auto* eval = app.add_subcommand("eval", "IoU of predicted label maps against ground truth");
  eval->add_option("--pred", pred_dir)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--truth", truth_dir)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--classes", classes)->check(CLI::Range(2, 255));
  eval->add_flag("--json", eval_json);

  std::size_t synth_count = 8, synth_size = 80, synth_first = 0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write synthetic images (PPM) and label maps (PGM)");
  synth->add_option("--count", synth_count);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--size", synth_size);
  synth->add_option("--first", synth_first, "Index of the first sample");
  synth->add_option("--out", synth_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*flops) return cmd_flops(arch, input, flops_json);
    if (*rf) return cmd_rf(rf_config);
    if (*verify) return cmd_verify(suite, verify_seed);
    if (*equiv) return cmd_equiv(splits, equiv_seed, equiv_size);
    if (*train) return cmd_train(train_config, train_steps, train_seed, train_out);
    if (*infer) return cmd_infer(model, image, pred_out, workers);
    if (*eval) return cmd_eval(pred_dir, truth_dir, classes, eval_json);
    if (*synth) return cmd_synth(synth_count, synth_seed, synth_size, synth_first, synth_out);
  } catch (const smp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
