// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include "ppe_cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "ppe/eds.hpp"
#include "ppe/error.hpp"
#include "ppe/io.hpp"
#include "ppe/lab.hpp"
#include "ppe/label_codec.hpp"
#include "ppe/losses.hpp"
#include "ppe/metrics.hpp"
#include "ppe/panoptic.hpp"

namespace ppe::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Collects the artifacts of one invocation. Every artifact gets a
// `<path>.meta.json` sidecar with the tool version and the invocation, so
// the artifact bytes themselves carry nothing run-specific.
class Context {
 public:
  Context(std::string command, std::vector<std::string> args)
      : command_(std::move(command)), args_(std::move(args)) {}

  const std::string& command() const { return command_; }

  void write(const fs::path& path, std::span<const std::uint8_t> bytes,
             const std::string& format) {
    write_file_atomic(path, bytes);
    write_meta(path, format);
  }

  void write(const fs::path& path, const std::string& text, const std::string& format) {
    write_file_atomic(path, std::string_view(text));
    write_meta(path, format);
  }

  Json outputs() const { return outputs_; }

 private:
  void write_meta(const fs::path& path, const std::string& format) {
    Json meta = {{"tool", "ppe"},
                 {"version", kToolVersion},
                 {"field_format_version", kFieldVersion},
                 {"command", command_},
                 {"arguments", args_},
                 {"format", format}};
    write_file_atomic(fs::path(path.string() + ".meta.json"),
                      std::string_view(meta.dump(2) + "\n"));
    outputs_.push_back(path.string());
  }

  std::string command_;
  std::vector<std::string> args_;
  Json outputs_ = Json::array();
};

struct CodecFlags {
  std::string encoding = "pe";
  int harmonics = 4;
  std::string grid = "80x80";
};

struct EdsFlags {
  double w_min = 0.0;
  double falloff = 20.0;
  bool disabled = false;
};

struct FusionFlags {
  int min_area = 0;
  CLI::Option* min_area_opt = nullptr;
  double merge_radius = 1.5;
  std::string categories;
};

void add_codec_flags(CLI::App* app, CodecFlags& f, bool with_encoding) {
  if (with_encoding) {
    app->add_option("--encoding", f.encoding,
                    "pe: sinusoidal embedding of the centroid; direct: (u, v, 1) "
                    "in [0,1] regressed with mean absolute error")
        ->check(CLI::IsMember({"pe", "direct"}))
        ->capture_default_str();
  }
  app->add_option("--L", f.harmonics,
                  "Frequency bands of gamma(p) = (sin(2^l pi p), cos(2^l pi p)), l < L")
      ->check(CLI::Range(1, 30))
      ->capture_default_str();
  app->add_option("--grid", f.grid, "Decoding grid of cell-centre candidates, HxW")
      ->capture_default_str();
}

void add_eds_flags(CLI::App* app, EdsFlags& f) {
  app->add_option("--w-min", f.w_min,
                  "Weight floor in w = w_min + (1 - w_min) exp(-d^2 / D^2)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app->add_option("--D", f.falloff, "Falloff distance D in pixels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_fusion_flags(CLI::App* app, FusionFlags& f) {
  f.min_area_opt = app->add_option(
      "--min-area", f.min_area,
      "Smallest kept instance in pixels (default max(32, ceil(0.0005 H W)))");
  f.min_area_opt->check(CLI::PositiveNumber);
  app->add_option("--merge-radius", f.merge_radius,
                  "Cell groups whose centres lie within this many cells of a larger "
                  "kept group are merged into it")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

PEConfig parse_grid(const CodecFlags& f) {
  const auto x = f.grid.find('x');
  if (x == std::string::npos) throw DomainError("--grid must look like HxW, got " + f.grid);
  PEConfig cfg;
  cfg.harmonics = f.harmonics;
  const auto parse_int = [&](std::string_view s, int& v) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw DomainError("--grid must look like HxW, got " + f.grid);
    }
  };
  const std::string_view text(f.grid);
  parse_int(text.substr(0, x), cfg.grid_h);
  parse_int(text.substr(x + 1), cfg.grid_w);
  cfg.validate();
  return cfg;
}

EDSConfig eds_config(const EdsFlags& f) {
  EDSConfig cfg;
  cfg.w_min = f.w_min;
  cfg.falloff = f.falloff;
  cfg.validate();
  return cfg;
}

FusionConfig fusion_config(const FusionFlags& f) {
  FusionConfig cfg;
  if (*f.min_area_opt) cfg.min_instance_area = f.min_area;
  cfg.merge_radius = f.merge_radius;
  cfg.validate();
  return cfg;
}

IdMap load_png(const std::string& path) { return read_panoptic_png(read_file(path)); }

Field load_field(const std::string& path) { return read_field(read_file(path)); }

std::string load_text(const std::string& path) {
  const Bytes bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

fs::path segment_table_path(const fs::path& png) {
  fs::path p = png;
  p.replace_extension(".json");
  return p;
}

Json summary(const PQSummary& s) {
  return {{"pq", s.pq}, {"sq", s.sq}, {"rq", s.rq}, {"categories", s.categories}};
}

/// Things are the lower half of the classes, stuff the upper half.
CategoryTable default_categories(int classes) {
  std::vector<Category> cats;
  const int things = (classes + 1) / 2;
  for (int k = 1; k <= classes; ++k) {
    cats.push_back({static_cast<std::uint32_t>(k), "class" + std::to_string(k), k <= things});
  }
  return CategoryTable(std::move(cats));
}

struct Command {
  CLI::App* app = nullptr;
  std::function<Json(Context&)> handler;
};

// ---------------------------------------------------------------- encode

Command add_encode(CLI::App& root) {
  auto* app = root.add_subcommand(
      "encode",
      "Instance PNG -> per-pixel target field. Each pixel receives the embedding "
      "(gamma(u), gamma(v)) of its instance centroid; void pixels are zero.");
  auto flags = std::make_shared<CodecFlags>();
  auto input = std::make_shared<std::string>();
  auto output = std::make_shared<std::string>();
  add_codec_flags(app, *flags, true);
  app->add_option("--instances", *input, "Instance id PNG (id = R + 256 G + 65536 B)")
      ->required();
  app->add_option("-o,--output", *output, "Output field file")->required();
  return {app, [=](Context& ctx) {
            const PEConfig cfg = parse_grid(*flags);
            const IdMap inst = load_png(*input);
            const Field target =
                flags->encoding == "direct" ? encode_rgb_direct(inst) : encode_pe(inst, cfg);
            ctx.write(*output, write_field(target), "field");
            return Json{{"channels", target.channels()},
                        {"height", target.height()},
                        {"width", target.width()},
                        {"instances", instance_centroids(inst).size()}};
          }};
}

// ---------------------------------------------------------------- decode

Command add_decode(CLI::App& root) {
  auto* app = root.add_subcommand(
      "decode",
      "Field -> map of nearest grid candidates. The distance is the mean of the "
      "Euclidean distances of the u and v halves; ties go to the lowest cell "
      "index and the void candidate (zero vector) comes last.");
  auto flags = std::make_shared<CodecFlags>();
  auto fusion = std::make_shared<FusionFlags>();
  auto input = std::make_shared<std::string>();
  auto output = std::make_shared<std::string>();
  auto group = std::make_shared<bool>(false);
  add_codec_flags(app, *flags, true);
  add_fusion_flags(app, *fusion);
  app->add_option("--pred", *input, "Predicted field")->required();
  app->add_option("-o,--output", *output, "Output PNG (cell index + 1, 0 = void)")
      ->required();
  app->add_flag("--group", *group,
                "Group cells into instances numbered 1..K by size instead of "
                "writing cell indices");
  return {app, [=](Context& ctx) {
            const PEConfig cfg = parse_grid(*flags);
            const FusionConfig fcfg = fusion_config(*fusion);
            const UVGrid grid(cfg);
            const Field pred = load_field(*input);
            const CellMap cells = flags->encoding == "direct" ? decode_rgb_direct(pred, grid)
                                                              : decode_pe(pred, grid);
            const IdMap ids = *group ? cluster_instances(cells, grid, fcfg) : cells.to_id_map();
            ctx.write(*output, write_panoptic_png(ids), "png");
            std::set<std::uint32_t> distinct(ids.ids().begin(), ids.ids().end());
            distinct.erase(kVoidId);
            const auto flags_void = cells.void_flags();
            return Json{{"segments", distinct.size()},
                        {"void_pixels",
                         std::count(flags_void.begin(), flags_void.end(), std::uint8_t{1})}};
          }};
}

// ---------------------------------------------------------------- eds

Command add_eds(CLI::App& root) {
  auto* app = root.add_subcommand(
      "eds",
      "Edge-distance weights w = w_min + (1 - w_min) exp(-d^2 / D^2), where d is "
      "the exact Euclidean distance from a pixel centre to the nearest pixel "
      "with a 4-neighbour of a different id.");
  auto flags = std::make_shared<EdsFlags>();
  auto input = std::make_shared<std::string>();
  auto output = std::make_shared<std::string>();
  auto distance_out = std::make_shared<std::string>();
  add_eds_flags(app, *flags);
  app->add_option("--instances", *input, "Instance id PNG")->required();
  app->add_option("-o,--output", *output, "Output weight field (one channel)")->required();
  app->add_option("--distance-out", *distance_out,
                  "Also write the distance field; without boundaries every "
                  "distance is 2 (H + W) + 1");
  return {app, [=](Context& ctx) {
            const EDSConfig cfg = eds_config(*flags);
            const IdMap inst = load_png(*input);
            const BoundaryMask boundary = boundary_mask(inst);
            const Field distance = distance_transform(boundary);
            const WeightMask weights = eds_weights_from_distance(distance, cfg);
            std::vector<double> values(weights.weights().begin(), weights.weights().end());
            double sum = 0.0;
            for (double w : values) sum += w;
            ctx.write(*output, write_field(Field(1, inst.height(), inst.width(), values)),
                      "field");
            if (!distance_out->empty()) ctx.write(*distance_out, write_field(distance), "field");
            return Json{{"boundary_pixels", boundary.count()},
                        {"weight_sum", sum},
                        {"mean_weight", sum / static_cast<double>(values.size())}};
          }};
}

// ---------------------------------------------------------------- loss

Command add_loss(CLI::App& root) {
  auto* app = root.add_subcommand(
      "loss",
      "Evaluates one loss and optionally writes its gradient. instance: "
      "EDS-weighted mean of the two-half Euclidean distance to the centroid "
      "embedding (mean absolute error for --encoding direct); semantic: "
      "softmax cross-entropy; tv: mean neighbour-difference norm; dice: "
      "soft-overlap loss with p = exp(-||pred - t_l||^2) and weights 1/area.");
  auto kind = std::make_shared<std::string>("instance");
  auto codec = std::make_shared<CodecFlags>();
  auto eds = std::make_shared<EdsFlags>();
  auto pred = std::make_shared<std::string>();
  auto instances = std::make_shared<std::string>();
  auto semantic = std::make_shared<std::string>();
  auto norm = std::make_shared<std::string>("pe");
  auto gradient = std::make_shared<std::string>();
  auto ignore = std::make_shared<std::uint32_t>(0);
  app->add_option("--kind", *kind, "Loss to evaluate")
      ->check(CLI::IsMember({"instance", "semantic", "tv", "dice"}))
      ->capture_default_str();
  add_codec_flags(app, *codec, true);
  add_eds_flags(app, *eds);
  app->add_flag("--no-eds", eds->disabled, "Uniform weights instead of edge-distance weights");
  app->add_option("--pred", *pred, "Predicted field (logits for --kind semantic)")->required();
  app->add_option("--instances", *instances, "Instance id PNG (instance, dice)");
  app->add_option("--semantic", *semantic, "Class index PNG (semantic)");
  auto* ignore_opt = app->add_option("--ignore", *ignore, "Class excluded from cross-entropy");
  app->add_option("--norm", *norm, "Neighbour-difference norm for tv")
      ->check(CLI::IsMember({"l1", "l2", "pe"}))
      ->capture_default_str();
  app->add_option("--gradient", *gradient, "Write d loss / d pred as a field");
  return {app, [=](Context& ctx) {
            const PEConfig cfg = parse_grid(*codec);
            const EDSConfig ecfg = eds_config(*eds);
            const bool needs_instances = *kind == "instance" || *kind == "dice";
            if (needs_instances && instances->empty()) {
              throw DomainError("--kind " + *kind + " requires --instances");
            }
            if (*kind == "semantic" && semantic->empty()) {
              throw DomainError("--kind semantic requires --semantic");
            }
            const Field p = load_field(*pred);
            LossResult result;
            if (*kind == "instance") {
              const IdMap inst = load_png(*instances);
              const WeightMask w = eds->disabled
                                       ? WeightMask::uniform(inst.height(), inst.width(), 1.0)
                                       : eds_weights(inst, ecfg);
              result = codec->encoding == "direct"
                           ? direct_l1_loss(p, encode_rgb_direct(inst), w)
                           : instance_pe_loss(p, encode_pe(inst, cfg), w);
            } else if (*kind == "dice") {
              result = dice_loss(p, load_png(*instances), cfg);
            } else if (*kind == "semantic") {
              const IdMap sem = load_png(*semantic);
              const WeightMask w = WeightMask::uniform(sem.height(), sem.width(), 1.0);
              std::optional<std::uint32_t> ign;
              if (*ignore_opt) ign = *ignore;
              result = semantic_ce_loss(p, sem, w, ign);
            } else {
              const TvNorm n = *norm == "l1"   ? TvNorm::kL1
                               : *norm == "l2" ? TvNorm::kL2
                                               : TvNorm::kPositional;
              result = tv_loss_regression(p, n);
            }
            if (!gradient->empty()) {
              ctx.write(*gradient, write_field(round_to_float32(result.gradient)), "field");
            }
            return Json{{"kind", *kind}, {"loss", result.value}};
          }};
}

// ---------------------------------------------------------------- fuse

Command add_fuse(CLI::App& root) {
  auto* app = root.add_subcommand(
      "fuse",
      "Semantic logits + instance field -> panoptic PNG and segment table. "
      "Pixels are decoded to grid cells, grouped and merged by radius, small "
      "groups dropped, thing classes assigned by majority vote and stuff "
      "classes collected into one segment each.");
  auto codec = std::make_shared<CodecFlags>();
  auto fusion = std::make_shared<FusionFlags>();
  auto semantic = std::make_shared<std::string>();
  auto instance = std::make_shared<std::string>();
  auto output = std::make_shared<std::string>();
  add_codec_flags(app, *codec, false);
  add_fusion_flags(app, *fusion);
  app->add_option("--semantic", *semantic, "Semantic logits field (channel = class id)")
      ->required();
  app->add_option("--instance", *instance, "Instance embedding field")->required();
  app->add_option("--categories", fusion->categories,
                  "Category JSON; default: classes 1..C-1 split into things (lower "
                  "half) and stuff (upper half)");
  app->add_option("-o,--output", *output,
                  "Output panoptic PNG; the segment table goes to the same stem with .json")
      ->required();
  return {app, [=](Context& ctx) {
            const PEConfig cfg = parse_grid(*codec);
            FusionConfig fcfg = fusion_config(*fusion);
            const UVGrid grid(cfg);
            const Field logits = load_field(*semantic);
            const Field inst = load_field(*instance);
            fcfg.categories = fusion->categories.empty()
                                  ? default_categories(logits.channels() - 1)
                                  : parse_category_table(load_text(fusion->categories));
            const PanopticSeg seg = fuse(logits, inst, grid, fcfg);
            ctx.write(*output, write_panoptic_png(seg.segments), "png");
            ctx.write(segment_table_path(*output), segment_table_json(seg), "json");
            std::int64_t things = 0;
            for (const auto& [id, info] : seg.info) things += info.is_thing ? 1 : 0;
            return Json{{"segments", seg.info.size()},
                        {"things", things},
                        {"stuff", static_cast<std::int64_t>(seg.info.size()) - things}};
          }};
}

// ---------------------------------------------------------------- eval-pq

Command add_eval_pq(CLI::App& root) {
  auto* app = root.add_subcommand(
      "eval-pq",
      "Panoptic quality PQ = sum IoU / (TP + FP/2 + FN/2) with matches at "
      "IoU > 0.5, truth-void pixels left out of the union and unmatched "
      "predictions mostly inside truth void ignored; averaged over categories.");
  auto pred = std::make_shared<std::string>();
  auto truth = std::make_shared<std::string>();
  auto pred_table = std::make_shared<std::string>();
  auto truth_table = std::make_shared<std::string>();
  auto format = std::make_shared<std::string>("json");
  auto output = std::make_shared<std::string>();
  app->add_option("--pred", *pred, "Predicted panoptic PNG")->required();
  app->add_option("--truth", *truth, "Ground-truth panoptic PNG")->required();
  app->add_option("--pred-segments", *pred_table,
                  "Segment table for --pred (default: <stem>.json if present, "
                  "otherwise every id is a segment of category 1)");
  app->add_option("--truth-segments", *truth_table, "Segment table for --truth");
  app->add_option("--format", *format, "Report format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app->add_option("-o,--output", *output, "Report file");
  return {app, [=](Context& ctx) {
            const auto load = [](const std::string& png, const std::string& table) {
              const IdMap ids = load_png(png);
              fs::path path = table;
              if (path.empty()) {
                const fs::path sidecar = segment_table_path(png);
                if (fs::exists(sidecar)) path = sidecar;
              }
              if (path.empty()) return panoptic_from_ids(ids);
              return parse_segment_table(ids, load_text(path.string()));
            };
            const PanopticSeg p = load(*pred, *pred_table);
            const PanopticSeg t = load(*truth, *truth_table);
            const PQReport report = panoptic_quality(p, t);
            if (!output->empty()) {
              ctx.write(*output,
                        *format == "csv" ? pq_report_csv(report) : pq_report_json(report),
                        *format);
            }
            return Json{{"pq", report.pq()},
                        {"sq", report.sq()},
                        {"rq", report.rq()},
                        {"tp", report.tp},
                        {"fp", report.fp},
                        {"fn", report.fn},
                        {"things", report.things ? summary(*report.things) : Json(nullptr)},
                        {"stuff", report.stuff ? summary(*report.stuff) : Json(nullptr)}};
          }};
}

// ---------------------------------------------------------------- synth

Command add_synth(CLI::App& root) {
  auto* app = root.add_subcommand(
      "synth",
      "Seeded synthetic scene: a guillotine tiling into rectangles, some left "
      "void, with circles painted on top.");
  auto options = std::make_shared<RandomSceneOptions>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto instances_out = std::make_shared<std::string>();
  auto semantic_out = std::make_shared<std::string>();
  auto panoptic_out = std::make_shared<std::string>();
  auto categories = std::make_shared<std::string>();
  app->add_option("--seed", *seed, "Scene seed")->capture_default_str();
  app->add_option("--height", options->height, "Image rows")
      ->check(CLI::Range(1, 8192))
      ->capture_default_str();
  app->add_option("--width", options->width, "Image columns")
      ->check(CLI::Range(1, 8192))
      ->capture_default_str();
  app->add_option("--tiles", options->max_tiles, "Number of rectangles before voiding")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();
  app->add_option("--min-tile", options->min_tile, "Smallest rectangle side")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--void-fraction", options->void_fraction, "Probability a tile is void")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app->add_option("--circles", options->circles, "Circles painted over the tiling")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--classes", options->num_classes, "Classes 1..N")
      ->check(CLI::Range(1, 65535))
      ->capture_default_str();
  app->add_option("--instances-out", *instances_out, "Instance id PNG");
  app->add_option("--semantic-out", *semantic_out, "Class index PNG");
  app->add_option("--panoptic-out", *panoptic_out,
                  "Panoptic PNG plus segment table at <stem>.json");
  app->add_option("--categories", *categories,
                  "Category JSON for --panoptic-out (default: lower half things)");
  return {app, [=](Context& ctx) {
            if (instances_out->empty() && semantic_out->empty() && panoptic_out->empty()) {
              throw DomainError("synth needs at least one of --instances-out, "
                                "--semantic-out, --panoptic-out");
            }
            if (2.0 * options->max_radius > std::min(options->height, options->width)) {
              options->max_radius = std::min(options->height, options->width) / 2.0;
              options->min_radius = std::min(options->min_radius, options->max_radius);
            }
            const Scene scene = generate_scene(random_scene_spec(*options, *seed));
            std::optional<CategoryTable> table;
            if (!panoptic_out->empty()) {
              table = categories->empty()
                          ? default_categories(static_cast<int>(options->num_classes))
                          : parse_category_table(load_text(*categories));
            }
            if (!instances_out->empty()) {
              ctx.write(*instances_out, write_panoptic_png(scene.instances), "png");
            }
            if (!semantic_out->empty()) {
              ctx.write(*semantic_out, write_panoptic_png(scene.semantics), "png");
            }
            Json status = {{"instances", instance_centroids(scene.instances).size()}};
            if (table) {
              const PanopticSeg seg = panoptic_from_labels(scene.instances, scene.semantics, *table);
              ctx.write(*panoptic_out, write_panoptic_png(seg.segments), "png");
              ctx.write(segment_table_path(*panoptic_out), segment_table_json(seg), "json");
              status["segments"] = seg.info.size();
            }
            return status;
          }};
}

// ---------------------------------------------------------------- lab

Command add_lab_contrast(CLI::App& root) {
  auto* app = root.add_subcommand(
      "lab-contrast",
      "Largest over smallest pairwise distance among n evenly spaced "
      "coordinates under the direct encoding and under gamma with L bands.");
  auto points = std::make_shared<int>(80);
  auto harmonics = std::make_shared<int>(4);
  auto format = std::make_shared<std::string>("json");
  auto output = std::make_shared<std::string>();
  app->add_option("--points", *points, "Number of coordinates")
      ->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  app->add_option("--L", *harmonics, "Frequency bands")
      ->check(CLI::Range(1, 30))
      ->capture_default_str();
  app->add_option("--format", *format, "Report format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app->add_option("-o,--output", *output, "Report file");
  return {app, [=](Context& ctx) {
            const double direct = contrast_ratio(*points, Encoding::direct());
            const double pe = contrast_ratio(*points, Encoding::positional(*harmonics));
            if (!output->empty()) {
              std::string text;
              if (*format == "csv") {
                std::ostringstream csv;
                csv << "encoding,harmonics,points,ratio\n"
                    << "direct,0," << *points << ',' << Json(direct).dump() << '\n'
                    << "pe," << *harmonics << ',' << *points << ',' << Json(pe).dump() << '\n';
                text = csv.str();
              } else {
                text = Json{{"points", *points},
                            {"harmonics", *harmonics},
                            {"direct", direct},
                            {"pe", pe}}
                           .dump(2) +
                       "\n";
              }
              ctx.write(*output, text, *format);
            }
            return Json{{"points", *points}, {"direct", direct}, {"pe", pe}};
          }};
}

Command add_lab_circles(CLI::App& root) {
  auto* app = root.add_subcommand(
      "lab-circles",
      "Summed edge-distance weight inside a circle of radius 2R over the sum "
      "inside a circle of radius R (side by side on a void background).");
  auto radius = std::make_shared<double>(160.0);
  auto eds = std::make_shared<EdsFlags>();
  auto format = std::make_shared<std::string>("json");
  auto output = std::make_shared<std::string>();
  app->add_option("--R", *radius, "Radius of the small circle (at least 8 D)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_eds_flags(app, *eds);
  app->add_option("--format", *format, "Report format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app->add_option("-o,--output", *output, "Report file");
  return {app, [=](Context& ctx) {
            const EDSConfig cfg = eds_config(*eds);
            const double ratio = circle_weight_ratio(*radius, cfg);
            if (!output->empty()) {
              std::string text;
              if (*format == "csv") {
                text = "R,D,w_min,ratio\n" + Json(*radius).dump() + ',' +
                       Json(cfg.falloff).dump() + ',' + Json(cfg.w_min).dump() + ',' +
                       Json(ratio).dump() + '\n';
              } else {
                text = Json{{"R", *radius}, {"D", cfg.falloff}, {"w_min", cfg.w_min},
                            {"ratio", ratio}}
                           .dump(2) +
                       "\n";
              }
              ctx.write(*output, text, *format);
            }
            return Json{{"R", *radius}, {"D", cfg.falloff}, {"w_min", cfg.w_min},
                        {"ratio", ratio}};
          }};
}

Command add_lab_train(CLI::App& root) {
  auto* app = root.add_subcommand(
      "lab-train",
      "Trains one linear map over instance-hash features on the fixed scene "
      "suite with gradient descent, decodes over the grid and reports mean "
      "best-overlap IoU per instance-area bin.");
  auto codec = std::make_shared<CodecFlags>();
  auto eds = std::make_shared<EdsFlags>();
  auto cfg = std::make_shared<ToyTrainConfig>();
  auto suite_size = std::make_shared<std::size_t>(8);
  auto suite_seed = std::make_shared<std::uint64_t>(20250101);
  auto output = std::make_shared<std::string>();
  auto csv = std::make_shared<std::string>();
  add_codec_flags(app, *codec, true);
  add_eds_flags(app, *eds);
  app->add_flag("--no-eds", eds->disabled, "Uniform instead of edge-distance weights");
  app->add_option("--steps", cfg->steps, "Gradient steps")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--lr", cfg->learning_rate, "Learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--features", cfg->hash_features, "Instance hash features")
      ->check(CLI::Range(1, 4096))
      ->capture_default_str();
  app->add_option("--seed", cfg->seed, "Feature hash seed")->capture_default_str();
  app->add_option("--suite-size", *suite_size, "Scenes in the suite")
      ->check(CLI::Range(1, 10000))
      ->capture_default_str();
  app->add_option("--suite-seed", *suite_seed, "Suite seed")->capture_default_str();
  app->add_option("-o,--output", *output, "JSON series (loss history and IoU bins)");
  app->add_option("--csv", *csv, "IoU-by-size CSV table");
  return {app, [=](Context& ctx) {
            ToyTrainConfig run_cfg = *cfg;
            run_cfg.grid = parse_grid(*codec);
            run_cfg.encoding = codec->encoding == "direct"
                                   ? Encoding::direct()
                                   : Encoding::positional(codec->harmonics);
            run_cfg.use_eds = !eds->disabled;
            run_cfg.eds = eds_config(*eds);
            const auto suite = fixed_suite(*suite_size, *suite_seed);
            const ToyTrainResult result = toy_coupled_train(suite, run_cfg);
            if (!output->empty()) ctx.write(*output, toy_train_json(result, run_cfg), "json");
            if (!csv->empty()) ctx.write(*csv, iou_by_size_csv(result.table), "csv");
            const SizeBin& smallest = result.table.bins.front();
            return Json{{"final_loss", result.loss_history.back()},
                        {"smallest_bin_count", smallest.count},
                        {"smallest_bin_mean_iou",
                         smallest.mean_iou ? Json(*smallest.mean_iou) : Json(nullptr)}};
          }};
}

Json status_line(const std::string& command, const std::string& status) {
  return Json{{"status", status}, {"command", command}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Panoptic segmentation toolkit for centroid embeddings", "ppe");
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  std::vector<Command> commands = {add_encode(app),      add_decode(app),      add_eds(app),
                                   add_loss(app),        add_fuse(app),        add_eval_pq(app),
                                   add_synth(app),       add_lab_contrast(app), add_lab_circles(app),
                                   add_lab_train(app)};

  std::string command;
  const auto fail = [&](int code, const std::string& message) {
    err << "error: " << message << "\n";
    Json status = status_line(command, "error");
    status["exit_code"] = code;
    status["message"] = message;
    out << status.dump() << "\n";
    return code;
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, err, err);
    out << status_line(command, "help").dump() << "\n";
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, err, err);
    out << status_line(command, "help").dump() << "\n";
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    err << kToolVersion << "\n";
    out << status_line(command, "version").dump() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    for (const Command& c : commands) {
      if (c.app->parsed()) command = c.app->get_name();
    }
    return fail(kExitValidation, e.what());
  }

  for (const Command& c : commands) {
    if (!c.app->parsed()) continue;
    command = c.app->get_name();
    try {
      Context ctx(command, args);
      Json status = status_line(command, "ok");
      status["outputs"] = Json::array();
      const Json fields = c.handler(ctx);
      for (const auto& [key, value] : fields.items()) status[key] = value;
      status["outputs"] = ctx.outputs();
      out << status.dump() << "\n";
      return kExitOk;
    } catch (const FormatError& e) {
      return fail(kExitIo, e.what());
    } catch (const IoError& e) {
      return fail(kExitIo, e.what());
    } catch (const std::exception& e) {
      return fail(kExitValidation, e.what());
    }
  }
  return fail(kExitValidation, "no subcommand given");
}

}  // namespace ppe::cli
