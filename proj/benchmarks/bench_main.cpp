// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "ppe/eds.hpp"
#include "ppe/lab.hpp"
#include "ppe/label_codec.hpp"
#include "ppe/losses.hpp"
#include "ppe/metrics.hpp"
#include "ppe/panoptic.hpp"

namespace ppe {
namespace {

Scene scene_of_size(int side) {
  RandomSceneOptions options;
  options.height = side;
  options.width = side;
  options.max_tiles = 40;
  options.circles = 10;
  options.max_radius = side / 8.0;
  return generate_scene(random_scene_spec(options, 17));
}

void BM_DistanceTransform(benchmark::State& state) {
  const Scene s = scene_of_size(static_cast<int>(state.range(0)));
  const BoundaryMask b = boundary_mask(s.instances);
  for (auto _ : state) benchmark::DoNotOptimize(distance_transform(b));
  state.SetItemsProcessed(state.iterations() * s.instances.size());
}
BENCHMARK(BM_DistanceTransform)->Arg(256)->Arg(1008)->Unit(benchmark::kMillisecond);

void BM_EncodePe(benchmark::State& state) {
  const Scene s = scene_of_size(static_cast<int>(state.range(0)));
  const PEConfig cfg = PEConfig::coco();
  for (auto _ : state) benchmark::DoNotOptimize(encode_pe(s.instances, cfg));
  state.SetItemsProcessed(state.iterations() * s.instances.size());
}
BENCHMARK(BM_EncodePe)->Arg(480)->Unit(benchmark::kMillisecond);

void BM_DecodePe(benchmark::State& state) {
  const Scene s = scene_of_size(static_cast<int>(state.range(0)));
  const UVGrid grid(PEConfig::coco());
  const Field pred = encode_pe(s.instances, grid.config());
  for (auto _ : state) benchmark::DoNotOptimize(decode_pe(pred, grid));
  state.SetItemsProcessed(state.iterations() * s.instances.size());
}
BENCHMARK(BM_DecodePe)->Arg(480)->Unit(benchmark::kMillisecond);

void BM_InstanceLossWithGradient(benchmark::State& state) {
  const Scene s = scene_of_size(static_cast<int>(state.range(0)));
  const Field target = encode_pe(s.instances, PEConfig::coco());
  const WeightMask w = eds_weights(s.instances, EDSConfig{});
  const Field pred = Field::zeros(target.channels(), target.height(), target.width());
  for (auto _ : state) benchmark::DoNotOptimize(instance_pe_loss(pred, target, w));
}
BENCHMARK(BM_InstanceLossWithGradient)->Arg(480)->Unit(benchmark::kMillisecond);

void BM_PanopticQuality(benchmark::State& state) {
  const Scene truth = scene_of_size(static_cast<int>(state.range(0)));
  const PanopticSeg t = panoptic_from_ids(truth.instances, 1);
  const UVGrid grid(PEConfig::coco());
  FusionConfig cfg;
  const PanopticSeg p = panoptic_from_ids(
      cluster_instances(decode_pe(encode_pe(truth.instances, grid.config()), grid), grid, cfg), 1);
  for (auto _ : state) benchmark::DoNotOptimize(panoptic_quality(p, t));
}
BENCHMARK(BM_PanopticQuality)->Arg(480)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ppe

BENCHMARK_MAIN();
