// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wsod/core/synthetic.hpp"
#include "wsod/core/types.hpp"
#include "wsod/labels/labels.hpp"
#include "wsod/losses/losses.hpp"
#include "wsod/metrics/metrics.hpp"
#include "wsod/nets/nets.hpp"
#include "wsod/refine/pamr.hpp"

// Training loops: classifier pretraining on image-level labels, saliency
// training under one of nine ablation wirings, the full ablation table, and
// the sweep over the filter-agreement weight. Everything is single-threaded
// and deterministic for a fixed (config, seed, dataset).

namespace wsod::trainer {

/// Network sizing for desk-scale (64x64) training: at that input size the
/// stage-5 features are 2x2, where the default filter width only adds wall
/// time, so the trainer narrows the filters. Full-width nets remain one
/// config field away.
// Desk inputs are 64 pixels, a quarter of the full-scale regime the stride
// schedule was sized for; keeping full resolution through the stem leaves the
// deepest features at 4x4 instead of 2x2, which the filter heads need to
// localize objects tens of pixels wide.
inline nets::NetConfig desk_net() {
  nets::NetConfig n;
  n.filter_width = 96;
  n.stem_stride = 1;
  return n;
}

// The classifier additionally scales its logits so scores can clear the
// decision threshold within the fixed step budget.
inline nets::NetConfig desk_classifier_net() {
  nets::NetConfig n = desk_net();
  n.logit_scale = 8.0;
  return n;
}

struct TrainConfig {
  double lr_classifier = 1e-4;
  int iters_classifier = 2000;   // full-scale setups use ~20000
  double lr_saliency = 1e-4;     // desk-scale; see ledger for the choice
  int iters_saliency = 3000;     // full-scale setups use ~26000
  double delta = 2.0;            // weight of the filter-agreement term
  int image_size = 64;           // full-scale setups use 256
  std::uint64_t seed = 1;
  int ablation_case = 9;
  int batch_size = 4;
  bool literal_signed_agreement = false;  // sign convention of the agreement term
  nets::NetConfig net = desk_net();
  nets::NetConfig classifier_net = desk_classifier_net();
  bool classifier_flip = true;    // random horizontal flips during classifier training
  refine::PamrParams guide_pamr;  // refinement producing the decoder's soft target
  std::string log_path;           // JSON-lines per-step loss trace ("" = off)
  std::string checkpoint_dir;     // root for {run_id}/{step}/params ("" = off)
  std::string run_id;             // "" = auto "case<k>-seed<seed>"
  int checkpoint_every = 0;       // extra snapshots every N steps (0 = final only)
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.lr_classifier > 0.0) || !(cfg.lr_saliency > 0.0))
    throw_config("train config: learning rates must be positive");
  if (cfg.iters_classifier < 1 || cfg.iters_saliency < 1)
    throw_config("train config: iteration counts must be >= 1");
  if (cfg.batch_size < 1) throw_config("train config: batch_size must be >= 1");
  if (cfg.ablation_case < 1 || cfg.ablation_case > 9)
    throw_config("train config: ablation_case must be in [1, 9], got " +
                 std::to_string(cfg.ablation_case));
  if (cfg.image_size < 32 || cfg.image_size % 32 != 0)
    throw_config("train config: image_size must be a positive multiple of 32, got " +
                 std::to_string(cfg.image_size));
  if (cfg.checkpoint_every < 0)
    throw_config("train config: checkpoint_every must be >= 0");
  nets::validate_config(cfg.net);
  nets::validate_config(cfg.classifier_net);
}

// ---------------------------------------------------------------------------
// Ablation wiring table. Each case picks which pseudo label feeds which head
// and which architecture variant is instantiated.

enum class LabelSource { y1, y2, avg, intersect, union_mask, both };

inline const char* label_source_name(LabelSource s) {
  switch (s) {
    case LabelSource::y1: return "y1";
    case LabelSource::y2: return "y2";
    case LabelSource::avg: return "avg";
    case LabelSource::intersect: return "intersect";
    case LabelSource::union_mask: return "union";
    case LabelSource::both: return "both";
  }
  return "?";
}

struct AblationSpec {
  int case_id = 9;
  bool uses_df = true;  // any directive filter present
  LabelSource label_source = LabelSource::both;
  nets::Arch architecture = nets::Arch::mdf;
};

inline AblationSpec ablation_spec(int case_id) {
  switch (case_id) {
    case 1: return {1, false, LabelSource::y1, nets::Arch::single_decoder};
    case 2: return {2, false, LabelSource::y2, nets::Arch::single_decoder};
    case 3: return {3, true, LabelSource::y1, nets::Arch::single_df};
    case 4: return {4, true, LabelSource::y2, nets::Arch::single_df};
    case 5: return {5, false, LabelSource::avg, nets::Arch::single_decoder};
    case 6: return {6, false, LabelSource::intersect, nets::Arch::single_decoder};
    case 7: return {7, false, LabelSource::union_mask, nets::Arch::single_decoder};
    case 8: return {8, false, LabelSource::both, nets::Arch::dual_decoder};
    case 9: return {9, true, LabelSource::both, nets::Arch::mdf};
    default:
      throw_config("ablation case must be in [1, 9], got " + std::to_string(case_id));
  }
}

namespace detail {

// Deterministic epoch sampler: Fisher-Yates reshuffle whenever the index pool
// is exhausted. Hand-rolled so the draw sequence does not depend on the
// standard library's unspecified std::shuffle algorithm.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed) : rng_(seed), order_(n) {
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    reshuffle();
  }
  std::size_t next() {
    if (pos_ == order_.size()) reshuffle();
    return order_[pos_++];
  }

 private:
  void reshuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(rng_.uniform_int(0, static_cast<int>(i) - 1));
      std::swap(order_[i - 1], order_[j]);
    }
    pos_ = 0;
  }
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

// JSON-lines writer; the file is truncated at construction so a rerun with
// the same config produces a byte-identical log.
class JsonlLogger {
 public:
  explicit JsonlLogger(const std::string& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw_io("cannot open training log '" + path + "'");
  }
  void write(const nlohmann::ordered_json& j) {
    if (out_.is_open()) out_ << j.dump() << '\n';
  }

 private:
  std::ofstream out_;
};

inline std::string checkpoint_path(const std::string& root, const std::string& run_id,
                                   int step) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", step);
  return root + "/" + run_id + "/" + buf + "/params";
}

inline std::string default_run_id(const TrainConfig& cfg, const char* stage) {
  return std::string(stage) + "-case" + std::to_string(cfg.ablation_case) + "-seed" +
         std::to_string(cfg.seed);
}

inline std::string batch_ids(const std::vector<std::size_t>& batch) {
  std::string ids;
  for (std::size_t i : batch) {
    if (!ids.empty()) ids += ' ';
    ids += std::to_string(i);
  }
  return ids;
}

// Non-finite values during a step (the graph rejects them op-by-op) mean the
// optimization diverged; surface that as a training failure that names the
// step and the batch that triggered it.
[[noreturn]] inline void rethrow_divergence(const Error& e, const char* stage, int step,
                                            const std::vector<std::size_t>& batch,
                                            const std::string& extra = "") {
  throw_training(std::string(stage) + " training diverged at step " +
                 std::to_string(step) + " (batch samples: " + batch_ids(batch) + extra +
                 "): " + e.what());
}

template <typename T>
void maybe_checkpoint(const TrainConfig& cfg, const std::string& run_id,
                      const ndgrad::ParamSet<T>& params, int step, int total_steps) {
  if (cfg.checkpoint_dir.empty()) return;
  const bool due = (step == total_steps) ||
                   (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0);
  if (due) params.save(checkpoint_path(cfg.checkpoint_dir, run_id, step));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Classifier pretraining.

struct ClassifierTrainResult {
  ndgrad::ParamSet<double> params;
  double final_loss = 0.0;      // batch-mean classification loss of the last step
  double train_accuracy = 0.0;  // exact-match multi-label accuracy on the training set
};

/// Multi-label classifier prediction: one bit per category, set when the
/// logit is positive (probability above one half).
template <typename T>
core::CategoryLabel predict_categories(const ndgrad::ParamSet<T>& params,
                                       const core::ImageRGB& image) {
  const std::vector<double> s = nets::classifier_scores(params, image);
  core::CategoryLabel out;
  out.bits.reserve(s.size());
  for (double v : s) out.bits.push_back(v > 0.0 ? 1 : 0);
  return out;
}

inline ClassifierTrainResult train_classifier(const std::vector<core::Sample>& data,
                                              const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (data.empty()) throw_contract("train_classifier: empty dataset");
  const int num_categories = data.front().category.num_categories();
  for (const auto& s : data) {
    if (s.category.num_categories() != num_categories)
      throw_contract("train_classifier: inconsistent category counts");
    if (s.category.count() < 1)
      throw_contract("train_classifier: every sample needs at least one category");
  }

  ClassifierTrainResult res;
  res.params =
      nets::make_classifier_params<double>(cfg.classifier_net, num_categories, cfg.seed);
  const std::string run_id =
      cfg.run_id.empty() ? "classifier-seed" + std::to_string(cfg.seed) : cfg.run_id;
  detail::JsonlLogger log(cfg.log_path);
  detail::EpochSampler sampler(data.size(), mix_seed(cfg.seed, 0xBA7C4ED5u));
  Rng flip_rng(mix_seed(cfg.seed, 0xF11Fu));

  for (int step = 1; step <= cfg.iters_classifier; ++step) {
    ndgrad::Graph<double> g;
    nets::ForwardTrace<double> tr;
    std::vector<int> sample_losses;
    std::vector<std::size_t> batch;
    double loss = 0.0;
    try {
      for (int b = 0; b < cfg.batch_size; ++b) {
        const std::size_t idx = sampler.next();
        batch.push_back(idx);
        const bool flip = cfg.classifier_flip && flip_rng.u01() < 0.5;
        const int img = g.leaf(ndgrad::image_tensor<double>(
            flip ? core::flip_horizontal(data[idx].image) : data[idx].image));
        const auto out = nets::classifier_forward(g, res.params, tr, img, true);
        sample_losses.push_back(
            losses::classification_loss(g, out.scores, data[idx].category).node);
      }
      int acc = sample_losses[0];
      for (std::size_t i = 1; i < sample_losses.size(); ++i)
        acc = g.add(acc, sample_losses[i]);
      const int loss_node = g.mul_scalar(acc, 1.0 / cfg.batch_size);
      loss = g.val(loss_node).value[0];
      g.backward(loss_node);
      res.params.zero_grads();
      tr.collect(g, res.params);
      res.params.adam_step_all(cfg.lr_classifier);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::numeric)
        detail::rethrow_divergence(e, "classifier", step, batch);
      throw;
    }
    res.final_loss = loss;
    log.write({{"step", step}, {"loss_class", loss}});
    detail::maybe_checkpoint(cfg, run_id, res.params, step, cfg.iters_classifier);
  }

  int hits = 0;
  for (const auto& s : data) {
    const core::CategoryLabel pred = predict_categories(res.params, s.image);
    if (pred.bits == s.category.bits) ++hits;
  }
  res.train_accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  return res;
}

// ---------------------------------------------------------------------------
// Saliency training under one ablation wiring.

struct StepTrace {
  int step = 0;
  double loss_f1 = 0.0;     // first filter (or first decoder) supervision
  double loss_f2 = 0.0;     // second filter (or second decoder) supervision
  double loss_guide = 0.0;  // decoder loss against the refined soft target
  double loss_agree = 0.0;  // agreement term between the two predictions
  double loss_total = 0.0;
};

using StepCallback = std::function<void(const StepTrace&)>;

struct SaliencyTrainResult {
  ndgrad::ParamSet<double> params;
  AblationSpec spec;
  StepTrace last;
  int steps = 0;
};

namespace detail {

// Per-sample training target(s) for one ablation case. `a` supervises the
// first head (filter f1 or decoder), `b` the second (filter f2 or decoder 2).
struct CaseTargets {
  core::BinaryMask a;
  core::BinaryMask b;
};

inline CaseTargets case_targets(const labels::LabelPair& pair, LabelSource source) {
  switch (source) {
    case LabelSource::y1: return {pair.y1.mask, {}};
    case LabelSource::y2: return {pair.y2.mask, {}};
    case LabelSource::avg:
      return {labels::fuse(pair.y1.mask, pair.y2.mask, labels::FuseMode::avg).mask, {}};
    case LabelSource::intersect:
      return {labels::fuse(pair.y1.mask, pair.y2.mask, labels::FuseMode::intersect).mask, {}};
    case LabelSource::union_mask:
      return {labels::fuse(pair.y1.mask, pair.y2.mask, labels::FuseMode::union_mask).mask, {}};
    case LabelSource::both: return {pair.y1.mask, pair.y2.mask};
  }
  throw_config("unknown label source");
}

}  // namespace detail

inline SaliencyTrainResult train_mfnet(const std::vector<core::Sample>& data,
                                       const std::vector<labels::LabelPair>& labels,
                                       const TrainConfig& cfg,
                                       const StepCallback& on_step = {}) {
  validate_train_config(cfg);
  if (data.empty()) throw_contract("train_mfnet: empty dataset");
  if (labels.size() != data.size())
    throw_contract("train_mfnet: " + std::to_string(data.size()) + " samples vs " +
                   std::to_string(labels.size()) + " label pairs");

  SaliencyTrainResult res;
  res.spec = ablation_spec(cfg.ablation_case);
  const nets::Arch arch = res.spec.architecture;

  std::vector<detail::CaseTargets> targets;
  targets.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    core::check_same_dims(labels[i].y1.mask.height, labels[i].y1.mask.width,
                          data[i].image.height, data[i].image.width, "train_mfnet labels");
    targets.push_back(detail::case_targets(labels[i], res.spec.label_source));
  }

  res.params = nets::make_mfnet_params<double>(cfg.net, arch, cfg.seed);
  const std::string run_id =
      cfg.run_id.empty() ? detail::default_run_id(cfg, "saliency") : cfg.run_id;
  detail::JsonlLogger log(cfg.log_path);
  detail::EpochSampler sampler(data.size(), mix_seed(cfg.seed, 0x5A11E7C9u));

  for (int step = 1; step <= cfg.iters_saliency; ++step) {
    ndgrad::Graph<double> g;
    nets::ForwardTrace<double> tr;
    std::vector<int> sample_totals;
    std::vector<std::size_t> batch;
    StepTrace trace;
    trace.step = step;

    try {
      for (int b = 0; b < cfg.batch_size; ++b) {
        const std::size_t idx = sampler.next();
        batch.push_back(idx);
        const core::Sample& s = data[idx];
        const detail::CaseTargets& t = targets[idx];
        const int img = g.leaf(ndgrad::image_tensor<double>(s.image));
        const auto out = nets::mfnet_forward(g, res.params, tr, img, cfg.net, arch, true);

        int total_node = -1;
        switch (arch) {
          case nets::Arch::single_decoder: {
            const auto l1 = losses::filter_loss(g, out.ps, t.a);
            trace.loss_f1 += l1.value;
            total_node = l1.node;
            break;
          }
          case nets::Arch::single_df: {
            const auto l1 = losses::filter_loss(g, out.p1, t.a);
            const core::ScoreMap ys = refine::pamr_refine(
                s.image, ndgrad::score_map(g.node_tensor(out.p1)), cfg.guide_pamr);
            const auto lmg = losses::multi_guidance_loss(g, out.ps, ys);
            trace.loss_f1 += l1.value;
            trace.loss_guide += lmg.value;
            total_node = g.add(l1.node, lmg.node);
            break;
          }
          case nets::Arch::dual_decoder: {
            const auto l1 = losses::filter_loss(g, out.ps, t.a);
            const auto l2 = losses::filter_loss(g, out.ps2, t.b);
            // Mutual consistency between the two decoders: symmetric squared
            // difference, gradient flowing into both.
            const auto lagree = losses::self_supervision_loss(g, out.ps, out.ps2, false);
            trace.loss_f1 += l1.value;
            trace.loss_f2 += l2.value;
            trace.loss_agree += lagree.value;
            total_node = g.add(g.add(l1.node, l2.node), lagree.node);
            break;
          }
          case nets::Arch::mdf: {
            const auto l1 = losses::filter_loss(g, out.p1, t.a);
            const auto l2 = losses::filter_loss(g, out.p2, t.b);
            const core::ScoreMap ys =
                labels::make_ys(ndgrad::score_map(g.node_tensor(out.p1)),
                                ndgrad::score_map(g.node_tensor(out.p2)), s.image,
                                cfg.guide_pamr);
            const auto lmg = losses::multi_guidance_loss(g, out.ps, ys);
            const auto lss = losses::self_supervision_loss(g, out.p1, out.p2,
                                                           cfg.literal_signed_agreement);
            trace.loss_f1 += l1.value;
            trace.loss_f2 += l2.value;
            trace.loss_guide += lmg.value;
            trace.loss_agree += lss.value;
            total_node = losses::total_loss(g, l1, l2, lmg, lss, cfg.delta).node;
            break;
          }
        }
        sample_totals.push_back(total_node);
      }

      int acc = sample_totals[0];
      for (std::size_t i = 1; i < sample_totals.size(); ++i) acc = g.add(acc, sample_totals[i]);
      const int loss_node = g.mul_scalar(acc, 1.0 / cfg.batch_size);
      const double inv_b = 1.0 / cfg.batch_size;
      trace.loss_f1 *= inv_b;
      trace.loss_f2 *= inv_b;
      trace.loss_guide *= inv_b;
      trace.loss_agree *= inv_b;
      trace.loss_total = g.val(loss_node).value[0];
      g.backward(loss_node);
      res.params.zero_grads();
      tr.collect(g, res.params);
      res.params.adam_step_all(cfg.lr_saliency);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::numeric)
        detail::rethrow_divergence(
            e, "saliency", step, batch,
            "; component losses so far f1=" + std::to_string(trace.loss_f1) +
                " f2=" + std::to_string(trace.loss_f2) +
                " guide=" + std::to_string(trace.loss_guide) +
                " agree=" + std::to_string(trace.loss_agree));
      throw;
    }

    log.write({{"step", trace.step},
               {"loss_f1", trace.loss_f1},
               {"loss_f2", trace.loss_f2},
               {"loss_guide", trace.loss_guide},
               {"loss_agree", trace.loss_agree},
               {"loss_total", trace.loss_total}});
    if (on_step) on_step(trace);
    res.last = trace;
    res.steps = step;
    detail::maybe_checkpoint(cfg, run_id, res.params, step, cfg.iters_saliency);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation-time prediction. Architectures with one decoder are served by
// the filter-free inference path; the dual-decoder variant averages its two
// heads, which is also its training-time consensus.

inline core::ScoreMap predict_for_eval(const ndgrad::ParamSet<double>& params,
                                       const core::ImageRGB& image,
                                       const nets::NetConfig& net, nets::Arch arch) {
  if (arch == nets::Arch::dual_decoder) {
    const auto maps = nets::mfnet_predict(params, image, net, arch);
    core::ScoreMap out(image.height, image.width);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = 0.5 * (maps.ps.data[i] + maps.ps2.data[i]);
    return out;
  }
  return nets::infer_saliency(params, image, net);
}

/// Mean absolute difference between the two filter predictions, averaged over
/// a dataset; the quantity the agreement-weight sweep reports.
inline double mean_abs_filter_gap(const ndgrad::ParamSet<double>& params,
                                  const std::vector<core::Sample>& data,
                                  const nets::NetConfig& net) {
  if (data.empty()) throw_contract("mean_abs_filter_gap: empty dataset");
  double total = 0.0;
  for (const auto& s : data) {
    const auto maps = nets::mfnet_predict(params, s.image, net, nets::Arch::mdf);
    double acc = 0.0;
    for (std::size_t i = 0; i < maps.p1.data.size(); ++i)
      acc += std::abs(maps.p1.data[i] - maps.p2.data[i]);
    total += acc / static_cast<double>(maps.p1.data.size());
  }
  return total / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Ablation table.

struct AblationRow {
  AblationSpec spec;
  std::uint64_t seed = 0;
  metrics::MetricsReport eval;
  double final_loss = 0.0;
};

struct AblationTable {
  std::vector<int> cases;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;              // one per (case, seed), case-major
  std::map<int, double> mean_f_by_case;       // seed-averaged
  std::map<int, double> mean_mae_by_case;
};

/// Trains every requested case with a shared seed schedule (base seed, base
/// seed + 1, ...) and evaluates each trained model on the held-out split.
inline AblationTable run_ablation(const std::vector<core::Sample>& train,
                                  const std::vector<labels::LabelPair>& train_labels,
                                  const std::vector<core::Sample>& test,
                                  const std::vector<int>& cases, const TrainConfig& base,
                                  int num_seeds = 3,
                                  const std::function<void(const AblationRow&)>& on_row = {}) {
  validate_train_config(base);
  if (cases.empty()) throw_config("run_ablation: no cases requested");
  if (num_seeds < 1) throw_config("run_ablation: num_seeds must be >= 1");
  if (test.empty()) throw_contract("run_ablation: empty held-out split");

  AblationTable table;
  table.cases = cases;
  for (int k = 0; k < num_seeds; ++k) table.seeds.push_back(base.seed + static_cast<std::uint64_t>(k));

  for (int case_id : cases) {
    double f_sum = 0.0, mae_sum = 0.0;
    for (std::uint64_t seed : table.seeds) {
      TrainConfig cfg = base;
      cfg.ablation_case = case_id;
      cfg.seed = seed;
      if (!base.run_id.empty())
        cfg.run_id = base.run_id + "-case" + std::to_string(case_id) + "-seed" +
                     std::to_string(seed);
      const SaliencyTrainResult trained = train_mfnet(train, train_labels, cfg);

      std::vector<core::ScoreMap> preds;
      std::vector<core::BinaryMask> gts;
      preds.reserve(test.size());
      gts.reserve(test.size());
      for (const auto& s : test) {
        preds.push_back(predict_for_eval(trained.params, s.image, cfg.net,
                                         trained.spec.architecture));
        gts.push_back(s.gt_mask);
      }
      AblationRow row;
      row.spec = trained.spec;
      row.seed = seed;
      row.eval = metrics::evaluate(preds, gts,
                                   "case" + std::to_string(case_id) + "-seed" +
                                       std::to_string(seed));
      row.final_loss = trained.last.loss_total;
      f_sum += row.eval.mean_f;
      mae_sum += row.eval.mean_mae;
      if (on_row) on_row(row);
      table.rows.push_back(std::move(row));
    }
    table.mean_f_by_case[case_id] = f_sum / num_seeds;
    table.mean_mae_by_case[case_id] = mae_sum / num_seeds;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Sweep over the agreement weight (always the full multi-filter wiring).

struct DeltaRow {
  double delta = 0.0;
  std::uint64_t seed = 0;
  double filter_gap = 0.0;  // final mean |p1 - p2| over the training split
  metrics::MetricsReport eval;
  double final_loss = 0.0;
};

struct DeltaTable {
  std::vector<double> deltas;
  std::vector<std::uint64_t> seeds;
  std::vector<DeltaRow> rows;               // one per (delta, seed), delta-major
  std::map<double, double> gap_by_delta;    // seed-averaged filter gap
  std::map<double, double> mean_f_by_delta;
};

inline DeltaTable sweep_delta(const std::vector<core::Sample>& train,
                              const std::vector<labels::LabelPair>& train_labels,
                              const std::vector<core::Sample>& test,
                              const std::vector<double>& deltas, const TrainConfig& base,
                              int num_seeds = 3,
                              const std::function<void(const DeltaRow&)>& on_row = {}) {
  validate_train_config(base);
  if (deltas.empty()) throw_config("sweep_delta: no deltas requested");
  if (num_seeds < 1) throw_config("sweep_delta: num_seeds must be >= 1");
  if (test.empty()) throw_contract("sweep_delta: empty held-out split");

  DeltaTable table;
  table.deltas = deltas;
  for (int k = 0; k < num_seeds; ++k) table.seeds.push_back(base.seed + static_cast<std::uint64_t>(k));

  for (double delta : deltas) {
    double gap_sum = 0.0, f_sum = 0.0;
    for (std::uint64_t seed : table.seeds) {
      TrainConfig cfg = base;
      cfg.ablation_case = 9;
      cfg.delta = delta;
      cfg.seed = seed;
      if (!base.run_id.empty())
        cfg.run_id = base.run_id + "-delta" + std::to_string(delta) + "-seed" +
                     std::to_string(seed);
      const SaliencyTrainResult trained = train_mfnet(train, train_labels, cfg);

      DeltaRow row;
      row.delta = delta;
      row.seed = seed;
      row.filter_gap = mean_abs_filter_gap(trained.params, train, cfg.net);
      row.final_loss = trained.last.loss_total;
      std::vector<core::ScoreMap> preds;
      std::vector<core::BinaryMask> gts;
      for (const auto& s : test) {
        preds.push_back(nets::infer_saliency(trained.params, s.image, cfg.net));
        gts.push_back(s.gt_mask);
      }
      row.eval = metrics::evaluate(preds, gts, "delta-sweep");
      gap_sum += row.filter_gap;
      f_sum += row.eval.mean_f;
      if (on_row) on_row(row);
      table.rows.push_back(std::move(row));
    }
    table.gap_by_delta[delta] = gap_sum / num_seeds;
    table.mean_f_by_delta[delta] = f_sum / num_seeds;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Report serialization (stable key order; consumed by the CLI).

inline nlohmann::ordered_json report_json(const metrics::MetricsReport& r) {
  return {{"mean_mae", r.mean_mae}, {"mean_f", r.mean_f},   {"mean_s", r.mean_s},
          {"mean_e", r.mean_e},     {"mean_fw", r.mean_fw}, {"images", r.mae_values.size()}};
}

inline std::string ablation_json(const AblationTable& t) {
  nlohmann::ordered_json j;
  j["seeds"] = t.seeds;
  j["cases"] = nlohmann::ordered_json::array();
  for (int c : t.cases) {
    nlohmann::ordered_json row;
    const AblationSpec spec = ablation_spec(c);
    row["case"] = c;
    row["label_source"] = label_source_name(spec.label_source);
    row["architecture"] = nets::arch_name(spec.architecture);
    row["uses_filters"] = spec.uses_df;
    row["per_seed"] = nlohmann::ordered_json::array();
    for (const auto& r : t.rows)
      if (r.spec.case_id == c) {
        nlohmann::ordered_json e = report_json(r.eval);
        e["seed"] = r.seed;
        e["final_loss"] = r.final_loss;
        row["per_seed"].push_back(std::move(e));
      }
    row["mean_f"] = t.mean_f_by_case.at(c);
    row["mean_mae"] = t.mean_mae_by_case.at(c);
    j["cases"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

inline std::string ablation_csv(const AblationTable& t) {
  std::string s = "case,label_source,architecture,seed,mean_f,mean_mae,mean_s,mean_e,mean_fw\n";
  char buf[256];
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%s,%llu,%.9f,%.9f,%.9f,%.9f,%.9f\n",
                  r.spec.case_id, label_source_name(r.spec.label_source),
                  nets::arch_name(r.spec.architecture),
                  static_cast<unsigned long long>(r.seed), r.eval.mean_f, r.eval.mean_mae,
                  r.eval.mean_s, r.eval.mean_e, r.eval.mean_fw);
    s += buf;
  }
  return s;
}

inline std::string delta_json(const DeltaTable& t) {
  nlohmann::ordered_json j;
  j["seeds"] = t.seeds;
  j["deltas"] = nlohmann::ordered_json::array();
  for (double d : t.deltas) {
    nlohmann::ordered_json row;
    row["delta"] = d;
    row["per_seed"] = nlohmann::ordered_json::array();
    for (const auto& r : t.rows)
      if (r.delta == d) {
        nlohmann::ordered_json e = report_json(r.eval);
        e["seed"] = r.seed;
        e["filter_gap"] = r.filter_gap;
        e["final_loss"] = r.final_loss;
        row["per_seed"].push_back(std::move(e));
      }
    row["mean_filter_gap"] = t.gap_by_delta.at(d);
    row["mean_f"] = t.mean_f_by_delta.at(d);
    j["deltas"].push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

inline std::string delta_csv(const DeltaTable& t) {
  std::string s = "delta,seed,filter_gap,mean_f,mean_mae\n";
  char buf[192];
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof(buf), "%.6g,%llu,%.9f,%.9f,%.9f\n", r.delta,
                  static_cast<unsigned long long>(r.seed), r.filter_gap, r.eval.mean_f,
                  r.eval.mean_mae);
    s += buf;
  }
  return s;
}

}  // namespace wsod::trainer
