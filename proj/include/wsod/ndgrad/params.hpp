// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "wsod/core/wsf.hpp"
#include "wsod/ndgrad/adam.hpp"
#include "wsod/ndgrad/graph.hpp"
#include "wsod/ndgrad/tensor.hpp"

namespace wsod::ndgrad {

/// One named trainable tensor plus its accumulated gradient and Adam state.
template <typename T>
struct Param {
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;
  AdamState<T> adam;
};

/// Name-keyed parameter container; iteration order is lexicographic, which
/// keeps optimizer sweeps and checkpoints deterministic.
template <typename T>
class ParamSet {
 public:
  Param<T>& add(const std::string& name, Tensor<T> init) {
    if (items_.count(name)) throw_contract("param '" + name + "' already exists");
    Param<T> p;
    p.shape = init.shape;
    p.value = std::move(init.value);
    p.grad.assign(p.value.size(), T(0));
    return items_.emplace(name, std::move(p)).first->second;
  }

  Param<T>& at(const std::string& name) {
    auto it = items_.find(name);
    if (it == items_.end()) throw_contract("unknown param '" + name + "'");
    return it->second;
  }
  const Param<T>& at(const std::string& name) const {
    auto it = items_.find(name);
    if (it == items_.end()) throw_contract("unknown param '" + name + "'");
    return it->second;
  }
  bool has(const std::string& name) const { return items_.count(name) != 0; }
  std::size_t size() const { return items_.size(); }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  void zero_grads() {
    for (auto& [name, p] : items_) p.grad.assign(p.value.size(), T(0));
  }

  void adam_step_all(double lr) {
    for (auto& [name, p] : items_) adam_step(p.value, p.grad, p.adam, lr);
  }

  /// Binds a parameter into a graph as a requires-grad leaf; remember the
  /// returned id and call collect() after backward to pull the gradient out.
  int bind(Graph<T>& g, const std::string& name, bool trainable = true) const {
    const Param<T>& p = at(name);
    Tensor<T> t(p.shape);
    t.value = p.value;
    t.set_requires_grad(trainable);
    return g.leaf(std::move(t));
  }

  /// Adds the graph-accumulated gradient of a bound leaf into the param grad.
  void collect(Graph<T>& g, const std::string& name, int node_id, double scale = 1.0) {
    Param<T>& p = at(name);
    const Tensor<T>& t = g.val(node_id);
    if (t.grad.empty()) return;
    if (t.grad.size() != p.grad.size()) throw_shape("collect: grad size mismatch for " + name);
    const T s = static_cast<T>(scale);
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += s * t.grad[i];
  }

  /// Checkpoint: one WSF1 file per parameter plus index.json {name -> {file, shape}}.
  void save(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::ordered_json index;
    int k = 0;
    for (const auto& [name, p] : items_) {
      char fname[32];
      std::snprintf(fname, sizeof(fname), "p%04d.wsf", k++);
      core::TensorFile tf;
      for (int d : p.shape) tf.dims.push_back(static_cast<std::uint32_t>(d));
      tf.values.reserve(p.value.size());
      for (T v : p.value) tf.values.push_back(static_cast<float>(v));
      core::write_wsf((fs::path(dir) / fname).string(), tf);
      index[name] = {{"file", fname}, {"shape", p.shape}};
    }
    std::ofstream f((fs::path(dir) / "index.json").string(), std::ios::trunc);
    if (!f) throw_io("cannot write checkpoint index in " + dir);
    f << index.dump(2) << "\n";
  }

  static ParamSet<T> load(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string index_path = (fs::path(dir) / "index.json").string();
    std::ifstream f(index_path);
    if (!f) throw_io("cannot open checkpoint index " + index_path);
    nlohmann::json index;
    try {
      f >> index;
    } catch (const nlohmann::json::exception& e) {
      throw_io("bad checkpoint index " + index_path + ": " + e.what());
    }
    ParamSet<T> ps;
    for (auto it = index.begin(); it != index.end(); ++it) {
      const std::string file = it.value().at("file").get<std::string>();
      const std::vector<int> shape = it.value().at("shape").get<std::vector<int>>();
      core::TensorFile tf = core::read_wsf((fs::path(dir) / file).string());
      Tensor<T> t(shape);
      if (tf.values.size() != t.count())
        throw_io("checkpoint tensor " + it.key() + " has wrong element count");
      for (std::size_t i = 0; i < tf.values.size(); ++i) t.value[i] = static_cast<T>(tf.values[i]);
      ps.add(it.key(), std::move(t));
    }
    return ps;
  }

 private:
  std::map<std::string, Param<T>> items_;
};

}  // namespace wsod::ndgrad
