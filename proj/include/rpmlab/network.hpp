#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rpmlab/ops.hpp"
#include "rpmlab/rng.hpp"
#include "rpmlab/tensor.hpp"

#include <nlohmann/json.hpp>

namespace rpmlab {

enum class NormMode { None, Trainable, Frozen };

// Plain CNN: per block conv3x3 (stride 1, pad 1) -> [batch norm] -> relu ->
// maxpool2, then global average pool -> dropout -> fully connected.
struct NetworkSpec {
  int input_channels = 16;                    // 16 stacked panels or 3 row panels
  std::vector<int> conv_channels = {16, 32, 64, 64};
  int out_dim = 8;                            // 8 candidate logits or 1 row score
  double dropout_p = 0.5;
  int input_size = 32;                        // square input, H == W
  NormMode norm = NormMode::None;

  void validate() const {
    detail::require(input_channels == 3 || input_channels == 16,
                    "network spec: input_channels must be 3 or 16, got " +
                        std::to_string(input_channels));
    detail::require(out_dim == 1 || out_dim == 8,
                    "network spec: out_dim must be 1 or 8, got " + std::to_string(out_dim));
    detail::require(!conv_channels.empty(), "network spec: needs at least one conv block");
    for (int c : conv_channels)
      detail::require(c >= 1, "network spec: conv channels must be positive");
    detail::require(dropout_p >= 0.0 && dropout_p < 1.0,
                    "network spec: dropout_p outside [0,1)");
    int size = input_size;
    for (size_t i = 0; i < conv_channels.size(); ++i) {
      detail::require(size >= 2 && size % 2 == 0,
                      "network spec: spatial size collapses below 1x1 at block " +
                          std::to_string(i + 1) + " (input_size " + std::to_string(input_size) +
                          ")");
      size /= 2;
    }
  }

  bool operator==(const NetworkSpec&) const = default;
};

inline nlohmann::json spec_to_json(const NetworkSpec& s) {
  return nlohmann::json{{"input_channels", s.input_channels},
                        {"conv_channels", s.conv_channels},
                        {"out_dim", s.out_dim},
                        {"dropout_p", s.dropout_p},
                        {"input_size", s.input_size},
                        {"norm", static_cast<int>(s.norm)}};
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec s;
  s.input_channels = j.at("input_channels").get<int>();
  s.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  s.out_dim = j.at("out_dim").get<int>();
  s.dropout_p = j.at("dropout_p").get<double>();
  s.input_size = j.at("input_size").get<int>();
  s.norm = static_cast<NormMode>(j.at("norm").get<int>());
  return s;
}

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
class Network {
 public:
  Network() = default;

  // He-normal initialization: weights ~ N(0, sqrt(2/fan_in)), biases zero.
  Network(NetworkSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    int in_ch = spec_.input_channels;
    for (size_t i = 0; i < spec_.conv_channels.size(); ++i) {
      int out_ch = spec_.conv_channels[i];
      Block blk;
      blk.w = he_normal({out_ch, in_ch, 3, 3}, in_ch * 9, rng);
      blk.b = Tensor<T>::zeros({out_ch}, true);
      if (spec_.norm != NormMode::None) {
        bool trainable = spec_.norm == NormMode::Trainable;
        blk.gamma = Tensor<T>::filled({out_ch}, T(1), trainable);
        blk.beta = Tensor<T>::zeros({out_ch}, trainable);
        blk.running_mean.assign(out_ch, T(0));
        blk.running_var.assign(out_ch, T(1));
      }
      blocks_.push_back(std::move(blk));
      in_ch = out_ch;
    }
    fc_w_ = he_normal({in_ch, spec_.out_dim}, in_ch, rng);
    fc_b_ = Tensor<T>::zeros({spec_.out_dim}, true);
  }

  // x: (N, input_channels, S, S) -> logits (N, out_dim).
  Tensor<T> forward(const Tensor<T>& x, RunMode mode, Rng* dropout_rng = nullptr) {
    detail::require(x.shape().size() == 4 && x.shape()[1] == spec_.input_channels &&
                        x.shape()[2] == spec_.input_size && x.shape()[3] == spec_.input_size,
                    "network forward: input " + shape_str(x.shape()) + " does not match spec (" +
                        std::to_string(spec_.input_channels) + "," +
                        std::to_string(spec_.input_size) + "," + std::to_string(spec_.input_size) +
                        ")");
    Tensor<T> h = x;
    for (auto& blk : blocks_) {
      h = conv2d(h, blk.w, blk.b, 1, 1);
      if (spec_.norm != NormMode::None) {
        bool batch_stats = spec_.norm == NormMode::Trainable && mode == RunMode::Train;
        h = batch_norm2d(h, blk.gamma, blk.beta, blk.running_mean, blk.running_var, batch_stats,
                         batch_stats);
      }
      h = relu(h);
      h = maxpool2d(h, 2);
    }
    h = global_avg_pool(h);
    h = dropout(h, spec_.dropout_p, mode, dropout_rng);
    return add(matmul(h, fc_w_), fc_b_);
  }

  // Trainable parameters in a stable order (frozen batch-norm affine excluded).
  std::vector<NamedParam<T>> parameters() {
    std::vector<NamedParam<T>> out;
    for (size_t i = 0; i < blocks_.size(); ++i) {
      std::string base = "conv" + std::to_string(i + 1);
      out.push_back({base + ".weight", blocks_[i].w});
      out.push_back({base + ".bias", blocks_[i].b});
      if (spec_.norm == NormMode::Trainable) {
        out.push_back({base + ".bn.gamma", blocks_[i].gamma});
        out.push_back({base + ".bn.beta", blocks_[i].beta});
      }
    }
    out.push_back({"fc.weight", fc_w_});
    out.push_back({"fc.bias", fc_b_});
    return out;
  }

  struct StateArray {
    std::string name;
    Shape shape;
    std::vector<T> data;
  };

  // Everything a checkpoint must persist, including frozen affine parameters
  // and batch-norm running statistics, in a fixed order.
  std::vector<StateArray> export_state() const {
    std::vector<StateArray> out;
    for (size_t i = 0; i < blocks_.size(); ++i) {
      std::string base = "conv" + std::to_string(i + 1);
      out.push_back({base + ".weight", blocks_[i].w.shape(), blocks_[i].w.value()});
      out.push_back({base + ".bias", blocks_[i].b.shape(), blocks_[i].b.value()});
      if (spec_.norm != NormMode::None) {
        int c = static_cast<int>(blocks_[i].running_mean.size());
        out.push_back({base + ".bn.gamma", blocks_[i].gamma.shape(), blocks_[i].gamma.value()});
        out.push_back({base + ".bn.beta", blocks_[i].beta.shape(), blocks_[i].beta.value()});
        out.push_back({base + ".bn.running_mean", {c}, blocks_[i].running_mean});
        out.push_back({base + ".bn.running_var", {c}, blocks_[i].running_var});
      }
    }
    out.push_back({"fc.weight", fc_w_.shape(), fc_w_.value()});
    out.push_back({"fc.bias", fc_b_.shape(), fc_b_.value()});
    return out;
  }

  // Strictly matches the export_state layout: same names, shapes, and order.
  void import_state(const std::vector<StateArray>& arrays) {
    auto expected = export_state();
    if (arrays.size() != expected.size())
      throw std::runtime_error("state mismatch: checkpoint holds " +
                               std::to_string(arrays.size()) + " arrays, network expects " +
                               std::to_string(expected.size()));
    for (size_t i = 0; i < arrays.size(); ++i) {
      if (arrays[i].name != expected[i].name)
        throw std::runtime_error("state mismatch: array '" + arrays[i].name + "' where '" +
                                 expected[i].name + "' was expected");
      if (arrays[i].shape != expected[i].shape)
        throw std::runtime_error("state mismatch: array '" + arrays[i].name + "' has shape " +
                                 shape_str(arrays[i].shape) + ", expected " +
                                 shape_str(expected[i].shape));
    }
    size_t idx = 0;
    auto take = [&] { return arrays[idx++].data; };
    for (auto& blk : blocks_) {
      blk.w.value() = take();
      blk.b.value() = take();
      if (spec_.norm != NormMode::None) {
        blk.gamma.value() = take();
        blk.beta.value() = take();
        blk.running_mean = take();
        blk.running_var = take();
      }
    }
    fc_w_.value() = take();
    fc_b_.value() = take();
  }

  const NetworkSpec& spec() const { return spec_; }

 private:
  static Tensor<T> he_normal(Shape shape, int fan_in, Rng& rng) {
    double std_dev = std::sqrt(2.0 / fan_in);
    std::vector<T> data(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : data) v = static_cast<T>(rng.normal() * std_dev);
    return Tensor<T>::from_data(std::move(shape), std::move(data), true);
  }

  struct Block {
    Tensor<T> w, b;
    Tensor<T> gamma, beta;
    std::vector<T> running_mean, running_var;
  };

  NetworkSpec spec_;
  std::vector<Block> blocks_;
  Tensor<T> fc_w_, fc_b_;
};

}  // namespace rpmlab
