#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "ganaug/adam.hpp"
#include "ganaug/checkpoint.hpp"
#include "ganaug/csv.hpp"
#include "ganaug/losses.hpp"
#include "ganaug/network.hpp"

namespace ganaug {

// Classic 13-conv / 5-pool / 3-dense stack. width_scale shrinks every channel
// and dense width (minimum 1) so the same topology runs at desk scale.
struct VggSpec {
  int num_classes = 3;
  int channels = 3;
  int input_size = 224;
  float width_scale = 1.0f;

  static constexpr int kConvPlan[18] = {64,  64,  -1, 128, 128, -1, 256, 256, 256,
                                        -1,  512, 512, 512, -1, 512, 512, 512, -1};
  static constexpr int kDenseWidth = 4096;

  void validate() const {
    require(num_classes >= 2, ErrorKind::InvalidConfig, "num_classes must be >= 2");
    require(channels >= 1, ErrorKind::InvalidConfig, "channels must be >= 1");
    require(width_scale > 0.0f, ErrorKind::InvalidConfig, "width_scale must be > 0");
    require(input_size >= 32, ErrorKind::IndivisibleInputSize, "input_size must be >= 32");
    require(input_size % 32 == 0, ErrorKind::IndivisibleInputSize,
            "input_size must be divisible by 2^5 for the five poolings");
  }

  int scaled(int width) const {
    int w = static_cast<int>(std::lround(width * width_scale));
    return w < 1 ? 1 : w;
  }
};

inline NetworkSpec build_vgg16(const VggSpec& spec) {
  spec.validate();
  NetworkSpec net;
  net.input_shape = {spec.channels, spec.input_size, spec.input_size};
  for (int entry : VggSpec::kConvPlan) {
    if (entry < 0) {
      net.layers.push_back(LayerSpec::maxpool2d(2, 2));
    } else {
      net.layers.push_back(LayerSpec::conv2d(spec.scaled(entry), 3, 1, 1, true));
      net.layers.push_back(LayerSpec::relu());
    }
  }
  net.layers.push_back(LayerSpec::flatten());
  net.layers.push_back(LayerSpec::dense(spec.scaled(VggSpec::kDenseWidth)));
  net.layers.push_back(LayerSpec::relu());
  net.layers.push_back(LayerSpec::dense(spec.scaled(VggSpec::kDenseWidth)));
  net.layers.push_back(LayerSpec::relu());
  net.layers.push_back(LayerSpec::dense(spec.num_classes));
  return net;
}

// Table-driven training hyperparameters; defaults mirror the full-scale
// reference run (224x224 input, 75 epochs, batch 32, Adam at 1e-3).
struct ClfTrainConfig {
  int num_classes = 3;
  int channels = 3;
  int input_size = 224;
  int epochs = 75;
  int batch_size = 32;
  float lr = 0.001f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float width_scale = 1.0f;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    VggSpec{num_classes, channels, input_size, width_scale}.validate();
    require(epochs >= 0, ErrorKind::InvalidConfig, "epochs must be >= 0");
    require(batch_size >= 1, ErrorKind::InvalidConfig, "batch_size must be >= 1");
    require(lr >= 0.0f, ErrorKind::InvalidConfig, "lr must be >= 0");
    require(val_fraction > 0.0 && val_fraction < 1.0, ErrorKind::InvalidConfig,
            "val_fraction must lie in (0,1)");
  }

  VggSpec vgg_spec() const { return VggSpec{num_classes, channels, input_size, width_scale}; }
};

struct CurveRow {
  int epoch = 0;
  float train_loss = 0.0f;
  float train_acc = 0.0f;
  float val_loss = 0.0f;
  float val_acc = 0.0f;
};

struct TrainingCurves {
  std::vector<CurveRow> rows;

  CsvTable to_csv() const {
    CsvTable table;
    table.header = {"epoch", "train_loss", "train_acc", "val_loss", "val_acc"};
    for (const auto& r : rows)
      table.rows.push_back({csv_int(r.epoch), csv_float(r.train_loss), csv_float(r.train_acc),
                            csv_float(r.val_loss), csv_float(r.val_acc)});
    return table;
  }
};

// Softmax probabilities in eval mode, batched to bound peak memory. Pure
// function of (parameters, input).
inline Tensor predict_proba(Network& model, const Tensor& images) {
  require(images.rank() == 4, ErrorKind::ShapeMismatch, "predict_proba expects [N,C,H,W] images");
  int n = images.dim(0);
  int k = model.output_shape().back();
  Tensor probs({n, k});
  std::size_t per = images.numel() / static_cast<std::size_t>(n);
  const int chunk = 64;
  for (int start = 0; start < n; start += chunk) {
    int take = std::min(chunk, n - start);
    Tensor batch({take, images.dim(1), images.dim(2), images.dim(3)});
    std::copy_n(images.raw() + static_cast<std::size_t>(start) * per,
                static_cast<std::size_t>(take) * per, batch.raw());
    Tensor logits = model.forward(batch, BatchNormMode::Eval);
    Tensor p = softmax(logits);
    std::copy_n(p.raw(), p.numel(), probs.raw() + static_cast<std::size_t>(start) * k);
  }
  return probs;
}

// Argmax per row, first index wins ties.
inline std::vector<int> classify_proba(const Tensor& probs) {
  require(probs.rank() == 2, ErrorKind::ShapeMismatch, "expected [N,K] probabilities");
  int n = probs.dim(0), k = probs.dim(1);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const float* row = probs.raw() + static_cast<std::size_t>(i) * k;
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

inline std::vector<int> classify(Network& model, const Tensor& images) {
  return classify_proba(predict_proba(model, images));
}

struct ClfTrainResult {
  Network model;       // final-epoch parameters
  Network best_model;  // highest validation accuracy (earliest epoch on ties)
  TrainingCurves curves;
  int best_epoch = 0;
  float best_val_acc = -1.0f;
};

// Cross-entropy + Adam epoch loop over a stratified train/val split.
// on_epoch may return true to stop early (curves keep what ran).
inline ClfTrainResult train_classifier(
    const Tensor& images, const std::vector<int>& labels, const ClfTrainConfig& cfg,
    const std::function<bool(const CurveRow&)>& on_epoch = {}) {
  cfg.validate();
  require(images.rank() == 4, ErrorKind::ShapeMismatch, "train expects [N,C,H,W] images");
  const int n = images.dim(0);
  require(static_cast<int>(labels.size()) == n, ErrorKind::ShapeMismatch,
          "label count does not match image count");
  for (int label : labels)
    require(label >= 0 && label < cfg.num_classes, ErrorKind::LabelOutOfRange,
            "label " + std::to_string(label) + " outside [0," + std::to_string(cfg.num_classes) +
                ")");

  // stratified split, seeded
  Rng master(cfg.seed);
  Rng split_rng = master.split(0);
  Rng init_rng = master.split(1);
  Rng epoch_rng = master.split(2);
  std::vector<int> train_idx, val_idx;
  for (int c = 0; c < cfg.num_classes; ++c) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i)
      if (labels[static_cast<std::size_t>(i)] == c) members.push_back(i);
    require(members.size() >= 2, ErrorKind::EmptyClass,
            "class " + std::to_string(c) + " needs at least 2 samples for a train/val split");
    split_rng.shuffle(members);
    std::size_t val_count = static_cast<std::size_t>(
        std::llround(cfg.val_fraction * static_cast<double>(members.size())));
    if (val_count < 1) val_count = 1;
    if (val_count > members.size() - 1) val_count = members.size() - 1;
    for (std::size_t i = 0; i < members.size(); ++i)
      (i < val_count ? val_idx : train_idx).push_back(members[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  ClfTrainResult result;
  result.model = build_network(build_vgg16(cfg.vgg_spec()));
  init_params(result.model, init_rng, InitScheme::HeNormal);
  Adam adam(result.model.parameters(), cfg.lr, cfg.beta1, cfg.beta2);

  std::size_t per = images.numel() / static_cast<std::size_t>(n);
  auto gather = [&](const std::vector<int>& idx, std::size_t start, std::size_t count) {
    Tensor batch({static_cast<int>(count), images.dim(1), images.dim(2), images.dim(3)});
    std::vector<int> batch_labels(count);
    for (std::size_t i = 0; i < count; ++i) {
      int src = idx[start + i];
      std::copy_n(images.raw() + static_cast<std::size_t>(src) * per, per,
                  batch.raw() + i * per);
      batch_labels[i] = labels[static_cast<std::size_t>(src)];
    }
    return std::make_pair(std::move(batch), std::move(batch_labels));
  };

  auto evaluate = [&](const std::vector<int>& idx, float& loss_out, float& acc_out) {
    double loss_total = 0.0;
    long long correct = 0;
    const std::size_t chunk = 64;
    for (std::size_t start = 0; start < idx.size(); start += chunk) {
      std::size_t take = std::min(chunk, idx.size() - start);
      auto [batch, batch_labels] = gather(idx, start, take);
      Tensor logits = result.model.forward(batch, BatchNormMode::Eval);
      loss_total += static_cast<double>(cross_entropy(logits, batch_labels).item()) *
                    static_cast<double>(take);
      auto pred = classify_proba(softmax(logits));
      for (std::size_t i = 0; i < take; ++i)
        if (pred[i] == batch_labels[i]) ++correct;
    }
    loss_out = static_cast<float>(loss_total / static_cast<double>(idx.size()));
    acc_out = static_cast<float>(correct) / static_cast<float>(idx.size());
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    epoch_rng.shuffle(train_idx);
    double loss_total = 0.0;
    long long correct = 0;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t take =
          std::min(static_cast<std::size_t>(cfg.batch_size), train_idx.size() - start);
      auto [batch, batch_labels] = gather(train_idx, start, take);
      Tape tape;
      float loss_value = 0.0f;
      {
        TapeScope scope(tape);
        Tensor logits = result.model.forward(batch, BatchNormMode::Train);
        Tensor loss = cross_entropy(logits, batch_labels);
        loss_value = loss.item();
        auto pred = classify_proba(softmax(logits.detach()));
        for (std::size_t i = 0; i < take; ++i)
          if (pred[i] == batch_labels[i]) ++correct;
        result.model.zero_grad();
        tape.backward(loss);
      }
      require(std::isfinite(loss_value), ErrorKind::NonFiniteLoss,
              "non-finite classifier loss at epoch " + std::to_string(epoch));
      loss_total += static_cast<double>(loss_value) * static_cast<double>(take);
      adam.step();
    }
    std::sort(train_idx.begin(), train_idx.end());  // keep shuffles reproducible across epochs

    CurveRow row;
    row.epoch = epoch;
    row.train_loss = static_cast<float>(loss_total / static_cast<double>(train_idx.size()));
    row.train_acc = static_cast<float>(correct) / static_cast<float>(train_idx.size());
    evaluate(val_idx, row.val_loss, row.val_acc);
    result.curves.rows.push_back(row);

    if (row.val_acc > result.best_val_acc) {
      result.best_val_acc = row.val_acc;
      result.best_epoch = epoch;
      result.best_model = clone_network(result.model);
    }
    if (on_epoch && on_epoch(row)) break;
  }
  if (result.best_epoch == 0) result.best_model = clone_network(result.model);
  return result;
}

}  // namespace ganaug
