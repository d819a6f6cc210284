#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ganaug/adam.hpp"
#include "ganaug/csv.hpp"
#include "ganaug/image.hpp"
#include "ganaug/losses.hpp"
#include "ganaug/network.hpp"

namespace ganaug {

// Table-driven hyperparameters; defaults are the full-scale reference run
// (latent 100, 3x64x64 images, batch 128, Adam at 2e-4).
struct GanTrainConfig {
  int latent_dim = 100;
  int channels = 3;
  int image_size = 64;
  int epochs = 650;
  int batch_size = 128;
  float lr = 0.0002f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  std::uint64_t seed = 0;
  int checkpoint_every = 50;  // epochs; 0 disables periodic checkpoints
  int base_width = 64;        // channel multiplier; shrink for desk-scale runs

  void validate() const {
    require(latent_dim >= 1, ErrorKind::InvalidConfig, "latent_dim must be >= 1");
    require(channels >= 1, ErrorKind::InvalidConfig, "channels must be >= 1");
    require(image_size >= 16 && (image_size & (image_size - 1)) == 0, ErrorKind::InvalidConfig,
            "image_size must be a power of two >= 16");
    require(epochs >= 0, ErrorKind::InvalidConfig, "epochs must be >= 0");
    require(batch_size >= 2, ErrorKind::InvalidConfig, "batch_size must be >= 2");
    require(base_width >= 1, ErrorKind::InvalidConfig, "base_width must be >= 1");
    require(lr >= 0.0f, ErrorKind::InvalidConfig, "lr must be >= 0");
    require(checkpoint_every >= 0, ErrorKind::InvalidConfig, "checkpoint_every must be >= 0");
  }

  int upsample_steps() const {
    int steps = 0;
    for (int s = 4; s < image_size; s *= 2) ++steps;
    return steps;
  }
};

// z[latent,1,1] -> 4x4 seed block -> stride-2 transposed convs doubling the
// resolution and halving channels -> tanh image. BN everywhere but the output.
inline NetworkSpec build_generator(const GanTrainConfig& cfg) {
  cfg.validate();
  int steps = cfg.upsample_steps();
  int seed_channels = cfg.base_width << (steps - 1);
  NetworkSpec spec;
  spec.input_shape = {cfg.latent_dim, 1, 1};
  spec.layers.push_back(LayerSpec::conv_transpose2d(seed_channels, 4, 1, 0, false));
  spec.layers.push_back(LayerSpec::batchnorm2d());
  spec.layers.push_back(LayerSpec::relu());
  for (int i = 1; i < steps; ++i) {
    spec.layers.push_back(LayerSpec::conv_transpose2d(seed_channels >> i, 4, 2, 1, false));
    spec.layers.push_back(LayerSpec::batchnorm2d());
    spec.layers.push_back(LayerSpec::relu());
  }
  spec.layers.push_back(LayerSpec::conv_transpose2d(cfg.channels, 4, 2, 1, false));
  spec.layers.push_back(LayerSpec::tanh());
  return spec;
}

// Mirror image of the generator: stride-2 convs + LeakyReLU(0.2), BN on every
// block except the first, 4x4 -> 1x1 conv, sigmoid probability per sample.
inline NetworkSpec build_discriminator(const GanTrainConfig& cfg) {
  cfg.validate();
  int steps = cfg.upsample_steps();
  NetworkSpec spec;
  spec.input_shape = {cfg.channels, cfg.image_size, cfg.image_size};
  spec.layers.push_back(LayerSpec::conv2d(cfg.base_width, 4, 2, 1, false));
  spec.layers.push_back(LayerSpec::leaky_relu(0.2f));
  for (int i = 1; i < steps; ++i) {
    spec.layers.push_back(LayerSpec::conv2d(cfg.base_width << i, 4, 2, 1, false));
    spec.layers.push_back(LayerSpec::batchnorm2d());
    spec.layers.push_back(LayerSpec::leaky_relu(0.2f));
  }
  spec.layers.push_back(LayerSpec::conv2d(1, 4, 1, 0, false));
  spec.layers.push_back(LayerSpec::sigmoid());
  spec.layers.push_back(LayerSpec::flatten());
  return spec;
}

struct LossRow {
  int epoch = 0;
  int iter = 0;
  float loss_d = 0.0f;
  float loss_g = 0.0f;
  float d_real = 0.0f;
  float d_fake = 0.0f;
};

struct LossHistory {
  std::vector<LossRow> rows;

  CsvTable to_csv() const {
    CsvTable table;
    table.header = {"epoch", "iter", "loss_d", "loss_g", "d_real", "d_fake"};
    for (const auto& r : rows)
      table.rows.push_back({csv_int(r.epoch), csv_int(r.iter), csv_float(r.loss_d),
                            csv_float(r.loss_g), csv_float(r.d_real), csv_float(r.d_fake)});
    return table;
  }
};

// Alternating one-D-step / one-G-step adversarial loop. Exposed as a class so
// callers (and tests) can drive individual steps.
class GanTrainer {
 public:
  explicit GanTrainer(const GanTrainConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng master(cfg_.seed);
    Rng g_init = master.split(0);
    Rng d_init = master.split(1);
    train_rng_ = master.split(2);
    generator_ = build_network(build_generator(cfg_));
    discriminator_ = build_network(build_discriminator(cfg_));
    init_params(generator_, g_init, InitScheme::GanNormal);
    init_params(discriminator_, d_init, InitScheme::GanNormal);
    adam_g_ = std::make_unique<Adam>(generator_.parameters(), cfg_.lr, cfg_.beta1, cfg_.beta2);
    adam_d_ = std::make_unique<Adam>(discriminator_.parameters(), cfg_.lr, cfg_.beta1, cfg_.beta2);
  }

  Network& generator() { return generator_; }
  Network& discriminator() { return discriminator_; }
  const GanTrainConfig& config() const { return cfg_; }
  LossHistory& history() { return history_; }

  Tensor sample_latent(int n) {
    return randn({n, cfg_.latent_dim, 1, 1}, train_rng_);
  }

  struct StepStats {
    float loss_d = 0.0f;
    float d_real = 0.0f;
    float d_fake = 0.0f;
    float loss_g = 0.0f;
  };

  // Discriminator update on a real batch plus a fresh detached fake batch.
  StepStats d_step(const Tensor& real_batch) {
    Tensor z = sample_latent(real_batch.dim(0));
    Tensor fake = generator_.forward(z, BatchNormMode::Train).detach();
    StepStats stats;
    Tape tape;
    {
      TapeScope scope(tape);
      Tensor d_real = discriminator_.forward(real_batch, BatchNormMode::Train);
      Tensor d_fake = discriminator_.forward(fake, BatchNormMode::Train);
      Tensor loss = disc_loss(d_real, d_fake);
      stats.loss_d = loss.item();
      stats.d_real = mean_value(d_real);
      stats.d_fake = mean_value(d_fake);
      discriminator_.zero_grad();
      tape.backward(loss);
    }
    adam_d_->step();
    return stats;
  }

  // Generator update through frozen-D gradients on a fresh fake batch.
  float g_step(int batch_size) {
    Tensor z = sample_latent(batch_size);
    float loss_value = 0.0f;
    Tape tape;
    {
      TapeScope scope(tape);
      Tensor fake = generator_.forward(z, BatchNormMode::Train);
      Tensor d_fake = discriminator_.forward(fake, BatchNormMode::Train);
      Tensor loss = gen_loss(d_fake);
      loss_value = loss.item();
      generator_.zero_grad();
      discriminator_.zero_grad();  // discard the pass-through gradients
      tape.backward(loss);
    }
    adam_g_->step();
    return loss_value;
  }

  // callbacks: on_row fires per iteration, on_epoch after each epoch
  // (1-based); either may be empty.
  void train(const Tensor& dataset,
             const std::function<void(const LossRow&)>& on_row = {},
             const std::function<void(int, GanTrainer&)>& on_epoch = {}) {
    require(dataset.rank() == 4, ErrorKind::ShapeMismatch,
            "train expects an [N,C,H,W] dataset tensor");
    int n = dataset.dim(0);
    require(n >= 1, ErrorKind::EmptyDataset, "gan training set is empty");
    int batch = std::min(cfg_.batch_size, n);
    std::size_t sample_sz = dataset.numel() / static_cast<std::size_t>(n);

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      train_rng_.shuffle(order);
      int iter = 0;
      for (int start = 0; start < n; start += batch) {
        int take = std::min(batch, n - start);
        if (take < 2 && n >= 2) break;  // drop a trailing singleton; batchnorm needs >= 2
        Tensor real({take, dataset.dim(1), dataset.dim(2), dataset.dim(3)});
        for (int i = 0; i < take; ++i)
          std::copy_n(dataset.raw() + static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)]) * sample_sz,
                      sample_sz, real.raw() + static_cast<std::size_t>(i) * sample_sz);
        StepStats stats = d_step(real);
        stats.loss_g = g_step(take);
        ++iter;
        LossRow row{epoch, iter, stats.loss_d, stats.loss_g, stats.d_real, stats.d_fake};
        history_.rows.push_back(row);  // the failing row stays visible in the record
        if (on_row) on_row(row);
        require(std::isfinite(stats.loss_d) && std::isfinite(stats.loss_g),
                ErrorKind::NonFiniteLoss,
                "non-finite gan loss at epoch " + std::to_string(epoch) + " iter " +
                    std::to_string(iter));
      }
      if (on_epoch) on_epoch(epoch, *this);
    }
  }

 private:
  GanTrainConfig cfg_;
  Network generator_;
  Network discriminator_;
  std::unique_ptr<Adam> adam_g_, adam_d_;
  Rng train_rng_{0};
  LossHistory history_;
};

// One-call wrapper over GanTrainer for the common path.
inline GanTrainer train_dcgan(const Tensor& dataset, const GanTrainConfig& cfg,
                              const std::function<void(const LossRow&)>& on_row = {},
                              const std::function<void(int, GanTrainer&)>& on_epoch = {}) {
  GanTrainer trainer(cfg);
  trainer.train(dataset, on_row, on_epoch);
  return trainer;
}

// Draws n images from the generator in eval mode; [-1,1] activations map to
// 8-bit pixels by the exact inverse of the training normalization.
inline std::vector<Image> sample_images(Network& generator, int n, Rng& rng) {
  require(n >= 0, ErrorKind::InvalidConfig, "sample count must be >= 0");
  std::vector<Image> out;
  if (n == 0) return out;
  const auto& in_shape = generator.spec().input_shape;
  require(in_shape.size() == 3, ErrorKind::InvalidConfig, "generator input must be [latent,1,1]");
  const auto& out_shape = generator.output_shape();
  require(out_shape.size() == 3 && out_shape[0] == 3, ErrorKind::InvalidConfig,
          "generator output must be a 3-channel image");
  int latent = in_shape[0];
  const int chunk = 64;
  std::size_t per = static_cast<std::size_t>(out_shape[0]) * out_shape[1] * out_shape[2];
  for (int start = 0; start < n; start += chunk) {
    int take = std::min(chunk, n - start);
    Tensor z = randn({take, latent, 1, 1}, rng);
    Tensor batch = generator.forward(z, BatchNormMode::Eval);
    for (int i = 0; i < take; ++i)
      out.push_back(
          denormalize(batch.raw() + static_cast<std::size_t>(i) * per, out_shape[1], out_shape[2],
                      NormMode::Gan));
  }
  return out;
}

}  // namespace ganaug
