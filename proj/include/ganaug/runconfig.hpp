#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "ganaug/dcgan.hpp"
#include "ganaug/error.hpp"
#include "ganaug/ssim.hpp"
#include "ganaug/vgg.hpp"

namespace ganaug {

// Flat `key = value` configuration with a fixed key registry, file parsing,
// flag overrides, and deterministic resolved-text emission.
class RunConfig {
 public:
  RunConfig() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> kDefaults = {
        {"gan.latent_dim", "100"},
        {"gan.channels", "3"},
        {"gan.image_size", "64"},
        {"gan.epochs", "650"},
        {"gan.batch_size", "128"},
        {"gan.lr", "0.0002"},
        {"gan.beta1", "0.5"},
        {"gan.beta2", "0.999"},
        {"gan.base_width", "64"},
        {"gan.checkpoint_every", "50"},
        {"gan.seed", "0"},
        {"clf.num_classes", "3"},
        {"clf.channels", "3"},
        {"clf.input_size", "224"},
        {"clf.epochs", "75"},
        {"clf.batch_size", "32"},
        {"clf.lr", "0.001"},
        {"clf.beta1", "0.9"},
        {"clf.beta2", "0.999"},
        {"clf.width_scale", "1"},
        {"clf.val_fraction", "0.1"},
        {"clf.seed", "0"},
        {"ssim.sample_cap", "100"},
        {"ssim.seed", "0"},
        {"ssim.policy", "max"},
        {"ssim.channel_mode", "luma"},
    };
    return kDefaults;
  }

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    require(it != values_.end(), ErrorKind::UnknownConfigKey, "unknown config key '" + key + "'");
    it->second = value;
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    require(it != values_.end(), ErrorKind::UnknownConfigKey, "unknown config key '" + key + "'");
    return it->second;
  }

  long get_int(const std::string& key) const {
    const std::string& raw = get(key);
    char* end = nullptr;
    long v = std::strtol(raw.c_str(), &end, 10);
    require(end != raw.c_str() && *end == '\0', ErrorKind::BadConfigValue,
            key + " = '" + raw + "' is not an integer");
    return v;
  }

  double get_float(const std::string& key) const {
    const std::string& raw = get(key);
    char* end = nullptr;
    double v = std::strtod(raw.c_str(), &end);
    require(end != raw.c_str() && *end == '\0', ErrorKind::BadConfigValue,
            key + " = '" + raw + "' is not a number");
    return v;
  }

  std::uint64_t get_u64(const std::string& key) const {
    const std::string& raw = get(key);
    char* end = nullptr;
    unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
    require(end != raw.c_str() && *end == '\0', ErrorKind::BadConfigValue,
            key + " = '" + raw + "' is not an unsigned integer");
    return static_cast<std::uint64_t>(v);
  }

  // Lines of `key = value`; `#` starts a comment; blank lines ignored.
  void load_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::IoError, "cannot open config file " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        std::size_t a = s.find_first_not_of(" \t\r");
        std::size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      std::string text = trim(line);
      if (text.empty()) continue;
      auto eq = text.find('=');
      require(eq != std::string::npos, ErrorKind::BadConfigValue,
              path + ":" + std::to_string(line_no) + ": expected 'key = value'");
      set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    }
  }

  // `key=value` as given on the command line.
  void apply_override(const std::string& assignment) {
    auto eq = assignment.find('=');
    require(eq != std::string::npos, ErrorKind::BadConfigValue,
            "override '" + assignment + "' must look like key=value");
    auto trim = [](std::string s) {
      std::size_t a = s.find_first_not_of(" \t");
      std::size_t b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  std::string resolved_text() const {
    std::ostringstream out;
    for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
    return out.str();
  }

  void write_resolved(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::IoError, "cannot write " + path);
    out << resolved_text();
  }

  GanTrainConfig gan_config() const {
    GanTrainConfig cfg;
    cfg.latent_dim = static_cast<int>(get_int("gan.latent_dim"));
    cfg.channels = static_cast<int>(get_int("gan.channels"));
    cfg.image_size = static_cast<int>(get_int("gan.image_size"));
    cfg.epochs = static_cast<int>(get_int("gan.epochs"));
    cfg.batch_size = static_cast<int>(get_int("gan.batch_size"));
    cfg.lr = static_cast<float>(get_float("gan.lr"));
    cfg.beta1 = static_cast<float>(get_float("gan.beta1"));
    cfg.beta2 = static_cast<float>(get_float("gan.beta2"));
    cfg.base_width = static_cast<int>(get_int("gan.base_width"));
    cfg.checkpoint_every = static_cast<int>(get_int("gan.checkpoint_every"));
    cfg.seed = get_u64("gan.seed");
    cfg.validate();
    return cfg;
  }

  ClfTrainConfig clf_config() const {
    ClfTrainConfig cfg;
    cfg.num_classes = static_cast<int>(get_int("clf.num_classes"));
    cfg.channels = static_cast<int>(get_int("clf.channels"));
    cfg.input_size = static_cast<int>(get_int("clf.input_size"));
    cfg.epochs = static_cast<int>(get_int("clf.epochs"));
    cfg.batch_size = static_cast<int>(get_int("clf.batch_size"));
    cfg.lr = static_cast<float>(get_float("clf.lr"));
    cfg.beta1 = static_cast<float>(get_float("clf.beta1"));
    cfg.beta2 = static_cast<float>(get_float("clf.beta2"));
    cfg.width_scale = static_cast<float>(get_float("clf.width_scale"));
    cfg.val_fraction = get_float("clf.val_fraction");
    cfg.seed = get_u64("clf.seed");
    cfg.validate();
    return cfg;
  }

  PairingPolicy ssim_policy() const {
    const std::string& raw = get("ssim.policy");
    if (raw == "max") return PairingPolicy::MaxOverSample;
    if (raw == "mean") return PairingPolicy::MeanOverSample;
    raise(ErrorKind::BadConfigValue, "ssim.policy must be 'max' or 'mean', got '" + raw + "'");
  }

  SsimChannelPolicy ssim_channel_mode() const {
    const std::string& raw = get("ssim.channel_mode");
    if (raw == "luma") return SsimChannelPolicy::Luma;
    if (raw == "per_channel") return SsimChannelPolicy::PerChannelMean;
    raise(ErrorKind::BadConfigValue,
          "ssim.channel_mode must be 'luma' or 'per_channel', got '" + raw + "'");
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ganaug
