// Copyright (c) the cchc project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cchc/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "cchc/arm.hpp"
#include "cchc/errors.hpp"
#include "cchc/metrics.hpp"
#include "cchc/synthesis.hpp"

namespace cchc {

const std::vector<double> kLambdaPresets = {1e-4, 2e-4, 4e-4, 1e-3, 2e-3, 4e-3};

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double_field(const std::string& value, int line_number) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("config line " + std::to_string(line_number) +
                         ": bad numeric value '" + value + "'",
                     line_number);
  }
}

int64_t parse_int_field(const std::string& value, int line_number) {
  try {
    size_t pos = 0;
    int64_t v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("config line " + std::to_string(line_number) +
                         ": bad integer value '" + value + "'",
                     line_number);
  }
}

void validate_config(const TrainConfig& c) {
  if (c.lambda < 0.0 || !std::isfinite(c.lambda))
    throw ArgumentError("config: lambda must be finite and >= 0");
  if (c.iterations < 1) throw ArgumentError("config: iterations must be >= 1");
  if (c.lr_init <= 0.0 || c.lr_end <= 0.0 || c.lr_end > c.lr_init)
    throw ArgumentError("config: need 0 < lr_end <= lr_init");
  if (c.noise_fraction < 0.0 || c.noise_fraction > 1.0)
    throw ArgumentError("config: noise_fraction must be in [0,1]");
  if (c.weight_exp_lo > c.weight_exp_hi)
    throw ArgumentError("config: weight_exp_lo must be <= weight_exp_hi");
  if (c.alpha < 0.0) throw ArgumentError("config: alpha must be >= 0");
}

// Cosine decay from lr_init to lr_end across the run.
double cosine_lr(double lr_init, double lr_end, int iter, int iterations) {
  if (iterations <= 1) return lr_init;
  const double progress = static_cast<double>(iter) / (iterations - 1);
  const double pi = 3.14159265358979323846;
  return lr_end + 0.5 * (lr_init - lr_end) * (1.0 + std::cos(pi * progress));
}

// Adam over a fixed tensor list; state arrays are index-aligned with params.
class Adam {
 public:
  explicit Adam(std::vector<ag::Tensor> params) : params_(std::move(params)) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(static_cast<size_t>(params_[i].numel()), 0.0);
      v_[i].assign(static_cast<size_t>(params_[i].numel()), 0.0);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      double* x = params_[i].data().data();
      const double* g = params_[i].grad().data();
      double* m = m_[i].data();
      double* v = v_[i].data();
      const int64_t n = params_[i].numel();
      for (int64_t j = 0; j < n; ++j) {
        m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g[j];
        v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g[j] * g[j];
        x[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + kEps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  std::vector<ag::Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  int64_t t_ = 0;
};

std::vector<ag::Tensor> trainable_tensors(const LatentPyramid& pyramid,
                                          const CodecModel& model) {
  std::vector<ag::Tensor> params;
  for (const auto& level : pyramid.levels) params.push_back(level);
  for (const auto& named : tensor_list(model)) params.push_back(named.tensor);
  return params;
}

}  // namespace

void apply_config_line(TrainConfig* config, const std::string& line, int line_number) {
  const std::string stripped = trim(line);
  if (stripped.empty() || stripped[0] == '#') return;
  const size_t eq = stripped.find('=');
  if (eq == std::string::npos)
    throw ParseError("config line " + std::to_string(line_number) +
                         ": expected key=value",
                     line_number);
  const std::string key = trim(stripped.substr(0, eq));
  const std::string value = trim(stripped.substr(eq + 1));

  if (key == "lambda") config->lambda = parse_double_field(value, line_number);
  else if (key == "iterations")
    config->iterations = static_cast<int>(parse_int_field(value, line_number));
  else if (key == "lr_init") config->lr_init = parse_double_field(value, line_number);
  else if (key == "lr_end") config->lr_end = parse_double_field(value, line_number);
  else if (key == "noise_fraction")
    config->noise_fraction = parse_double_field(value, line_number);
  else if (key == "seed")
    config->seed = static_cast<uint64_t>(parse_int_field(value, line_number));
  else if (key == "weight_exp_lo")
    config->weight_exp_lo = static_cast<int>(parse_int_field(value, line_number));
  else if (key == "weight_exp_hi")
    config->weight_exp_hi = static_cast<int>(parse_int_field(value, line_number));
  else if (key == "alpha") config->alpha = parse_double_field(value, line_number);
  else
    throw ParseError("config line " + std::to_string(line_number) + ": unknown key '" +
                         key + "'",
                     line_number);
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  TrainConfig config;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) apply_config_line(&config, line, ++line_number);
  return config;
}

LossParts training_loss(ag::Tape& tape, ag::Tensor* loss_out, const Image& image,
                        const LatentPyramid& pyramid, const CodecModel& model,
                        double lambda, double alpha, ag::QuantMode mode, Rng& rng) {
  const int height = image.height, width = image.width;
  const double pixels = static_cast<double>(height) * width;

  std::vector<ag::Tensor> quantized = quantize_pyramid(tape, pyramid, mode, rng);
  ag::Tensor full = upsample_to_full(tape, quantized, model.synth.up_kernel, height,
                                     width);
  ag::Tensor recon = synthesize(tape, full, model.synth);
  ag::Tensor ref = ag::Tensor::from_data({3, height, width}, image.data);
  ag::Tensor dist = distortion_graph(tape, recon, ref, alpha);

  const auto offsets = build_template();
  ag::Tensor rate = ag::sum(tape, latent_rate_bits(tape, quantized[0], model.arm,
                                                   offsets));
  for (int i = 1; i < kLevels; ++i) {
    ag::Tensor level_bits = ag::sum(
        tape, latent_rate_bits(tape, quantized[static_cast<size_t>(i)], model.arm,
                               offsets));
    rate = ag::add(tape, rate, level_bits);
  }

  ag::Tensor loss = ag::add(tape, dist, ag::mul_scalar(tape, rate, lambda / pixels));
  *loss_out = loss;

  LossParts parts;
  parts.total = loss.data()[0];
  parts.distortion = dist.data()[0];
  parts.rate_bits = rate.data()[0];
  return parts;
}

TrainOutcome train_image(const Image& image, const TrainConfig& config) {
  validate_config(config);
  if (image.height < 1 || image.width < 1)
    throw ArgumentError("train: empty image");

  const int noise_iters =
      static_cast<int>(std::llround(config.noise_fraction * config.iterations));

  for (int attempt = 0; attempt <= 3; ++attempt) {
    // Each attempt restarts from the same seed with the schedule halved, so a
    // run is reproducible regardless of how many restarts it needed.
    const double lr_init = config.lr_init * std::pow(0.5, attempt);
    const double lr_end = std::min(config.lr_end, lr_init);
    Rng rng(config.seed);
    LatentPyramid pyramid = init_pyramid(image.height, image.width, rng);
    CodecModel model = init_model(rng);
    Adam opt(trainable_tensors(pyramid, model));

    TrainOutcome outcome;
    outcome.restarts = attempt;
    outcome.loss_history.reserve(static_cast<size_t>(config.iterations));
    bool diverged = false;

    for (int iter = 0; iter < config.iterations; ++iter) {
      const ag::QuantMode mode =
          iter < noise_iters ? ag::QuantMode::kNoise : ag::QuantMode::kSte;
      ag::Tape tape;
      ag::Tensor loss;
      LossParts parts =
          training_loss(tape, &loss, image, pyramid, model, config.lambda,
                        config.alpha, mode, rng);
      if (!std::isfinite(parts.total)) {
        diverged = true;
        break;
      }
      outcome.loss_history.push_back(parts.total);
      opt.zero_grad();
      tape.backward(loss);
      opt.step(cosine_lr(lr_init, lr_end, iter, config.iterations));
    }

    if (!diverged) {
      outcome.pyramid = std::move(pyramid);
      outcome.model = std::move(model);
      return outcome;
    }
  }
  throw TrainError("training diverged after 3 learning-rate restarts");
}

namespace {

// Pulls the raw double values of the 15 model tensors in serialization order.
std::vector<std::vector<double>> tensor_values(const CodecModel& model) {
  std::vector<std::vector<double>> values;
  for (const auto& named : tensor_list(model)) values.push_back(named.tensor.data());
  return values;
}

ModelD model_from_values(const std::vector<std::vector<double>>& values) {
  ModelD m;
  std::vector<double>* fields[kWeightTensorCount] = {
      &m.up_kernel, &m.w1, &m.b1, &m.w2, &m.b2, &m.conv1, &m.cb1, &m.conv2, &m.cb2,
      &m.arm_w1, &m.arm_b1, &m.arm_w2, &m.arm_b2, &m.arm_w3, &m.arm_b3};
  for (int t = 0; t < kWeightTensorCount; ++t)
    *fields[t] = values[static_cast<size_t>(t)];
  return m;
}

// Picks the power-of-two step for one tensor by trying each exponent with the
// other tensors left unquantized and keeping the lowest objective: the
// reconstruction distortion for synthesis tensors, the context-model rate for
// the entropy tensors.  If every candidate overflows int16, coarser steps are
// tried above the search range.
struct StepChoice {
  int exponent = 0;
  std::vector<int16_t> quantized;
};

StepChoice search_step(int tensor_index, const std::vector<std::vector<double>>& values,
                       const Image& image, const std::vector<LatentGrid>& latents,
                       const TrainConfig& config) {
  const bool synthesis_tensor = tensor_index < 9;
  const std::vector<double>& raw = values[static_cast<size_t>(tensor_index)];

  StepChoice best;
  double best_obj = std::numeric_limits<double>::infinity();
  bool found = false;

  for (int e = config.weight_exp_lo; e <= config.weight_exp_hi; ++e) {
    std::vector<int16_t> q;
    if (!try_quantize_values(raw, e, &q)) continue;
    std::vector<std::vector<double>> candidate = values;
    candidate[static_cast<size_t>(tensor_index)] = dequantize_values(q, e);
    const ModelD m = model_from_values(candidate);
    const double obj =
        synthesis_tensor
            ? distortion(image, decode_core(image.height, image.width, m, latents),
                         config.alpha)
            : estimate_rate_bits(latents, m, image.height, image.width);
    if (obj < best_obj) {
      best_obj = obj;
      best.exponent = e;
      best.quantized = std::move(q);
      found = true;
    }
  }
  if (found) return best;

  // All in-range steps overflowed; take the first coarser one that fits.
  for (int e = config.weight_exp_hi + 1; e <= 0; ++e) {
    std::vector<int16_t> q;
    if (try_quantize_values(raw, e, &q)) {
      best.exponent = e;
      best.quantized = std::move(q);
      return best;
    }
  }
  throw TrainError("weight quantization overflow: tensor values out of range");
}

}  // namespace

EncodeResult encode_image(const Image& image, const TrainConfig& config) {
  validate_config(config);
  if (image.height < 1 || image.width < 1 || image.height > 65535 ||
      image.width > 65535)
    throw ArgumentError("encode: image dimensions must be in [1, 65535]");

  TrainOutcome trained = train_image(image, config);
  const std::vector<LatentGrid> latents = hard_quantize_clip(trained.pyramid);

  // Per-level alphabet bounds from the values actually present.
  std::array<std::pair<int16_t, int16_t>, kLevels> bounds;
  for (int i = 0; i < kLevels; ++i) {
    const auto [lo, hi] = std::minmax_element(latents[static_cast<size_t>(i)].begin(),
                                              latents[static_cast<size_t>(i)].end());
    bounds[static_cast<size_t>(i)] = {static_cast<int16_t>(*lo),
                                      static_cast<int16_t>(*hi)};
  }

  // Per-tensor quantization step search, then the final integer model.
  const std::vector<std::vector<double>> values = tensor_values(trained.model);
  BitstreamData data;
  data.weights.reserve(static_cast<size_t>(kTotalParamCount));
  for (int t = 0; t < kWeightTensorCount; ++t) {
    StepChoice choice = search_step(t, values, image, latents, config);
    data.header.step_exponents[static_cast<size_t>(t)] =
        static_cast<int8_t>(choice.exponent);
    data.weights.insert(data.weights.end(), choice.quantized.begin(),
                        choice.quantized.end());
  }
  const ModelD final_model =
      ModelD::from_quantized(data.weights, data.header.step_exponents);

  data.header.height = static_cast<uint16_t>(image.height);
  data.header.width = static_cast<uint16_t>(image.width);
  data.header.level_bounds = bounds;
  data.streams =
      encode_latent_streams(latents, final_model, bounds, image.height, image.width);
  data.header.section_lengths[0] = static_cast<uint32_t>(2 * data.weights.size());
  for (int i = 0; i < kLevels; ++i)
    data.header.section_lengths[static_cast<size_t>(1 + i)] =
        static_cast<uint32_t>(data.streams[static_cast<size_t>(i)].size());

  EncodeResult result;
  result.bitstream = write_bitstream(data);
  result.restarts = trained.restarts;
  result.estimated_rate_bits =
      estimate_rate_bits(latents, final_model, image.height, image.width);
  for (const auto& s : data.streams)
    result.actual_latent_bits += 8.0 * static_cast<double>(s.size());

  // Round-trip integrity: the emitted bytes must reproduce the encoder's own
  // latents and reconstruction exactly.
  const Image own = decode_core(image.height, image.width, final_model, latents);
  DecodeOutput round_trip = decode_bitstream_bytes(result.bitstream, false);
  if (round_trip.latents != latents || round_trip.image.data != own.data)
    throw CodingError("encode: bitstream round-trip does not match reconstruction");

  result.decoded = std::move(round_trip.image);
  result.bpp = 8.0 * static_cast<double>(result.bitstream.size()) /
               (static_cast<double>(image.height) * image.width);
  result.psnr_db = psnr_db(mse(image, result.decoded));
  result.ms_ssim = ms_ssim(image, result.decoded);
  return result;
}

std::vector<RdPointSummary> sweep(const Image& image, const std::vector<double>& lambdas,
                                  const TrainConfig& config, int jobs) {
  if (lambdas.empty()) throw ArgumentError("sweep: empty lambda list");
  if (jobs < 1) throw ArgumentError("sweep: jobs must be >= 1");

  std::vector<RdPointSummary> results(lambdas.size());
  std::vector<std::exception_ptr> errors(lambdas.size());
  std::atomic<size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= lambdas.size()) return;
      try {
        TrainConfig c = config;
        c.lambda = lambdas[i];
        EncodeResult r = encode_image(image, c);
        results[i] = {lambdas[i], static_cast<int64_t>(r.bitstream.size()), r.bpp,
                      r.psnr_db, r.ms_ssim};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const size_t n = std::min(static_cast<size_t>(jobs), lambdas.size());
    pool.reserve(n);
    for (size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::stable_sort(results.begin(), results.end(),
                   [](const RdPointSummary& a, const RdPointSummary& b) {
                     return a.lambda < b.lambda;
                   });
  return results;
}

}  // namespace cchc
