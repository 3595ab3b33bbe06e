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

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "cchc/allocator.hpp"
#include "cchc/codec.hpp"
#include "cchc/csv.hpp"
#include "cchc/errors.hpp"
#include "cchc/metrics.hpp"
#include "cchc/trainer.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

// Exit codes: 0 ok, 2 usage, 3 I/O, 4 parse/decode, 5 training failure;
// 1 for everything else (notably an infeasible allocation).
constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitParse = 4;
constexpr int kExitTrain = 5;

std::string fixed3(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// JSON has no infinity; keep the same "inf" sentinel the CSV output uses.
json json_metric(double v) {
  if (std::isinf(v)) return json(v > 0 ? "inf" : "-inf");
  return json(v);
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cchc::IoError("cannot open file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (in.bad()) throw cchc::IoError("failed reading file: " + path);
  return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw cchc::IoError("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw cchc::IoError("failed writing file: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw cchc::IoError("cannot open file for writing: " + path);
  out << text;
  if (!out) throw cchc::IoError("failed writing file: " + path);
}

// Seed precedence: --seed flag, then the config file, then COOLCHIC_SEED,
// then the TrainConfig default.
void apply_seed(cchc::TrainConfig* config, bool flag_given, uint64_t flag_seed,
                bool config_had_seed) {
  if (flag_given) {
    config->seed = flag_seed;
    return;
  }
  if (config_had_seed) return;
  if (const char* env = std::getenv("COOLCHIC_SEED")) {
    try {
      size_t pos = 0;
      const unsigned long long v = std::stoull(env, &pos);
      if (pos != std::string(env).size()) throw std::invalid_argument("trailing");
      config->seed = v;
    } catch (const std::exception&) {
      throw cchc::ArgumentError(std::string("COOLCHIC_SEED is not an integer: ") + env);
    }
  }
}

struct EncodeArgs {
  std::string input, output, config_path;
  double lambda = 1e-3;
  bool lambda_given = false;
  uint64_t seed = 0;
  bool seed_given = false;
  bool sweep = false;
  int jobs = 1;
  bool as_json = false;
};

void print_encode_summary(const std::string& path, size_t bytes,
                          const cchc::EncodeResult& r, double lambda, bool as_json) {
  if (as_json) {
    json j{{"command", "encode"},     {"output", path},
           {"lambda", lambda},       {"bytes", bytes},
           {"bpp", r.bpp},           {"psnr_db", json_metric(r.psnr_db)},
           {"ms_ssim", r.ms_ssim},   {"restarts", r.restarts}};
    std::cout << j.dump() << "\n";
    return;
  }
  std::cout << "encoded " << path << ": " << bytes << " bytes, " << fixed3(r.bpp)
            << " bpp, psnr " << fixed3(r.psnr_db) << " dB, ms-ssim "
            << fixed3(r.ms_ssim) << "\n";
}

// Whether a config line (comments stripped) assigns the seed key.
bool is_seed_line(std::string line) {
  const size_t hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  const size_t eq = line.find('=');
  if (eq == std::string::npos) return false;
  std::string key = line.substr(0, eq);
  key.erase(0, key.find_first_not_of(" \t"));
  const size_t end = key.find_last_not_of(" \t");
  key.erase(end == std::string::npos ? 0 : end + 1);
  return key == "seed";
}

int cmd_encode(const EncodeArgs& args) {
  cchc::TrainConfig config;
  bool config_had_seed = false;
  if (!args.config_path.empty()) {
    config = cchc::load_config(args.config_path);
    std::ifstream in(args.config_path);
    for (std::string line; std::getline(in, line);)
      if (is_seed_line(line)) config_had_seed = true;
  }
  if (args.lambda_given) config.lambda = args.lambda;
  apply_seed(&config, args.seed_given, args.seed, config_had_seed);

  const cchc::Image image = cchc::read_ppm(args.input);

  if (!args.sweep) {
    const cchc::EncodeResult result = cchc::encode_image(image, config);
    write_file_bytes(args.output, result.bitstream);
    print_encode_summary(args.output, result.bitstream.size(), result, config.lambda,
                         args.as_json);
    return kExitOk;
  }

  // Sweep mode: one encode per preset on a small worker pool, files suffixed
  // .l0 (lowest lambda, largest file) through .l5.  Results are written and
  // printed in preset order regardless of which worker finished first.
  const std::vector<double>& lambdas = cchc::kLambdaPresets;
  std::vector<cchc::EncodeResult> results(lambdas.size());
  std::vector<std::exception_ptr> errors(lambdas.size());
  std::atomic<size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = cursor.fetch_add(1);
      if (i >= lambdas.size()) return;
      try {
        cchc::TrainConfig c = config;
        c.lambda = lambdas[i];
        results[i] = cchc::encode_image(image, c);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (args.jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const size_t n = std::min(static_cast<size_t>(args.jobs), lambdas.size());
    for (size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (size_t i = 0; i < lambdas.size(); ++i) {
    const std::string path = args.output + ".l" + std::to_string(i);
    write_file_bytes(path, results[i].bitstream);
    print_encode_summary(path, results[i].bitstream.size(), results[i], lambdas[i],
                         args.as_json);
  }
  return kExitOk;
}

int cmd_decode(const std::string& input, const std::string& output,
               bool parallel_levels, bool as_json) {
  const std::vector<uint8_t> bytes = read_file_bytes(input);
  const cchc::DecodeOutput out = cchc::decode_bitstream_bytes(bytes, parallel_levels);
  cchc::write_ppm(output, out.image);
  const cchc::ProfileStats stats =
      cchc::profile_stats(out.image.height, out.image.width);
  if (as_json) {
    json j{{"command", "decode"},
           {"output", output},
           {"height", out.image.height},
           {"width", out.image.width},
           {"seconds", out.seconds},
           {"total_macs_per_pixel", stats.total_macs_per_pixel}};
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "decoded " << output << ": " << out.image.width << "x"
              << out.image.height << ", " << fixed3(out.seconds) << " s, "
              << fixed3(stats.total_macs_per_pixel) << " MAC/pixel\n";
  }
  return kExitOk;
}

int cmd_profile(const std::string& input, bool as_json) {
  const std::vector<uint8_t> bytes = read_file_bytes(input);
  const cchc::BitstreamData data = cchc::read_bitstream(bytes);
  const int h = data.header.height, w = data.header.width;
  const cchc::ProfileStats s = cchc::profile_stats(h, w);
  if (as_json) {
    json j{{"command", "profile"},
           {"height", h},
           {"width", w},
           {"synthesis_macs_per_pixel", s.synthesis_macs_per_pixel},
           {"arm_macs_per_eval", s.arm_macs_per_eval},
           {"latents_per_pixel", s.latents_per_pixel},
           {"arm_macs_per_pixel", s.arm_macs_per_pixel},
           {"upsample_macs_per_pixel", s.upsample_macs_per_pixel},
           {"total_macs_per_pixel", s.total_macs_per_pixel},
           {"weight_payload_bytes", s.weight_payload_bytes},
           {"header_bytes", s.header_bytes}};
    std::cout << j.dump() << "\n";
    return kExitOk;
  }
  std::cout << "image size:            " << w << "x" << h << "\n"
            << "synthesis MAC/pixel:   " << s.synthesis_macs_per_pixel << "\n"
            << "ARM MAC/eval:          " << s.arm_macs_per_eval << "\n"
            << "latents per pixel:     " << fixed3(s.latents_per_pixel) << "\n"
            << "ARM MAC/pixel:         " << fixed3(s.arm_macs_per_pixel) << "\n"
            << "upsampling MAC/pixel:  " << fixed3(s.upsample_macs_per_pixel) << "\n"
            << "total MAC/pixel:       " << fixed3(s.total_macs_per_pixel) << "\n"
            << "decoder weights:       " << s.weight_payload_bytes << " bytes (+ "
            << s.header_bytes << " header)\n";
  return kExitOk;
}

int cmd_eval(const std::string& pairs_path, const std::string& output, bool as_json) {
  const std::vector<cchc::CsvRow> rows = cchc::read_csv(pairs_path);
  std::string report = "image,bytes,bpp,psnr_db,ms_ssim\n";
  json jrows = json::array();
  for (const cchc::CsvRow& row : rows) {
    if (row.fields.size() != 2)
      throw cchc::ParseError("csv line " + std::to_string(row.line) +
                             ": expected 2 fields (original,second)");
    const std::string& original_path = row.fields[0];
    const std::string& second_path = row.fields[1];

    const cchc::Image original = cchc::read_ppm(original_path);
    cchc::Image second;
    size_t second_bytes = 0;
    if (second_path.size() >= 5 &&
        second_path.compare(second_path.size() - 5, 5, ".cchc") == 0) {
      const std::vector<uint8_t> bytes = read_file_bytes(second_path);
      second_bytes = bytes.size();
      second = cchc::decode_bitstream_bytes(bytes).image;
    } else {
      second = cchc::read_ppm(second_path);
      second_bytes = read_file_bytes(second_path).size();
    }

    const double m = cchc::mse(original, second);
    const double psnr = cchc::psnr_db(m);
    const double ssim = cchc::ms_ssim(original, second);
    const double bpp = 8.0 * static_cast<double>(second_bytes) /
                       static_cast<double>(original.pixels());
    report += original_path + "," + std::to_string(second_bytes) + "," + fixed3(bpp) +
              "," + fixed3(psnr) + "," + fixed3(ssim) + "\n";
    jrows.push_back(json{{"image", original_path},
                         {"bytes", second_bytes},
                         {"bpp", bpp},
                         {"psnr_db", json_metric(psnr)},
                         {"ms_ssim", ssim}});
  }
  if (as_json)
    std::cout << json{{"command", "eval"}, {"rows", jrows}}.dump() << "\n";
  if (!as_json || !output.empty()) write_text(output, report);
  return kExitOk;
}

int cmd_allocate(const std::string& points_path, int64_t budget,
                 const std::string& output, bool as_json) {
  const std::vector<cchc::CsvRow> rows = cchc::read_csv(points_path);
  if (rows.empty() ||
      rows[0].fields != std::vector<std::string>{"image", "bytes", "quality"})
    throw cchc::ParseError("csv line 1: expected header image,bytes,quality");

  std::vector<std::vector<cchc::RdPoint>> per_image;
  std::vector<std::string> names;
  for (size_t i = 1; i < rows.size(); ++i) {
    const cchc::CsvRow& row = rows[i];
    if (row.fields.size() != 3)
      throw cchc::ParseError("csv line " + std::to_string(row.line) +
                             ": expected 3 fields (image,bytes,quality)");
    cchc::RdPoint p;
    p.image = row.fields[0];
    p.bytes = cchc::csv_int(row, 1);
    p.quality = cchc::csv_double(row, 2);
    size_t slot = names.size();
    for (size_t k = 0; k < names.size(); ++k)
      if (names[k] == p.image) {
        slot = k;
        break;
      }
    if (slot == names.size()) {
      names.push_back(p.image);
      per_image.emplace_back();
    }
    per_image[slot].push_back(std::move(p));
  }

  const cchc::Allocation alloc = cchc::allocate_maxmin(per_image, budget);

  std::string report = "image,bytes,quality\n";
  json jrows = json::array();
  for (const cchc::RdPoint& p : alloc.chosen) {
    report += p.image + "," + std::to_string(p.bytes) + "," + fixed6(p.quality) + "\n";
    jrows.push_back(
        json{{"image", p.image}, {"bytes", p.bytes}, {"quality", p.quality}});
  }
  if (as_json) {
    json j{{"command", "allocate"},       {"budget", budget},
           {"total_bytes", alloc.total_bytes}, {"min_quality", alloc.min_quality},
           {"mean_quality", alloc.mean_quality}, {"chosen", jrows}};
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "allocated " << alloc.chosen.size() << " images: "
              << alloc.total_bytes << " bytes total, min quality "
              << fixed6(alloc.min_quality) << ", mean quality "
              << fixed6(alloc.mean_quality) << "\n";
  }
  if (!as_json || !output.empty()) write_text(output, report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cchc: an overfitted low-complexity image codec"};
  app.require_subcommand(1);

  EncodeArgs enc;
  CLI::App* encode = app.add_subcommand("encode", "Train and encode a PPM image");
  encode->add_option("--input", enc.input, "input PPM (P6)")->required();
  encode->add_option("--output", enc.output, "output bitstream path")->required();
  encode->add_option("--lambda", enc.lambda, "rate multiplier");
  encode->add_option("--config", enc.config_path, "key=value training config");
  encode->add_option("--seed", enc.seed, "training seed");
  encode->add_flag("--sweep", enc.sweep, "encode all lambda presets");
  encode->add_option("--jobs", enc.jobs, "sweep worker threads")
      ->check(CLI::PositiveNumber);
  encode->add_flag("--json", enc.as_json, "machine-readable summary");

  std::string dec_input, dec_output;
  bool dec_parallel = false, dec_json = false;
  CLI::App* decode = app.add_subcommand("decode", "Decode a bitstream to PPM");
  decode->add_option("--input", dec_input, "input bitstream")->required();
  decode->add_option("--output", dec_output, "output PPM path")->required();
  decode->add_flag("--parallel-levels", dec_parallel, "decode level streams on threads");
  decode->add_flag("--json", dec_json, "machine-readable summary");

  std::string prof_input;
  bool prof_json = false;
  CLI::App* profile = app.add_subcommand("profile", "Print the MAC budget table");
  profile->add_option("--input", prof_input, "input bitstream")->required();
  profile->add_flag("--json", prof_json, "machine-readable summary");

  std::string eval_pairs, eval_output;
  bool eval_json = false;
  CLI::App* eval = app.add_subcommand("eval", "Score original,second CSV pairs");
  eval->add_option("--pairs", eval_pairs, "CSV of original,second rows")->required();
  eval->add_option("--output", eval_output, "report CSV path (default stdout)");
  eval->add_flag("--json", eval_json, "machine-readable summary");

  std::string alloc_points, alloc_output;
  int64_t alloc_budget = 0;
  bool alloc_json = false;
  CLI::App* allocate = app.add_subcommand("allocate", "Max-min quality under a budget");
  allocate->add_option("--points", alloc_points, "CSV of image,bytes,quality")
      ->required();
  allocate->add_option("--budget", alloc_budget, "total byte budget")->required();
  allocate->add_option("--output", alloc_output, "allocation CSV path (default stdout)");
  allocate->add_flag("--json", alloc_json, "machine-readable summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // CLI11 prints --help itself with exit code 0.
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success))
      return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }

  // One flag appears in multiple places only through CLI11's storage; pick
  // whether --lambda/--seed were actually given for precedence handling.
  enc.lambda_given = encode->count("--lambda") > 0;
  enc.seed_given = encode->count("--seed") > 0;

  try {
    if (*encode) return cmd_encode(enc);
    if (*decode) return cmd_decode(dec_input, dec_output, dec_parallel, dec_json);
    if (*profile) return cmd_profile(prof_input, prof_json);
    if (*eval) return cmd_eval(eval_pairs, eval_output, eval_json);
    if (*allocate)
      return cmd_allocate(alloc_points, alloc_budget, alloc_output, alloc_json);
  } catch (const cchc::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cchc::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const cchc::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const cchc::CodingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const cchc::TrainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitTrain;
  } catch (const cchc::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << " (short by " << e.shortfall_bytes()
              << " bytes)\n";
    return kExitOther;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitUsage;
}
