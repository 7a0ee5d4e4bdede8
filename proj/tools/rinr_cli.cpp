// rinr: encode image folders into .rinr archives, decode them back, and run
// the compression, search and benchmark tooling around them.
//
// Exit status: 0 success, 1 usage, 2 data/integrity, 3 numeric failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rinr/archive.hpp"
#include "rinr/bench.hpp"
#include "rinr/compressor.hpp"
#include "rinr/decoder.hpp"
#include "rinr/encoder.hpp"
#include "rinr/error.hpp"
#include "rinr/image_io.hpp"
#include "rinr/metrics.hpp"
#include "rinr/nas.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

bool g_json = false;

// JSON numbers cannot hold inf/nan; emit them as strings.
json num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

std::string fmt_db(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << v;
  return os.str();
}

void emit(const json& record) { std::cout << record.dump() << '\n'; }

struct SizeArg {
  int h = 0;
  int w = 0;
};

SizeArg parse_size(const std::string& s) {
  if (s.empty()) return {};
  const auto x = s.find_first_of("xX");
  if (x == std::string::npos) throw rinr::InvalidInput("size must look like HxW");
  SizeArg r{std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
  if (r.h < 1 || r.w < 1) throw rinr::InvalidInput("size must be positive");
  return r;
}

rinr::Architecture parse_arch(const std::string& s, double omega) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw rinr::InvalidInput("--arch expects LAYERS,HIDDEN");
  return rinr::Architecture::from_layers(std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1)), omega);
}

template <typename T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v)) throw rinr::InvalidInput("bad list element '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<rinr::NamedImage> load_dir(const fs::path& dir) {
  std::vector<rinr::NamedImage> images;
  for (const auto& p : rinr::io::list_images(dir)) images.push_back({p.stem().string(), rinr::io::load_image(p)});
  if (images.empty()) throw rinr::InvalidInput("no images found in " + dir.string());
  return images;
}

// Values from a JSON config file replace whatever the command line said.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  std::ifstream f(path);
  if (!f) throw rinr::IoError("cannot open config " + path);
  json cfg;
  try {
    cfg = json::parse(f);
  } catch (const json::parse_error& e) {
    throw rinr::InvalidInput(std::string("config: ") + e.what());
  }
  if (!cfg.is_object()) throw rinr::InvalidInput("config must be a JSON object");
  const json& section = cfg.contains(sub->get_name()) ? cfg[sub->get_name()] : cfg;
  for (const auto& [key, value] : section.items()) {
    if (value.is_object()) continue;
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw rinr::InvalidInput("config: unknown option '" + key + "' for " + sub->get_name());
    }
    opt->clear();
    if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
      opt->add_result(joined);
    } else if (value.is_boolean()) {
      opt->add_result(value.get<bool>() ? "true" : "false");
    } else {
      opt->add_result(value.is_string() ? value.get<std::string>() : value.dump());
    }
    opt->run_callback();
  }
}

json report_json(const std::string& id, const rinr::EncodeReport& r) {
  json psnrs = json::array();
  for (double p : r.psnr_after_round) psnrs.push_back(num(p));
  return {{"type", "encode_image"},  {"id", id},
          {"psnr_after_round", psnrs}, {"final_psnr", num(r.final_psnr())},
          {"final_prune_ratio", r.final_prune_ratio}, {"dynamic_target_ratio", r.dynamic_target_ratio},
          {"prune_events", r.prune_events}, {"wall_time_s", r.wall_time}, {"psnr_domain", "normalized"}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rapid INR image codec: per-image sine MLPs, pruning, quantization, .rinr archives"};
  app.require_subcommand(1);
  app.add_flag("--json", g_json, "Emit machine-readable JSON lines");
  std::string config_path;
  app.add_option("--config", config_path, "JSON file whose values override command-line flags");

  // encode
  auto* enc = app.add_subcommand("encode", "Fit one INR per image in a directory");
  std::string enc_dir, enc_out = "out.rinr", enc_arch = "3,15", enc_schedule = "cifar";
  double enc_omega = 30.0, r1_lr = 5e-4, rt_lr = 2e-4, enc_ratio = 0.2;
  long r1_steps = 5000, rt_steps = 10000;
  bool skip_round2 = false, per_layer = false, fail_fast = false, enc_f16 = false;
  std::uint64_t enc_seed = 0;
  int enc_jobs = 1;
  enc->add_option("images", enc_dir, "Directory of PNG/JPEG/BMP/PPM images")->required();
  enc->add_option("-o,--output", enc_out, "Output archive");
  enc->add_option("--arch", enc_arch, "LAYERS,HIDDEN (weight matrices, hidden width)");
  enc->add_option("--omega", enc_omega, "Sine activation frequency");
  enc->add_option("--schedule", enc_schedule, "Dynamic prune schedule: cifar|large");
  enc->add_flag("--skip-round2", skip_round2, "Skip the fixed-ratio prune round");
  enc->add_option("--seed", enc_seed, "Global seed");
  enc->add_option("--jobs", enc_jobs, "Images fitted in parallel");
  enc->add_option("--round1-steps", r1_steps);
  enc->add_option("--round1-lr", r1_lr);
  enc->add_option("--retrain-steps", rt_steps);
  enc->add_option("--retrain-lr", rt_lr);
  enc->add_option("--prune-ratio", enc_ratio, "Round-2 prune ratio");
  enc->add_flag("--per-layer", per_layer, "Prune per layer instead of globally");
  enc->add_flag("--fail-fast", fail_fast, "Abort on the first failed image");
  enc->add_flag("--f16", enc_f16, "Store full-precision layers as binary16");

  // decode
  auto* dec = app.add_subcommand("decode", "Decode an archive to PNG files");
  std::string dec_in, dec_out = ".", dec_size;
  std::vector<std::string> dec_ids;
  int dec_jobs = 1;
  dec->add_option("archive", dec_in)->required();
  dec->add_option("-o,--output", dec_out, "Output directory");
  dec->add_option("--size", dec_size, "HxW output size (default: source size)");
  dec->add_option("--ids", dec_ids, "Only these record ids")->delimiter(',');
  dec->add_option("--jobs", dec_jobs);

  // prune
  auto* prn = app.add_subcommand("prune", "Magnitude-prune every model of an archive");
  std::string prn_in, prn_out, prn_schedule, prn_images;
  double prn_ratio = -1.0;
  bool prn_per_layer = false;
  prn->add_option("archive", prn_in)->required();
  prn->add_option("-o,--output", prn_out)->required();
  prn->add_option("--ratio", prn_ratio, "Total prune ratio in [0,1)");
  prn->add_option("--schedule", prn_schedule, "Dynamic schedule (needs --images)");
  prn->add_option("--images", prn_images, "Source images named <id>.*, for PSNR-driven ratios");
  prn->add_flag("--per-layer", prn_per_layer);

  // quantize
  auto* qnt = app.add_subcommand("quantize", "Quantize hidden layers of every model");
  std::string q_in, q_out;
  int q_bits = 8;
  qnt->add_option("archive", q_in)->required();
  qnt->add_option("-o,--output", q_out)->required();
  qnt->add_option("--bits", q_bits)->check(CLI::IsMember({8, 16}));

  // psnr
  auto* ps = app.add_subcommand("psnr", "PSNR between two image files");
  std::string ps_a, ps_b, ps_domain = "normalized";
  ps->add_option("a", ps_a)->required();
  ps->add_option("b", ps_b)->required();
  ps->add_option("--domain", ps_domain, "normalized|8bit")->check(CLI::IsMember({"normalized", "8bit"}));

  // nas
  auto* nas = app.add_subcommand("nas", "Enumerate architectures under a byte budget, optionally sweep them");
  std::size_t nas_budget = 13500;
  std::string nas_shape = "uniform", sweep_dir, sweep_omegas = "30", sweep_lrs = "5e-4", sweep_steps = "5000", sweep_csv;
  rinr::EnumerateOptions eopt;
  int nas_jobs = 1;
  std::uint64_t nas_seed = 0;
  nas->add_option("--budget", nas_budget, "Bytes (dense f32 weights + biases)");
  nas->add_option("--shape", nas_shape)->check(CLI::IsMember({"uniform", "tapered"}));
  nas->add_option("--min-depth", eopt.min_depth);
  nas->add_option("--max-depth", eopt.max_depth);
  nas->add_option("--max-width", eopt.max_width);
  nas->add_option("--taper-floor", eopt.taper_floor);
  nas->add_option("--sweep-images", sweep_dir, "Run a sweep over the enumerated archs on these images");
  nas->add_option("--omegas", sweep_omegas);
  nas->add_option("--lrs", sweep_lrs);
  nas->add_option("--steps", sweep_steps);
  nas->add_option("--csv", sweep_csv, "Write the sweep table here");
  nas->add_option("--jobs", nas_jobs);
  nas->add_option("--seed", nas_seed);

  // bench
  auto* bn = app.add_subcommand("bench", "Decode throughput of an archive");
  std::string bn_in, bn_size;
  rinr::BenchOptions bopt;
  bool bn_compare = false;
  bn->add_option("archive", bn_in)->required();
  bn->add_option("--batch", bopt.batch);
  bn->add_option("--jobs", bopt.jobs);
  bn->add_option("--size", bn_size);
  bn->add_flag("--compare", bn_compare, "Also run jobs=1 and report the speedup");

  // stats
  auto* st = app.add_subcommand("stats", "Size accounting for an archive");
  std::string st_in, st_jpeg;
  st->add_option("archive", st_in)->required();
  st->add_option("--jpeg-dir", st_jpeg, "Directory of JPEGs to compare against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    for (auto* sub : app.get_subcommands()) apply_config(sub, config_path);

    if (*enc) {
      rinr::EncodeConfig cfg;
      cfg.arch = parse_arch(enc_arch, enc_omega);
      cfg.round1_lr = r1_lr;
      cfg.round1_steps = r1_steps;
      cfg.retrain_lr = rt_lr;
      cfg.retrain_steps = rt_steps;
      cfg.iterative_prune_ratio = enc_ratio;
      cfg.skip_round2 = skip_round2;
      cfg.schedule = enc_schedule;
      cfg.prune_scope = per_layer ? rinr::PruneScope::per_layer : rinr::PruneScope::global;
      cfg.seed = enc_seed;
      cfg.validate();
      const auto images = load_dir(enc_dir);
      const auto res = rinr::encode_dataset(images, cfg, enc_jobs,
                                            fail_fast ? rinr::FailurePolicy::fail_fast : rinr::FailurePolicy::skip);
      rinr::WriteOptions wopt;
      wopt.float_storage = enc_f16 ? rinr::FloatStorage::f16 : rinr::FloatStorage::f32;
      const auto bytes = rinr::write_file(res.archive, enc_out, wopt);
      for (std::size_t i = 0; i < res.reports.size(); ++i) {
        const auto& id = res.archive.records[i].id;
        if (g_json) emit(report_json(id, res.reports[i]));
        else
          std::cout << id << "  psnr " << fmt_db(res.reports[i].final_psnr()) << " dB  pruned "
                    << res.reports[i].final_prune_ratio << "\n";
      }
      for (const auto& f : res.failures) {
        if (g_json) emit({{"type", "encode_failure"}, {"index", f.index}, {"id", f.id}, {"message", f.message}});
        else std::cerr << "failed: " << f.id << ": " << f.message << "\n";
      }
      if (g_json)
        emit({{"type", "encode_summary"}, {"output", enc_out}, {"bytes", bytes}, {"images", res.reports.size()},
              {"failures", res.failures.size()}, {"mean_psnr", num(res.mean_psnr)},
              {"mean_prune_ratio", res.mean_prune_ratio}, {"psnr_domain", "normalized"}});
      else
        std::cout << "wrote " << enc_out << " (" << bytes << " bytes, " << res.reports.size()
                  << " images), mean psnr " << fmt_db(res.mean_psnr) << " dB, mean prune ratio "
                  << res.mean_prune_ratio << "\n";
      return res.failures.empty() ? kOk : kNumeric;
    }

    if (*dec) {
      const auto size = parse_size(dec_size);
      const auto archive = rinr::read_file(dec_in);
      fs::create_directories(dec_out);
      std::vector<std::size_t> which;
      if (dec_ids.empty()) {
        for (std::size_t i = 0; i < archive.records.size(); ++i) which.push_back(i);
      } else {
        for (const auto& id : dec_ids) {
          const auto k = archive.find(id);
          if (k < 0) throw rinr::InvalidInput("no record with id '" + id + "'");
          which.push_back(static_cast<std::size_t>(k));
        }
      }
      for (std::size_t k : which) {
        const auto& rec = archive.records[k];
        const auto img = rinr::decode(rec.model, rinr::DecodeOptions{size.h, size.w, dec_jobs});
        const fs::path out = fs::path(dec_out) / (rec.id + ".png");
        rinr::io::save_png(img, out);
        if (g_json)
          emit({{"type", "decode_image"}, {"id", rec.id}, {"path", out.string()}, {"height", img.height},
                {"width", img.width}});
        else std::cout << out.string() << "  " << img.height << "x" << img.width << "\n";
      }
      return kOk;
    }

    if (*prn) {
      auto archive = rinr::read_file(prn_in);
      const auto scope = prn_per_layer ? rinr::PruneScope::per_layer : rinr::PruneScope::global;
      if ((prn_ratio >= 0.0) == !prn_schedule.empty())
        throw rinr::InvalidInput("prune needs exactly one of --ratio or --schedule");
      std::optional<rinr::PruneSchedule> schedule;
      if (!prn_schedule.empty()) {
        if (prn_images.empty()) throw rinr::InvalidInput("--schedule needs --images");
        schedule = rinr::PruneSchedule::by_name(prn_schedule);
      }
      for (auto& rec : archive.records) {
        double ratio = prn_ratio;
        if (schedule) {
          fs::path src;
          for (const auto& p : rinr::io::list_images(prn_images))
            if (p.stem().string() == rec.id) src = p;
          if (src.empty()) throw rinr::InvalidInput("no source image for record '" + rec.id + "'");
          const auto img = rinr::io::load_image(src);
          const double p = rinr::psnr(rinr::decode(rec.model, img.height, img.width), img).psnr_db;
          ratio = rinr::dynamic_ratio(*schedule, p);
        }
        rec.model = rinr::prune_l1(rec.model, ratio, scope);
        if (g_json)
          emit({{"type", "prune"}, {"id", rec.id}, {"target_ratio", ratio}, {"prune_ratio", rec.model.prune_ratio()}});
        else std::cout << rec.id << "  pruned " << rec.model.prune_ratio() << "\n";
      }
      rinr::write_file(archive, prn_out);
      return kOk;
    }

    if (*qnt) {
      auto archive = rinr::read_file(q_in);
      const auto mode = q_bits == 8 ? rinr::QuantMode::affine8 : rinr::QuantMode::affine16;
      for (auto& rec : archive.records) rec.model = rinr::quantize(rec.model, mode);
      const auto bytes = rinr::write_file(archive, q_out);
      if (g_json) emit({{"type", "quantize"}, {"output", q_out}, {"bits", q_bits}, {"bytes", bytes}});
      else std::cout << "wrote " << q_out << " (" << bytes << " bytes)\n";
      return kOk;
    }

    if (*ps) {
      const auto a = rinr::io::load_image(ps_a);
      const auto b = rinr::io::load_image(ps_b);
      const auto domain = ps_domain == "8bit" ? rinr::PsnrDomain::eight_bit : rinr::PsnrDomain::normalized;
      const auto r = rinr::psnr(a, b, domain);
      if (g_json) emit({{"type", "psnr"}, {"psnr_db", num(r.psnr_db)}, {"mse", r.mse}, {"domain", ps_domain}});
      else std::cout << fmt_db(r.psnr_db) << "\n";
      return kOk;
    }

    if (*nas) {
      const auto shape = rinr::parse_shape(nas_shape);
      const auto en = rinr::enumerate(nas_budget, shape, eopt);
      for (const auto& w : en.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& a : en.archs) {
        if (g_json)
          emit({{"type", "nas_arch"}, {"arch", a.label()}, {"dims", a.dims}, {"bytes", rinr::dense_bytes(a)},
                {"budget", nas_budget}, {"shape", nas_shape}});
        else std::cout << a.label() << "  " << rinr::dense_bytes(a) << " bytes\n";
      }
      if (!sweep_dir.empty()) {
        std::vector<rinr::ImageBuffer> images;
        for (auto& n : load_dir(sweep_dir)) images.push_back(std::move(n.image));
        rinr::SweepAxes axes{en.archs, parse_list<double>(sweep_omegas), parse_list<double>(sweep_lrs),
                             parse_list<long>(sweep_steps)};
        const auto table = rinr::sweep(images, axes, rinr::SweepOptions{nas_seed, nas_jobs});
        if (!sweep_csv.empty()) {
          std::ofstream f(sweep_csv);
          if (!f) throw rinr::IoError("cannot write " + sweep_csv);
          f << table.to_csv();
        }
        for (const auto& r : table.rows) {
          if (g_json)
            emit({{"type", "sweep_row"}, {"cell", r.cell}, {"arch", r.arch}, {"bytes", r.bytes}, {"omega", r.omega},
                  {"lr", r.lr}, {"steps", r.steps}, {"mean_psnr", num(r.mean_psnr)}, {"min_psnr", num(r.min_psnr)},
                  {"diverged", r.diverged}, {"failed", r.failed}, {"best_omega", r.best_omega}});
        }
        if (!g_json) std::cout << table.to_csv();
      }
      return kOk;
    }

    if (*bn) {
      const auto size = parse_size(bn_size);
      bopt.height = size.h;
      bopt.width = size.w;
      auto to_json = [](const rinr::BenchReport& r) {
        return json{{"type", "bench"},           {"batch", r.batch},
                    {"jobs", r.jobs},             {"images", r.images},
                    {"pixels", r.pixels},         {"load_s", r.load_s},
                    {"dequantize_s", r.dequantize_s}, {"forward_s", r.forward_s},
                    {"clamp_convert_s", r.clamp_convert_s}, {"decode_wall_s", r.decode_wall_s},
                    {"images_per_s", r.images_per_s}, {"pixels_per_s", r.pixels_per_s},
                    {"output_digest", r.output_digest}};
      };
      auto print = [&](const rinr::BenchReport& r) {
        if (g_json) emit(to_json(r));
        else
          std::cout << "batch " << r.batch << " jobs " << r.jobs << ": " << r.images << " images, " << r.images_per_s
                    << " img/s, " << r.pixels_per_s << " px/s (load " << r.load_s << " s, dequantize "
                    << r.dequantize_s << " s, forward " << r.forward_s << " s, clamp/convert " << r.clamp_convert_s
                    << " s) digest " << std::hex << r.output_digest << std::dec << "\n";
      };
      const auto rep = rinr::bench_file(bn_in, bopt);
      print(rep);
      if (bn_compare && bopt.jobs > 1) {
        auto base_opt = bopt;
        base_opt.jobs = 1;
        const auto base = rinr::bench_file(bn_in, base_opt);
        print(base);
        const double speedup = rep.decode_wall_s > 0 ? base.decode_wall_s / rep.decode_wall_s : 0.0;
        if (g_json) emit({{"type", "bench_speedup"}, {"jobs", bopt.jobs}, {"speedup", speedup},
                          {"identical_output", base.output_digest == rep.output_digest}});
        else std::cout << "speedup jobs " << bopt.jobs << " vs 1: " << speedup << "x\n";
      }
      return kOk;
    }

    if (*st) {
      const auto archive = rinr::read_file(st_in);
      const auto s = rinr::stats(archive);
      const std::size_t file_bytes = fs::file_size(st_in);
      std::optional<std::size_t> jpeg;
      if (!st_jpeg.empty()) jpeg = rinr::jpeg_directory_bytes(st_jpeg);
      if (g_json) {
        for (const auto& r : s.records)
          emit({{"type", "stats_record"}, {"id", r.id}, {"bytes", r.bytes}, {"dense_bytes", r.dense_bytes},
                {"raw_bytes", r.raw_bytes}, {"prune_ratio", r.prune_ratio}, {"quant", rinr::to_string(r.quant)}});
        json j{{"type", "stats"}, {"file_bytes", file_bytes}, {"total_bytes", s.total_bytes},
               {"header_bytes", s.header_bytes}, {"dense_f32_bytes", s.dense_f32_bytes}, {"raw_bytes", s.raw_bytes},
               {"ratio_vs_dense", s.ratio_vs_dense()}, {"ratio_vs_raw", s.ratio_vs_raw()},
               {"mean_prune_ratio", s.mean_prune_ratio}, {"records", s.records.size()}};
        if (jpeg) {
          j["jpeg_bytes"] = *jpeg;
          j["ratio_vs_jpeg"] = *jpeg ? static_cast<double>(s.total_bytes) / static_cast<double>(*jpeg) : 0.0;
        }
        emit(j);
      } else {
        for (const auto& r : s.records)
          std::cout << r.id << "  " << r.bytes << " bytes (dense f32 " << r.dense_bytes << ", raw " << r.raw_bytes
                    << ")  pruned " << r.prune_ratio << "  " << rinr::to_string(r.quant) << "\n";
        std::cout << "total " << s.total_bytes << " bytes, header " << s.header_bytes << ", dense f32 "
                  << s.dense_f32_bytes << ", raw " << s.raw_bytes << "\n";
        std::cout << "compressed/dense-f32 " << s.ratio_vs_dense() << "  compressed/original " << s.ratio_vs_raw()
                  << "  mean prune ratio " << s.mean_prune_ratio << "\n";
        if (jpeg)
          std::cout << "jpeg dir " << *jpeg << " bytes, compressed/jpeg "
                    << (*jpeg ? static_cast<double>(s.total_bytes) / static_cast<double>(*jpeg) : 0.0) << "\n";
      }
      return kOk;
    }
  } catch (const rinr::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const rinr::InvalidInput& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return kUsage;
  } catch (const rinr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage: bad number: " << e.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
