// Command-line surface: synthetic dataset generation, training, evaluation,
// fusion-strategy ablations, and saliency export.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric abort.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>

#include "plus/data/volume_io.hpp"
#include "plus/eval/report.hpp"
#include "plus/pipeline/saliency.hpp"
#include "plus/pipeline/trainer.hpp"

namespace fs = std::filesystem;
using namespace plus;
using nlohmann::json;

namespace {

data::GenSpec parse_gen_spec(const std::string& path) {
  auto spec = data::default_gen_spec();
  if (path.empty()) return spec;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read generator spec " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator spec is not valid JSON: ") + e.what());
  }
  try {
    if (j.contains("volume")) {
      for (int i = 0; i < 3; ++i) spec.volume[i] = j["volume"][i].get<std::int64_t>();
    }
    if (j.contains("spacing")) {
      for (int i = 0; i < 3; ++i) spec.spacing[i] = j["spacing"][i].get<double>();
    }
    if (j.contains("healthy_fraction")) {
      spec.healthy_fraction = j["healthy_fraction"].get<double>();
    }
    if (j.contains("max_lesions")) spec.max_lesions = j["max_lesions"].get<int>();
    if (j.contains("condition_prior")) {
      for (int i = 0; i < 3; ++i) spec.condition_prior[i] = j["condition_prior"][i].get<double>();
    }
    if (j.contains("flat_class_prior")) {
      spec.flat_class_prior = j["flat_class_prior"].get<std::vector<double>>();
    }
    if (j.contains("radius_xy")) {
      spec.radius_xy_min = j["radius_xy"][0].get<double>();
      spec.radius_xy_max = j["radius_xy"][1].get<double>();
    }
    if (j.contains("radius_z")) {
      spec.radius_z_min = j["radius_z"][0].get<double>();
      spec.radius_z_max = j["radius_z"][1].get<double>();
    }
    if (j.contains("signatures")) {
      spec.signatures.clear();
      for (const auto& s : j["signatures"]) {
        data::ClassSignature sig;
        sig.intensity_offset = s.at("intensity_offset").get<double>();
        sig.texture_amp = s.at("texture_amp").get<double>();
        sig.texture_freq = s.at("texture_freq").get<double>();
        sig.boundary_soft = s.value("boundary_soft", 0.0);
        sig.malignant = s.at("malignant").get<bool>();
        if (s.contains("condition_affinity")) {
          for (int i = 0; i < 3; ++i) {
            sig.condition_affinity[i] = s["condition_affinity"][i].get<double>();
          }
        }
        spec.signatures.push_back(sig);
      }
      spec.classes = static_cast<int>(spec.signatures.size()) + 1;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed generator spec: ") + e.what());
  }
  return spec;
}

int cmd_gen_data(const std::string& out, int cases, std::uint64_t seed,
                 const std::string& spec_file, const std::string& split_fracs) {
  const auto spec = parse_gen_spec(spec_file);
  double f_train = 0.75, f_val = 0.125;
  {
    std::istringstream ss(split_fracs);
    std::string a, b, c;
    if (std::getline(ss, a, ',') && std::getline(ss, b, ',') && std::getline(ss, c, ',')) {
      f_train = std::stod(a);
      f_val = std::stod(b);
      const double f_test = std::stod(c);
      if (f_train < 0 || f_val < 0 || f_test < 0 ||
          std::abs(f_train + f_val + f_test - 1.0) > 1e-9) {
        throw ConfigError("split fractions must be non-negative and sum to 1");
      }
    } else {
      throw ConfigError("--split-fracs expects three comma-separated fractions");
    }
  }
  const int n_train = static_cast<int>(std::llround(cases * f_train));
  const int n_val = static_cast<int>(std::llround(cases * f_val));

  const fs::path root(out);
  fs::create_directories(root);
  data::Manifest manifest;
  for (int i = 0; i < cases; ++i) {
    auto pc = data::generate_case(mix_seed(seed, static_cast<std::uint64_t>(i)), spec);
    char name[32];
    std::snprintf(name, sizeof(name), "case_%05d", i);
    pc.id = name;
    const std::string split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    data::save_case(root, pc, split);
    manifest.splits[split].push_back(pc.id);
    if ((i + 1) % 100 == 0) std::cout << "generated " << (i + 1) << "/" << cases << "\n";
  }
  data::save_manifest(root, manifest);
  std::cout << "wrote " << cases << " cases to " << root << "\n";
  return 0;
}

template <typename T>
int run_train(const pipeline::RunConfig& cfg, const std::string& data, const std::string& out) {
  auto result = pipeline::train_run<T>(cfg, data, out, std::cout);
  std::cout << "last checkpoint: " << result.last_checkpoint << "\n";
  std::cout << "best checkpoint: " << result.best_checkpoint << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& data, const std::string& out) {
  auto cfg = pipeline::RunConfig::from_file(config);
  if (cfg.precision == "f64") return run_train<double>(cfg, data, out);
  return run_train<float>(cfg, data, out);
}

template <typename T>
eval::MetricsReport run_eval(const pipeline::RunConfig& cfg, const fs::path& ckpt,
                             const std::string& data, const std::string& split) {
  pipeline::Model<T> model(cfg);
  pipeline::load_checkpoint<T>(ckpt, model.params, nullptr);
  return pipeline::evaluate_split(model, data, split, &std::cout);
}

int cmd_eval(const std::string& ckpt, std::string data, const std::string& split,
             const std::string& report_dir) {
  auto cfg = pipeline::RunConfig::from_json(pipeline::peek_checkpoint_config(ckpt));
  if (data.empty()) data = cfg.data_dir;
  if (data.empty()) throw ConfigError("no --data given and checkpoint stores no data_dir");
  const auto rep = cfg.precision == "f64" ? run_eval<double>(cfg, ckpt, data, split)
                                          : run_eval<float>(cfg, ckpt, data, split);
  eval::write_report_files(report_dir, rep, model::fusion_name(cfg.fusion));
  std::cout << eval::kCsvHeader << "\n"
            << eval::report_to_csv_row(rep, model::fusion_name(cfg.fusion)) << "\n";
  return 0;
}

struct AblationRow {
  std::string strategy;
  std::uint64_t seed;
  eval::MetricsReport rep;
};

void apply_strategy(pipeline::RunConfig& cfg, const std::string& token) {
  if (token == "nohda") {
    cfg.use_hda = false;
    cfg.fusion = model::Fusion::none;
  } else {
    cfg.use_hda = true;
    cfg.fusion = model::fusion_from_name(token);
  }
}

int cmd_ablate(const std::string& config, const std::string& data,
               const std::string& strategies, const std::string& out,
               const std::string& seeds) {
  const auto base = pipeline::RunConfig::from_file(config);
  std::vector<std::string> strats;
  {
    std::istringstream ss(strategies);
    std::string tok;
    while (std::getline(ss, tok, ',')) strats.push_back(tok);
  }
  std::vector<std::uint64_t> seed_list;
  {
    std::istringstream ss(seeds);
    std::string tok;
    while (std::getline(ss, tok, ',')) seed_list.push_back(std::stoull(tok));
  }
  if (strats.empty() || seed_list.empty()) {
    throw ConfigError("ablate needs non-empty --strategies and --seeds");
  }

  const fs::path out_root(out);
  fs::create_directories(out_root);
  std::vector<AblationRow> rows;
  for (const auto seed : seed_list) {
    for (const auto& strat : strats) {
      auto cfg = base;
      apply_strategy(cfg, strat);
      cfg.seed_init = seed;
      cfg.seed_order = mix_seed(seed, 0x0bdULL);  // shared across strategies per seed
      const auto run_dir = out_root / (strat + "_s" + std::to_string(seed));
      std::cout << "=== ablation arm " << strat << " seed " << seed << " ===\n";
      eval::MetricsReport rep;
      if (cfg.precision == "f64") {
        pipeline::train_run<double>(cfg, data, run_dir, std::cout);
        rep = run_eval<double>(cfg, run_dir / "best.ckpt", data, "test");
      } else {
        pipeline::train_run<float>(cfg, data, run_dir, std::cout);
        rep = run_eval<float>(cfg, run_dir / "best.ckpt", data, "test");
      }
      eval::write_report_files(run_dir / "report", rep, strat);
      rows.push_back({strat, seed, rep});
    }
  }

  std::ofstream csv(out_root / "ablation.csv");
  csv << "strategy,seed," << eval::kCsvHeader << "\n";
  for (const auto& r : rows) {
    csv << r.strategy << "," << r.seed << "," << eval::report_to_csv_row(r.rep, r.strategy)
        << "\n";
  }
  std::cout << "\nstrategy          mean_lesion_macro_f1  mean_malig_f1  mean_screen_acc\n";
  for (const auto& strat : strats) {
    double mf = 0, mm = 0, ms = 0;
    int n = 0;
    for (const auto& r : rows) {
      if (r.strategy != strat) continue;
      mf += r.rep.lesion_macro_f1;
      mm += r.rep.patient_malignant.f1;
      ms += r.rep.screening_accuracy;
      ++n;
    }
    if (n) {
      std::printf("%-16s  %20.4f  %13.4f  %15.4f\n", strat.c_str(), mf / n, mm / n, ms / n);
    }
  }
  std::cout << "wrote " << (out_root / "ablation.csv") << "\n";
  return 0;
}

template <typename T>
int run_saliency(const pipeline::RunConfig& cfg, const fs::path& ckpt, const std::string& data,
                 const std::string& case_id, int cls, const std::string& out_file) {
  pipeline::Model<T> model(cfg);
  pipeline::load_checkpoint<T>(ckpt, model.params, nullptr);
  const auto pc = data::load_case(data, case_id);
  const auto priors = data::mock_prior_provider(pc, cfg.prior, cfg.classes, cfg.seed_prior);
  if (priors.candidates.empty()) {
    throw DataError("case " + case_id + " has no candidates for saliency");
  }
  const auto sal = pipeline::saliency_map(model, pc, priors, cls);
  data::write_f32_raw(out_file, sal);
  json meta = {{"case", case_id},
               {"class", cls},
               {"shape", {sal.dims[0], sal.dims[1], sal.dims[2]}},
               {"spacing", {sal.spacing[0], sal.spacing[1], sal.spacing[2]}},
               {"format", "little-endian float32, x-fastest"}};
  std::ofstream meta_out(out_file + ".json");
  meta_out << meta.dump(2) << "\n";
  std::cout << "wrote " << out_file << " and " << out_file << ".json\n";
  return 0;
}

int cmd_saliency(const std::string& ckpt, std::string data, const std::string& case_id, int cls,
                 const std::string& out_file) {
  auto cfg = pipeline::RunConfig::from_json(pipeline::peek_checkpoint_config(ckpt));
  if (data.empty()) data = cfg.data_dir;
  if (data.empty()) throw ConfigError("no --data given and checkpoint stores no data_dir");
  if (cfg.precision == "f64") {
    return run_saliency<double>(cfg, ckpt, data, case_id, cls, out_file);
  }
  return run_saliency<float>(cfg, ckpt, data, case_id, cls, out_file);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PLUS liver-lesion diagnosis pipeline"};
  app.require_subcommand(1);

  std::string out, spec_file, split_fracs = "0.75,0.125,0.125";
  int cases = 100;
  std::uint64_t seed = 1;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic phantom dataset");
  gen->add_option("--out", out, "output dataset directory")->required();
  gen->add_option("--cases", cases, "total number of cases")->required();
  gen->add_option("--seed", seed, "base generator seed");
  gen->add_option("--spec", spec_file, "generator spec JSON (defaults built in)");
  gen->add_option("--split-fracs", split_fracs, "train,val,test fractions");

  std::string config, data, train_out;
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config, "run config JSON")->required();
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--out", train_out, "output directory for checkpoints/logs")->required();

  std::string ckpt, split = "test", report_dir, eval_data;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  ev->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  ev->add_option("--data", eval_data, "dataset directory (default: from checkpoint)");
  ev->add_option("--split", split, "split name");
  ev->add_option("--report", report_dir, "report output directory")->required();

  std::string strategies = "nohda,none,gpr", abl_out, abl_seeds = "1,2,3", abl_data, abl_config;
  auto* abl = app.add_subcommand("ablate", "train+eval a set of fusion strategies");
  abl->add_option("--config", abl_config, "base run config JSON")->required();
  abl->add_option("--data", abl_data, "dataset directory")->required();
  abl->add_option("--strategies", strategies, "comma list: nohda,none,gpr,gated,weighted,distillation");
  abl->add_option("--out", abl_out, "output directory")->required();
  abl->add_option("--seeds", abl_seeds, "comma list of seeds");

  std::string sal_ckpt, sal_case, sal_out, sal_data;
  int sal_class = 0;
  auto* sal = app.add_subcommand("saliency", "export an input-gradient saliency volume");
  sal->add_option("--checkpoint", sal_ckpt, "checkpoint file")->required();
  sal->add_option("--case", sal_case, "case id")->required();
  sal->add_option("--class", sal_class, "target class index")->required();
  sal->add_option("--out", sal_out, "output raw file")->required();
  sal->add_option("--data", sal_data, "dataset directory (default: from checkpoint)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(out, cases, seed, spec_file, split_fracs);
    if (train->parsed()) return cmd_train(config, data, train_out);
    if (ev->parsed()) return cmd_eval(ckpt, eval_data, split, report_dir);
    if (abl->parsed()) return cmd_ablate(abl_config, abl_data, strategies, abl_out, abl_seeds);
    if (sal->parsed()) return cmd_saliency(sal_ckpt, sal_data, sal_case, sal_class, sal_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
