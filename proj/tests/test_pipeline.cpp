// End-to-end pipeline plumbing: config parsing, checkpoint round trips, the
// AdamW update rule, forward determinism, exact mask locality through the
// full model, saliency gating, smoke training, and the report schema.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "plus/eval/report.hpp"
#include "plus/pipeline/saliency.hpp"
#include "plus/pipeline/trainer.hpp"

using namespace plus;
using namespace plus::pipeline;
namespace fs = std::filesystem;
using D = Tensor<double>;

namespace {

RunConfig micro_config() {
  RunConfig cfg;
  cfg.dim = 16;
  cfg.heads = 4;
  cfg.enc_widths = {4, 6, 8};
  cfg.roi = {16, 16, 8};
  cfg.liver_grid = {16, 16, 8};
  cfg.hda_scales = {{1, 1, 1}, {2, 2, 1}};
  cfg.classes = 5;
  cfg.lr = 1e-3;
  cfg.epochs = 1;
  cfg.batch_patients = 2;
  cfg.prior = data::Corruption{0, 1.0, 0.5, 0.0};
  cfg.precision = "f64";
  cfg.class_weights = {1, 1, 1, 1, 1};
  return cfg;
}

data::GenSpec micro_gen_spec() {
  auto spec = data::default_gen_spec();
  spec.volume = {48, 48, 32};
  spec.healthy_fraction = 0.25;
  spec.max_lesions = 2;
  return spec;
}

fs::path make_dataset(const std::string& name, int n_cases, int n_val = 0, int n_test = 0) {
  const auto root = fs::temp_directory_path() / name;
  fs::remove_all(root);
  fs::create_directories(root);
  const auto spec = micro_gen_spec();
  data::Manifest manifest;
  const int total = n_cases + n_val + n_test;
  for (int i = 0; i < total; ++i) {
    auto pc = data::generate_case(mix_seed(777, i), spec);
    char id[32];
    std::snprintf(id, sizeof(id), "case_%05d", i);
    pc.id = id;
    const std::string split =
        i < n_cases ? "train" : (i < n_cases + n_val ? "val" : "test");
    data::save_case(root, pc, split);
    manifest.splits[split].push_back(pc.id);
  }
  data::save_manifest(root, manifest);
  return root;
}

// first case in the split that has at least one candidate
data::PatientCase pick_case_with_candidates(const fs::path& root, const RunConfig& cfg) {
  const auto manifest = data::load_manifest(root);
  for (const auto& id : manifest.ids("train")) {
    auto pc = data::load_case(root, id);
    auto priors = data::mock_prior_provider(pc, cfg.prior, cfg.classes, cfg.seed_prior);
    if (!priors.candidates.empty()) return pc;
  }
  throw DataError("no case with candidates in the micro dataset");
}

}  // namespace

TEST_CASE("run config JSON round trip and validation") {
  auto cfg = micro_config();
  auto text = cfg.to_json();
  auto back = RunConfig::from_json(text);
  CHECK(back.dim == cfg.dim);
  CHECK(back.roi == cfg.roi);
  CHECK(back.hda_scales == cfg.hda_scales);
  CHECK(back.precision == "f64");
  CHECK(back.to_json() == text);

  CHECK_THROWS_AS(RunConfig::from_json("{not json"), ConfigError);
  auto bad = micro_config();
  bad.alpha = 0.9;
  bad.beta = 0.2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  auto bad2 = micro_config();
  bad2.hda_scales = {{16, 16, 16}};
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
  auto bad3 = micro_config();
  bad3.dim = 10;  // not divisible by 4 heads
  CHECK_THROWS_AS(bad3.validate(), ConfigError);
}

TEST_CASE("adamw update rule hand oracle") {
  nn::ParamSet<double> ps(1);
  ps.constant("p", {1}, 1.0);
  train::AdamW<double>::Config ocfg;
  ocfg.base_lr = 0.1;
  ocfg.min_lr = 0.0;
  ocfg.weight_decay = 0.1;
  ocfg.total_steps = 10;
  train::AdamW<double> opt(ps, ocfg);

  // lr(0) == base_lr
  CHECK(opt.lr_at(0) == doctest::Approx(0.1).epsilon(1e-12));
  // cosine end: lr(total) == min_lr
  CHECK(opt.lr_at(10) == doctest::Approx(0.0).epsilon(1e-12));

  // single hand-computed step with gradient 0.5
  auto& p = ps.at("p");
  Tape<double> tape;
  {
    Tape<double>::Scope scope(tape);
    auto loss = ops::reduce_sum_all(ops::mul(p, D::scalar(0.5)));
    tape.backward(loss);
  }
  opt.step(ps, tape);
  // p <- p - lr*wd*p = 0.99; m = 0.05; v = 0.00025; mhat = 0.5; vhat = 0.25
  // p <- 0.99 - 0.1 * 0.5 / (0.5 + 1e-8)
  const double expect = 0.99 - 0.1 * 0.5 / (std::sqrt(0.25) + 1e-8);
  CHECK(p.data()[0] == doctest::Approx(expect).epsilon(1e-12));

  // zero gradient and zero weight decay leave parameters unchanged
  nn::ParamSet<double> ps2(1);
  ps2.constant("q", {2}, 0.75);
  auto ocfg2 = ocfg;
  ocfg2.weight_decay = 0.0;
  train::AdamW<double> opt2(ps2, ocfg2);
  auto& q = ps2.at("q");
  auto probe = D::randn({2}, 3).set_requires_grad(true);
  Tape<double> tape2;
  {
    Tape<double>::Scope scope(tape2);
    auto loss = ops::reduce_sum_all(ops::mul(probe, probe));
    tape2.backward(loss);
  }
  opt2.step(ps2, tape2);  // q unreachable: zero grad
  CHECK(q.data()[0] == 0.75);
  CHECK(q.data()[1] == 0.75);
}

TEST_CASE("checkpoint round trip is byte-identical") {
  auto cfg = micro_config();
  Model<double> model(cfg);
  const auto dir = fs::temp_directory_path() / "plus_ckpt_test";
  fs::create_directories(dir);
  const auto f1 = dir / "a.ckpt", f2 = dir / "b.ckpt";
  save_checkpoint(f1, model.params, nullptr, cfg.to_json(), 3);

  Model<double> other(cfg);
  // scramble, then load back
  for (auto& [name, t] : other.params.items()) {
    for (auto& v : t.data_mut()) v += 1.0;
  }
  auto info = load_checkpoint<double>(f1, other.params, nullptr);
  CHECK(info.epoch == 3);
  CHECK(info.config_json == cfg.to_json());
  save_checkpoint(f2, other.params, nullptr, info.config_json, info.epoch);

  std::ifstream a(f1, std::ios::binary), b(f2, std::ios::binary);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().size() > 0);

  // corrupt magic -> rejected
  auto bytes = sa.str();
  bytes[0] = 'X';
  std::ofstream(dir / "bad.ckpt", std::ios::binary) << bytes;
  Model<double> m3(cfg);
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "bad.ckpt", m3.params, nullptr), DataError);
  fs::remove_all(dir);
}

TEST_CASE("forward_case is deterministic and rows sum to one") {
  auto cfg = micro_config();
  const auto root = make_dataset("plus_fwd_test", 6);
  auto pc = pick_case_with_candidates(root, cfg);
  auto priors = data::mock_prior_provider(pc, cfg.prior, cfg.classes, cfg.seed_prior);
  Model<double> model(cfg);
  auto r1 = forward_case(model, pc, priors);
  auto r2 = forward_case(model, pc, priors);
  REQUIRE(r1.probs.shape() == r2.probs.shape());
  CHECK(r1.probs.dim(1) == cfg.classes);
  for (std::int64_t i = 0; i < r1.probs.numel(); ++i) {
    CHECK(r1.probs.data()[i] == r2.probs.data()[i]);
  }
  for (std::int64_t i = 0; i < r1.probs.dim(0); ++i) {
    double sum = 0;
    for (int c = 0; c < cfg.classes; ++c) sum += r1.probs.at({i, c});
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
  fs::remove_all(root);
}

TEST_CASE("mask locality holds exactly through the full forward and saliency") {
  auto cfg = micro_config();
  const auto root = make_dataset("plus_locality_test", 8);
  auto pc = pick_case_with_candidates(root, cfg);
  auto priors = data::mock_prior_provider(pc, cfg.prior, cfg.classes, cfg.seed_prior);
  Model<double> model(cfg);

  // union of liver and candidate masks
  auto inside = [&](std::int64_t i) {
    if (pc.liver.v[i]) return true;
    for (const auto& c : priors.candidates) {
      if (c.mask.v[i]) return true;
    }
    return false;
  };

  auto base = forward_case(model, pc, priors);
  auto perturbed = pc;
  int changed = 0;
  for (std::int64_t i = 0; i < perturbed.volume.numel() && changed < 200; i += 97) {
    if (!inside(i)) {
      perturbed.volume.v[i] += 42.0f;
      ++changed;
    }
  }
  REQUIRE(changed > 0);
  auto after = forward_case(model, perturbed, priors);
  for (std::int64_t i = 0; i < base.probs.numel(); ++i) {
    CHECK(base.probs.data()[i] == after.probs.data()[i]);
  }

  // saliency: zero outside the union, non-negative everywhere
  auto sal = saliency_map(model, pc, priors, 0);
  for (std::int64_t i = 0; i < sal.numel(); ++i) {
    CHECK(sal.v[i] >= 0.f);
    if (!inside(i)) CHECK(sal.v[i] == 0.f);
  }
  CHECK_THROWS_AS(saliency_map(model, pc, priors, 99), ContractError);
  fs::remove_all(root);
}

TEST_CASE("smoke train: one epoch, checkpoints, logs, loss-weight contract") {
  auto cfg = micro_config();
  const auto root = make_dataset("plus_train_smoke", 4, 2, 2);
  const auto out = fs::temp_directory_path() / "plus_train_smoke_out";
  fs::remove_all(out);
  std::ostringstream log;
  auto result = train_run<double>(cfg, root, out, log);
  CHECK(fs::exists(result.last_checkpoint));
  CHECK(fs::exists(result.best_checkpoint));
  REQUIRE(result.log.size() == 1);
  CHECK(std::isfinite(result.log[0].total));
  CHECK(std::isfinite(result.log[0].lesion));
  CHECK(fs::exists(out / "train_log.csv"));

  // alpha=1, beta=0: logged total equals the lesion loss alone
  auto cfg2 = cfg;
  cfg2.alpha = 1.0;
  cfg2.beta = 0.0;
  const auto out2 = fs::temp_directory_path() / "plus_train_smoke_out2";
  fs::remove_all(out2);
  std::ostringstream log2;
  auto r2 = train_run<double>(cfg2, root, out2, log2);
  CHECK(r2.log[0].total == doctest::Approx(r2.log[0].lesion).epsilon(1e-12));

  fs::remove_all(out);
  fs::remove_all(out2);
  fs::remove_all(root);
}

TEST_CASE("training twice with identical seeds is bit-identical (f64)") {
  auto cfg = micro_config();
  cfg.epochs = 2;
  const auto root = make_dataset("plus_train_det", 4, 1, 1);
  auto run = [&](const char* tag) {
    const auto out = fs::temp_directory_path() / tag;
    fs::remove_all(out);
    std::ostringstream log;
    train_run<double>(cfg, root, out, log);
    std::ifstream in(out / "last.ckpt", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    fs::remove_all(out);
    return ss.str();
  };
  const auto a = run("plus_det_a");
  const auto b = run("plus_det_b");
  CHECK(a == b);
  CHECK(a.size() > 0);
  fs::remove_all(root);
}

TEST_CASE("evaluate_split produces a structurally sound report") {
  auto cfg = micro_config();
  const auto root = make_dataset("plus_eval_test", 4, 0, 6);
  Model<double> model(cfg);
  auto rep = evaluate_split(model, root, "test");
  CHECK(rep.patients == 6);
  CHECK(rep.candidates >= 0);
  CHECK(rep.lesion_detection.tp + rep.lesion_detection.fn == rep.gt_lesions);
  // counts conservation: every matched pair consumed one candidate and one GT
  CHECK(rep.matched <= rep.candidates);
  CHECK(rep.matched <= rep.gt_lesions);
  CHECK_THROWS_AS(evaluate_split(model, root, "val"), DataError);
  fs::remove_all(root);
}

TEST_CASE("report files match the documented schema") {
  eval::MetricsReport rep;
  rep.confusion = eval::confusion_matrix({0, 1}, {0, 1}, 5);
  rep.per_class_auc.assign(5, std::nan(""));
  rep.per_class_auc[0] = 0.9;
  rep.screening_roc.push_back({0.5, 1.0, 0.0});
  const auto dir = fs::temp_directory_path() / "plus_report_test";
  fs::remove_all(dir);
  eval::write_report_files(dir, rep, "gpr");

  std::ifstream csv(dir / "metrics.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == eval::kCsvHeader);
  std::string row;
  std::getline(csv, row);
  // 15 columns in the fixed order
  CHECK(std::count(header.begin(), header.end(), ',') == 14);
  CHECK(std::count(row.begin(), row.end(), ',') == 14);
  CHECK(row.rfind("gpr,", 0) == 0);

  std::ifstream tsv(dir / "roc.tsv");
  std::string tsv_header;
  std::getline(tsv, tsv_header);
  CHECK(tsv_header == "threshold\ttpr\tfpr");

  std::ifstream jf(dir / "metrics.json");
  std::stringstream js;
  js << jf.rdbuf();
  CHECK(js.str().find("\"lesion_level\"") != std::string::npos);
  CHECK(js.str().find("\"confusion_matrix\"") != std::string::npos);
  fs::remove_all(dir);
}
