#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sfcgan/sfc_model.hpp"

using namespace sfcgan;
namespace fs = std::filesystem;

namespace {

Connectome random_connectome(int n, Domain dom, uint64_t seed) {
  Rng rng(seed);
  Connectome c;
  c.n = n;
  c.domain = dom;
  c.values.assign(size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    c.at(i, i) = dom == Domain::FC ? 1.0 : 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = dom == Domain::FC ? rng.uniform(-1.0, 1.0) : rng.uniform(0.0, 1.0);
      c.at(i, j) = v;
      c.at(j, i) = v;
    }
  }
  return c;
}

bool params_equal(const nn::ParamSet& a, const nn::ParamSet& b) {
  if (a.items.size() != b.items.size()) return false;
  for (size_t i = 0; i < a.items.size(); ++i) {
    if (a.items[i].name != b.items[i].name) return false;
    if (a.items[i].value.shape != b.items[i].value.shape) return false;
    if (a.items[i].value.data != b.items[i].value.data) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("init_models is deterministic and seed-sensitive") {
  ModelConfig cfg;
  cfg.n = 16;
  cfg.seed = 7;
  Models a = init_models(cfg);
  Models b = init_models(cfg);
  CHECK(params_equal(a.g_fc.params, b.g_fc.params));
  CHECK(params_equal(a.g_sc.params, b.g_sc.params));
  CHECK(params_equal(a.d_fc.params, b.d_fc.params));
  CHECK(params_equal(a.d_sc.params, b.d_sc.params));

  cfg.seed = 8;
  Models c = init_models(cfg);
  CHECK_FALSE(a.g_fc.params.at("enc1.w").value.data == c.g_fc.params.at("enc1.w").value.data);

  for (const auto& item : a.g_fc.params.items)
    for (double v : item.value.data) CHECK(v == double(float(v)));
}

TEST_CASE("init_models rejects unsupported sizes") {
  ModelConfig cfg;
  cfg.n = 7;
  CHECK_THROWS_AS(init_models(cfg), ValidationError);
  cfg.n = 8;
  CHECK_NOTHROW(init_models(cfg));
}

TEST_CASE("translate enforces symmetry, range, and diagonal") {
  ModelConfig cfg;
  cfg.n = 16;
  cfg.seed = 3;
  Models m = init_models(cfg);

  for (int trial = 0; trial < 100; ++trial) {
    const Connectome sc = random_connectome(16, Domain::SC, 100 + uint64_t(trial));
    const Connectome fc = translate(m.g_fc, sc);
    CHECK(fc.domain == Domain::FC);
    CHECK(fc.n == 16);
    double max_asym = 0.0;
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j)
        max_asym = std::max(max_asym, std::fabs(fc.at(i, j) - fc.at(j, i)));
    CHECK(max_asym == 0.0);
    for (int i = 0; i < 16; ++i) CHECK(fc.at(i, i) == 1.0);
    for (double v : fc.values) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
      CHECK(std::isfinite(v));
    }
  }

  const Connectome fc_in = random_connectome(16, Domain::FC, 5);
  const Connectome sc_out = translate(m.g_sc, fc_in);
  CHECK(sc_out.domain == Domain::SC);
  for (int i = 0; i < 16; ++i) CHECK(sc_out.at(i, i) == 0.0);
  for (double v : sc_out.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("translate rejects domain and size mismatches") {
  ModelConfig cfg;
  cfg.n = 16;
  Models m = init_models(cfg);
  const Connectome fc = random_connectome(16, Domain::FC, 1);
  CHECK_THROWS_AS(translate(m.g_fc, fc), ValidationError);
  const Connectome small = random_connectome(12, Domain::SC, 2);
  CHECK_THROWS_AS(translate(m.g_fc, small), ValidationError);
}

TEST_CASE("odd sizes crop back to n and full size works") {
  ModelConfig cfg;
  cfg.n = 15;
  cfg.seed = 11;
  Models m = init_models(cfg);
  const Connectome sc = random_connectome(15, Domain::SC, 4);
  const Connectome fc = translate(m.g_fc, sc);
  CHECK(fc.n == 15);
  CHECK(int(fc.values.size()) == 15 * 15);

  ModelConfig big;
  big.n = 116;
  big.seed = 1;
  Models bm = init_models(big);
  const Connectome out = translate(bm.g_fc, random_connectome(116, Domain::SC, 9));
  CHECK(out.n == 116);
  validate_connectome(out);
}

TEST_CASE("discriminate returns probabilities and checks domains") {
  ModelConfig cfg;
  cfg.n = 16;
  cfg.seed = 2;
  Models m = init_models(cfg);
  for (int trial = 0; trial < 20; ++trial) {
    const double p = discriminate(m.d_fc, random_connectome(16, Domain::FC, 50 + uint64_t(trial)));
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(std::isfinite(p));
  }
  CHECK_THROWS_AS(discriminate(m.d_fc, random_connectome(16, Domain::SC, 1)), ValidationError);
}

TEST_CASE("discriminator gradients match finite differences") {
  ModelConfig cfg;
  cfg.n = 12;
  cfg.seed = 6;
  Models m = init_models(cfg);

  nn::ParamSet input;
  Tensor x({1, 1, 12, 12});
  Rng rng(77);
  x.fill_uniform(rng, -0.5, 0.5);
  input.add("x", std::move(x));

  auto build = [&](nn::Tape& t) {
    auto& item = input.at("x");
    nn::Var xv = t.param_leaf(item.value, item.grad);
    return t.sum_all(discriminator_forward(t, m.d_fc, xv));
  };
  std::array<nn::ParamSet*, 2> groups = {&input, &m.d_fc.params};
  const double err =
      nn::grad_check(build, std::span<nn::ParamSet* const>(groups), 1e-5, rng, 6);
  CHECK(err <= 1e-4);
}

TEST_CASE("generator gradients match finite differences") {
  ModelConfig cfg;
  cfg.n = 12;
  cfg.seed = 13;
  Models m = init_models(cfg);

  nn::ParamSet input;
  Tensor x({1, 1, 12, 12});
  Rng rng(78);
  x.fill_uniform(rng, 0.0, 1.0);
  input.add("x", std::move(x));

  auto build = [&](nn::Tape& t) {
    auto& item = input.at("x");
    nn::Var xv = t.param_leaf(item.value, item.grad);
    return t.sum_all(t.square(generator_forward(t, m.g_fc, xv)));
  };
  std::array<nn::ParamSet*, 2> groups = {&input, &m.g_fc.params};
  const double err =
      nn::grad_check(build, std::span<nn::ParamSet* const>(groups), 1e-5, rng, 4);
  CHECK(err <= 1e-4);
}

TEST_CASE("checkpoint roundtrip is bitwise") {
  const fs::path dir = fs::temp_directory_path() / "sfcgan_ckpt";
  fs::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();

  ModelConfig cfg;
  cfg.n = 12;
  cfg.seed = 21;
  ModelCheckpoint ck;
  ck.models = init_models(cfg);
  ck.epoch = 17;
  ck.weights.sp_enabled = false;
  ck.weights.cyc = 2.5;
  ck.weights.sp_pairing = SpPairing::paired;

  auto gg = ck.models.generator_group();
  auto dg = ck.models.discriminator_group();
  ck.gen_opt.init(std::span<nn::ParamSet* const>(gg));
  ck.dis_opt.init(std::span<nn::ParamSet* const>(dg));
  ck.gen_opt.t = 40;
  Rng rng(5);
  for (auto& slot : ck.gen_opt.slots) {
    slot.m.fill_uniform(rng, -0.1, 0.1);
    slot.v.fill_uniform(rng, 0.0, 0.01);
  }
  ck.gen_opt.quantize_f32_grid();
  Tensor fake({12, 12});
  fake.fill_uniform(rng, 0.0, 1.0);
  fake.quantize_f32_grid();
  ck.replay_sc.push_back(fake);
  ck.replay_pos_sc = 1;

  const Connectome sc = random_connectome(12, Domain::SC, 31);
  const Connectome before = translate(ck.models.g_fc, sc);

  save_checkpoint(ck, path);
  ModelCheckpoint back = load_checkpoint(path);

  CHECK(back.epoch == 17);
  CHECK(back.weights.cyc == 2.5);
  CHECK_FALSE(back.weights.sp_enabled);
  CHECK(back.weights.sp_pairing == SpPairing::paired);
  CHECK(back.models.cfg.n == 12);
  CHECK(back.models.cfg.seed == 21);
  CHECK(params_equal(back.models.g_fc.params, ck.models.g_fc.params));
  CHECK(params_equal(back.models.g_sc.params, ck.models.g_sc.params));
  CHECK(params_equal(back.models.d_fc.params, ck.models.d_fc.params));
  CHECK(params_equal(back.models.d_sc.params, ck.models.d_sc.params));
  CHECK(back.gen_opt.t == 40);
  REQUIRE(back.gen_opt.slots.size() == ck.gen_opt.slots.size());
  for (size_t i = 0; i < ck.gen_opt.slots.size(); ++i) {
    CHECK(back.gen_opt.slots[i].m.data == ck.gen_opt.slots[i].m.data);
    CHECK(back.gen_opt.slots[i].v.data == ck.gen_opt.slots[i].v.data);
  }
  REQUIRE(back.replay_sc.size() == 1);
  CHECK(back.replay_sc[0].data == fake.data);
  CHECK(back.replay_pos_sc == 1);
  CHECK(back.replay_fc.empty());

  const Connectome after = translate(back.models.g_fc, sc);
  CHECK(after.values == before.values);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint loader rejects corrupt files") {
  const fs::path dir = fs::temp_directory_path() / "sfcgan_ckpt_bad";
  fs::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();

  ModelConfig cfg;
  cfg.n = 12;
  ModelCheckpoint ck;
  ck.models = init_models(cfg);
  auto gg = ck.models.generator_group();
  auto dg = ck.models.discriminator_group();
  ck.gen_opt.init(std::span<nn::ParamSet* const>(gg));
  ck.dis_opt.init(std::span<nn::ParamSet* const>(dg));
  save_checkpoint(ck, path);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    bytes = ss.str();
  }

  auto write_bytes = [&](const std::string& b, const std::string& p) {
    std::ofstream out(p, std::ios::binary);
    out.write(b.data(), std::streamsize(b.size()));
  };

  std::string bad = bytes;
  bad[0] = 'X';
  write_bytes(bad, (dir / "magic.ckpt").string());
  CHECK_THROWS_AS(load_checkpoint((dir / "magic.ckpt").string()), ValidationError);

  bad = bytes;
  bad[4] = char(9);
  write_bytes(bad, (dir / "ver.ckpt").string());
  CHECK_THROWS_AS(load_checkpoint((dir / "ver.ckpt").string()), ValidationError);

  write_bytes(bytes.substr(0, bytes.size() / 2), (dir / "trunc.ckpt").string());
  CHECK_THROWS_AS(load_checkpoint((dir / "trunc.ckpt").string()), ValidationError);

  CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), IoError);
  fs::remove_all(dir);
}
