#include "sfcgan/sfc_model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sfcgan {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

namespace {

using nn::Tape;
using nn::Var;

void fill_fan_in(Tensor& t, Rng& rng) {
  int64_t fan_in;
  if (t.rank() == 4)
    fan_in = int64_t(t.dim(1)) * t.dim(2) * t.dim(3);
  else if (t.rank() == 2)
    fan_in = t.dim(0);
  else
    fan_in = t.dim(0);
  const double limit = std::sqrt(6.0 / double(fan_in));
  t.fill_uniform(rng, -limit, limit);
}

void add_conv(nn::ParamSet& ps, Rng& rng, const std::string& layer, int out_c,
              int in_c, int k) {
  fill_fan_in(ps.add(layer + ".w", Tensor({out_c, in_c, k, k})).value, rng);
  ps.add(layer + ".b", Tensor({out_c}));
}

GeneratorParams make_generator(Domain target, const ModelConfig& cfg, Rng& rng) {
  GeneratorParams g;
  g.target_domain = target;
  g.n = cfg.n;
  g.w1 = cfg.w1;
  g.w2 = cfg.w2;
  add_conv(g.params, rng, "enc1", cfg.w1, 1, 3);
  add_conv(g.params, rng, "enc2", cfg.w2, cfg.w1, 3);
  add_conv(g.params, rng, "bott", cfg.w2, cfg.w2, 3);
  // Transposed-conv kernel layout is [Cin][Cout][K][K].
  fill_fan_in(g.params.add("dec.w", Tensor({cfg.w2, cfg.w1, 4, 4})).value, rng);
  g.params.add("dec.b", Tensor({cfg.w1}));
  add_conv(g.params, rng, "out", 1, cfg.w1, 3);
  g.params.quantize_f32_grid();
  return g;
}

DiscriminatorParams make_discriminator(Domain source, const ModelConfig& cfg, Rng& rng) {
  DiscriminatorParams d;
  d.source_domain = source;
  d.n = cfg.n;
  d.w1 = cfg.w1;
  d.w2 = cfg.w2;
  add_conv(d.params, rng, "c1", cfg.w1, 1, 3);
  add_conv(d.params, rng, "c2", cfg.w2, cfg.w1, 3);
  const int q = kern::conv_out_size(kern::conv_out_size(cfg.n, 3, 2, 1), 3, 2, 1);
  fill_fan_in(d.params.add("head.w", Tensor({cfg.w2 * q * q, 1})).value, rng);
  d.params.add("head.b", Tensor({1}));
  d.params.quantize_f32_grid();
  return d;
}

Var pvar(Tape& t, nn::ParamSet& ps, const std::string& name) {
  auto& item = ps.at(name);
  return t.param_leaf(item.value, item.grad);
}

Var conv_layer(Tape& t, nn::ParamSet& ps, const std::string& layer, Var x,
               int stride) {
  Var y = t.conv2d(x, pvar(t, ps, layer + ".w"), stride, 1);
  return t.bias_channel(y, pvar(t, ps, layer + ".b"));
}

void check_input(const Tensor& x, int n, const char* who) {
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != n || x.dim(3) != n)
    throw ValidationError(std::string(who) + " input must be [B,1," +
                          std::to_string(n) + "," + std::to_string(n) + "]");
}

}  // namespace

Models init_models(const ModelConfig& cfg) {
  if (cfg.n < 8) throw ValidationError("node count must be at least 8");
  if (cfg.w1 < 1 || cfg.w2 < 1) throw ValidationError("channel widths must be positive");
  const int m = kern::conv_out_size(cfg.n, 3, 2, 1);
  const int up = (m - 1) * 2 - 2 + 4;
  if (up != cfg.n && up != cfg.n + 1)
    throw NumericError("decoder size bookkeeping failed");

  Rng rng(cfg.seed);
  Models mdl;
  mdl.cfg = cfg;
  mdl.g_fc = make_generator(Domain::FC, cfg, rng);
  mdl.g_sc = make_generator(Domain::SC, cfg, rng);
  mdl.d_fc = make_discriminator(Domain::FC, cfg, rng);
  mdl.d_sc = make_discriminator(Domain::SC, cfg, rng);
  return mdl;
}

Var generator_forward(Tape& t, GeneratorParams& g, Var x) {
  check_input(t.val(x), g.n, "generator");
  Var h = t.act(conv_layer(t, g.params, "enc1", x, 1), nn::Act::leaky_relu);
  h = t.act(conv_layer(t, g.params, "enc2", h, 2), nn::Act::leaky_relu);
  h = t.act(conv_layer(t, g.params, "bott", h, 1), nn::Act::leaky_relu);
  h = t.conv_transpose2d(h, pvar(t, g.params, "dec.w"), 2, 1);
  h = t.act(t.bias_channel(h, pvar(t, g.params, "dec.b")), nn::Act::leaky_relu);
  if (t.val(h).dim(2) != g.n) h = t.crop2d(h, g.n, g.n);
  h = conv_layer(t, g.params, "out", h, 1);
  h = t.act(h, g.target_domain == Domain::FC ? nn::Act::tanh : nn::Act::sigmoid);
  h = t.symmetrize_hw(h);
  return t.set_diag_const(h, g.target_domain == Domain::FC ? 1.0 : 0.0);
}

Var discriminator_forward(Tape& t, DiscriminatorParams& d, Var x) {
  check_input(t.val(x), d.n, "discriminator");
  const int B = t.val(x).dim(0);
  Var h = t.act(conv_layer(t, d.params, "c1", x, 2), nn::Act::leaky_relu);
  h = t.act(conv_layer(t, d.params, "c2", h, 2), nn::Act::leaky_relu);
  const Tensor& hv = t.val(h);
  h = t.reshape(h, {B, hv.dim(1) * hv.dim(2) * hv.dim(3)});
  h = t.dense(h, pvar(t, d.params, "head.w"), pvar(t, d.params, "head.b"));
  return t.act(h, nn::Act::sigmoid);
}

Tensor connectome_to_tensor(const Connectome& c) {
  Tensor t({1, 1, c.n, c.n});
  std::memcpy(t.ptr(), c.values.data(), c.values.size() * sizeof(double));
  return t;
}

Connectome translate(GeneratorParams& g, const Connectome& x) {
  if (x.domain != g.source_domain())
    throw ValidationError(std::string("generator expects ") +
                          domain_name(g.source_domain()) + " input, got " +
                          domain_name(x.domain));
  if (x.n != g.n) throw ValidationError("connectome size does not match model");

  Tape t;
  Var out = generator_forward(t, g, t.leaf(connectome_to_tensor(x)));
  Connectome y;
  y.n = x.n;
  y.domain = g.target_domain;
  y.subject_id = x.subject_id;
  y.label = x.label;
  y.values = t.val(out).data;
  validate_connectome(y);
  return y;
}

double discriminate(DiscriminatorParams& d, const Connectome& x) {
  if (x.domain != d.source_domain)
    throw ValidationError(std::string("discriminator expects ") +
                          domain_name(d.source_domain) + " input, got " +
                          domain_name(x.domain));
  if (x.n != d.n) throw ValidationError("connectome size does not match model");
  Tape t;
  Var p = discriminator_forward(t, d, t.leaf(connectome_to_tensor(x)));
  return t.val(p).data[0];
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct NamedTensor {
  std::string name;
  const Tensor* t;
};

void collect(std::vector<NamedTensor>& out, const std::string& prefix,
             const nn::ParamSet& ps) {
  for (const auto& item : ps.items) out.push_back({prefix + "." + item.name, &item.value});
}

void collect(std::vector<NamedTensor>& out, const std::string& prefix,
             const nn::AdamState& st) {
  for (size_t i = 0; i < st.slots.size(); ++i) {
    out.push_back({prefix + "." + std::to_string(i) + ".m", &st.slots[i].m});
    out.push_back({prefix + "." + std::to_string(i) + ".v", &st.slots[i].v});
  }
}

std::vector<NamedTensor> tensor_table(const ModelCheckpoint& c) {
  std::vector<NamedTensor> out;
  collect(out, "g_fc", c.models.g_fc.params);
  collect(out, "g_sc", c.models.g_sc.params);
  collect(out, "d_fc", c.models.d_fc.params);
  collect(out, "d_sc", c.models.d_sc.params);
  collect(out, "opt.gen", c.gen_opt);
  collect(out, "opt.dis", c.dis_opt);
  for (size_t i = 0; i < c.replay_fc.size(); ++i)
    out.push_back({"replay.fc." + std::to_string(i), &c.replay_fc[i]});
  for (size_t i = 0; i < c.replay_sc.size(); ++i)
    out.push_back({"replay.sc." + std::to_string(i), &c.replay_sc[i]});
  return out;
}

const char* pairing_name(SpPairing p) {
  return p == SpPairing::literal ? "literal" : "paired";
}

ordered_json opt_json(const nn::AdamState& st) {
  return {{"t", st.t}, {"beta1", st.beta1}, {"beta2", st.beta2}, {"eps", st.eps}};
}

void opt_from_json(const json& j, nn::AdamState& st) {
  st.t = j.at("t").get<int64_t>();
  st.beta1 = j.at("beta1").get<double>();
  st.beta2 = j.at("beta2").get<double>();
  st.eps = j.at("eps").get<double>();
}

[[noreturn]] void corrupt(const std::string& what) {
  throw ValidationError("checkpoint: " + what);
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& c, const std::string& path) {
  const auto table = tensor_table(c);

  ordered_json header;
  header["n"] = c.models.cfg.n;
  header["w1"] = c.models.cfg.w1;
  header["w2"] = c.models.cfg.w2;
  header["seed"] = c.models.cfg.seed;
  header["epoch"] = c.epoch;
  header["weights"] = {{"adv", c.weights.adv},
                       {"cyc", c.weights.cyc},
                       {"id", c.weights.id},
                       {"sp", c.weights.sp},
                       {"sp_enabled", c.weights.sp_enabled},
                       {"sp_pairing", pairing_name(c.weights.sp_pairing)},
                       {"pcc_row_sum", c.weights.pcc_row_sum}};
  header["opt"] = {{"gen", opt_json(c.gen_opt)}, {"dis", opt_json(c.dis_opt)}};
  header["replay"] = {{"pos_fc", c.replay_pos_fc}, {"pos_sc", c.replay_pos_sc}};

  uint64_t offset = 0;
  ordered_json tensors = ordered_json::array();
  for (const auto& nt : table) {
    tensors.push_back({{"name", nt.name}, {"shape", nt.t->shape}, {"offset", offset}});
    offset += uint64_t(nt.t->numel()) * sizeof(float);
  }
  header["tensors"] = std::move(tensors);

  const std::string head = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write("SFCG", 4);
  const uint16_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const uint64_t head_len = head.size();
  out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out.write(head.data(), std::streamsize(head.size()));

  std::vector<float> buf;
  for (const auto& nt : table) {
    buf.resize(size_t(nt.t->numel()));
    for (int64_t i = 0; i < nt.t->numel(); ++i) buf[size_t(i)] = float(nt.t->data[size_t(i)]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              std::streamsize(buf.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();

  if (bytes.size() < 14) corrupt("file too short");
  if (std::memcmp(bytes.data(), "SFCG", 4) != 0) corrupt("bad magic");
  uint16_t version = 0;
  std::memcpy(&version, bytes.data() + 4, sizeof(version));
  if (version != kCheckpointVersion)
    corrupt("unsupported format version " + std::to_string(version));
  uint64_t head_len = 0;
  std::memcpy(&head_len, bytes.data() + 6, sizeof(head_len));
  if (14 + head_len > bytes.size()) corrupt("truncated header");

  json header;
  try {
    header = json::parse(bytes.substr(14, head_len));
  } catch (const json::exception& e) {
    corrupt(std::string("header is not valid JSON: ") + e.what());
  }

  ModelCheckpoint c;
  try {
    ModelConfig cfg;
    cfg.n = header.at("n").get<int>();
    cfg.w1 = header.at("w1").get<int>();
    cfg.w2 = header.at("w2").get<int>();
    cfg.seed = header.at("seed").get<uint64_t>();
    c.models = init_models(cfg);
    c.epoch = header.at("epoch").get<int>();
    const json& w = header.at("weights");
    c.weights.adv = w.at("adv").get<double>();
    c.weights.cyc = w.at("cyc").get<double>();
    c.weights.id = w.at("id").get<double>();
    c.weights.sp = w.at("sp").get<double>();
    c.weights.sp_enabled = w.at("sp_enabled").get<bool>();
    const std::string pairing = w.at("sp_pairing").get<std::string>();
    if (pairing != "literal" && pairing != "paired") corrupt("unknown sp_pairing");
    c.weights.sp_pairing = pairing == "literal" ? SpPairing::literal : SpPairing::paired;
    c.weights.pcc_row_sum = w.at("pcc_row_sum").get<bool>();

    auto gen_groups = c.models.generator_group();
    auto dis_groups = c.models.discriminator_group();
    c.gen_opt.init(std::span<nn::ParamSet* const>(gen_groups));
    c.dis_opt.init(std::span<nn::ParamSet* const>(dis_groups));
    opt_from_json(header.at("opt").at("gen"), c.gen_opt);
    opt_from_json(header.at("opt").at("dis"), c.dis_opt);
    c.replay_pos_fc = header.at("replay").at("pos_fc").get<size_t>();
    c.replay_pos_sc = header.at("replay").at("pos_sc").get<size_t>();

    size_t n_fc = 0, n_sc = 0;
    for (const json& te : header.at("tensors")) {
      const std::string name = te.at("name").get<std::string>();
      if (name.rfind("replay.fc.", 0) == 0) ++n_fc;
      if (name.rfind("replay.sc.", 0) == 0) ++n_sc;
    }
    c.replay_fc.assign(n_fc, Tensor({cfg.n, cfg.n}));
    c.replay_sc.assign(n_sc, Tensor({cfg.n, cfg.n}));

    auto expected = tensor_table(c);
    const json& tensors = header.at("tensors");
    if (tensors.size() != expected.size()) corrupt("tensor table size mismatch");
    const char* payload = bytes.data() + 14 + head_len;
    const uint64_t payload_len = bytes.size() - 14 - head_len;
    for (size_t i = 0; i < expected.size(); ++i) {
      const json& te = tensors.at(i);
      if (te.at("name").get<std::string>() != expected[i].name)
        corrupt("unexpected tensor " + te.at("name").get<std::string>());
      const auto shape = te.at("shape").get<std::vector<int>>();
      if (shape != expected[i].t->shape)
        corrupt("shape mismatch for " + expected[i].name);
      const uint64_t off = te.at("offset").get<uint64_t>();
      Tensor& dst = const_cast<Tensor&>(*expected[i].t);
      const uint64_t need = uint64_t(dst.numel()) * sizeof(float);
      if (off + need > payload_len) corrupt("truncated payload at " + expected[i].name);
      for (int64_t k = 0; k < dst.numel(); ++k) {
        float f;
        std::memcpy(&f, payload + off + uint64_t(k) * sizeof(float), sizeof(float));
        dst.data[size_t(k)] = double(f);
      }
    }
  } catch (const json::exception& e) {
    corrupt(std::string("malformed header: ") + e.what());
  }
  return c;
}

}  // namespace sfcgan
