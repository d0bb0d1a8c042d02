#include "rtn/network.hpp"

#include <fstream>

#include "json.hpp"
#include "rtn/error.hpp"

namespace rtn {

namespace {

void add_into(Tensor& acc, const Tensor& g, const char* what) {
  if (g.empty()) return;
  if (g.shape() != acc.shape()) {
    throw ShapeError(std::string("upstream gradient ") + what + " has shape " + shape_to_string(g.shape()) +
                     ", expected " + shape_to_string(acc.shape()));
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

}  // namespace

Network Network::create(const NetworkShape& shape, VariantFlags variant, Rng& rng) {
  if (shape.input_dim == 0 || shape.bottleneck_dim == 0 || shape.num_classes < 2) {
    throw ParameterError("network needs positive input/bottleneck widths and at least 2 classes");
  }
  Network net;
  net.shape_ = shape;
  net.variant_ = variant;
  std::size_t in = shape.input_dim;
  for (std::size_t i = 0; i < shape.feature_widths.size(); ++i) {
    const std::size_t out = shape.feature_widths[i];
    if (out == 0) throw ParameterError("feature widths must be positive");
    net.features_.push_back(Layer::linear("feature" + std::to_string(i), in, out, shape.feature_lr_multiplier));
    net.features_.push_back(Layer::relu("feature" + std::to_string(i) + ".relu"));
    in = out;
  }
  const std::size_t c = shape.num_classes;
  net.fcb_ = Layer::linear("fcb", in, shape.bottleneck_dim, shape.new_layer_lr_multiplier);
  net.fcb_relu_ = Layer::relu("fcb.relu");
  net.fcc_ = Layer::linear("fcc", shape.bottleneck_dim, c, shape.new_layer_lr_multiplier);
  net.res1_ = Layer::linear("res1", c, c, shape.new_layer_lr_multiplier);
  net.res_relu_ = Layer::relu("res.relu");
  net.res2_ = Layer::linear("res2", c, c, shape.new_layer_lr_multiplier);

  for (auto& l : net.features_) l.init_uniform(rng);
  net.fcb_.init_uniform(rng);
  net.fcc_.init_uniform(rng);
  net.res1_.init_uniform(rng);
  net.res2_.zero_params();
  return net;
}

HeadOutputs Network::run(const Tensor& x, Cache* cache) const {
  if (x.rank() != 2 || x.cols() != shape_.input_dim) {
    throw ShapeError("network input " + shape_to_string(x.shape()) + " does not match input width " +
                     std::to_string(shape_.input_dim));
  }
  Tensor h = x;
  for (const auto& layer : features_) {
    Tensor next = layer.forward(h);
    if (cache) cache->feature_inputs.push_back(std::move(h));
    h = std::move(next);
  }
  HeadOutputs out;
  Tensor fcb_pre = fcb_.forward(h);
  out.fcb_feats = fcb_relu_.forward(fcb_pre);
  out.f_T = fcc_.forward(out.fcb_feats);

  Tensor res_pre, res_hidden;
  if (variant_.use_residual) {
    res_pre = res1_.forward(out.f_T);
    res_hidden = res_relu_.forward(res_pre);
    out.delta_f = res2_.forward(res_hidden);
    out.f_S = Tensor(out.f_T.shape());
    for (std::size_t i = 0; i < out.f_S.size(); ++i) out.f_S[i] = out.f_T[i] + out.delta_f[i];
    out.f_t = softmax_rows(out.f_T);
    out.f_s = softmax_rows(out.f_S);
  } else {
    out.delta_f = Tensor(out.f_T.shape());
    out.f_S = out.f_T;
    out.f_t = softmax_rows(out.f_T);
    out.f_s = out.f_t;
  }

  if (cache) {
    cache->feature_out = std::move(h);
    cache->fcb_pre = std::move(fcb_pre);
    cache->res_hidden_pre = std::move(res_pre);
    cache->res_hidden = std::move(res_hidden);
    cache->head = out;
  }
  return out;
}

HeadOutputs Network::forward(const Tensor& x) {
  Cache cache;
  HeadOutputs out = run(x, &cache);
  cache_ = std::move(cache);
  return out;
}

HeadOutputs Network::evaluate(const Tensor& x) const { return run(x, nullptr); }

Tensor Network::backward(const HeadGradients& upstream) {
  if (!cache_) throw StateError("backward called without a preceding forward pass");
  Cache& c = *cache_;
  const HeadOutputs& head = c.head;

  Tensor g_S(head.f_S.shape());
  add_into(g_S, upstream.d_f_S, "d_f_S");
  if (!upstream.d_f_s.empty()) add_into(g_S, softmax_backward(head.f_s, upstream.d_f_s), "d_f_s");

  Tensor g_T(head.f_T.shape());
  add_into(g_T, upstream.d_f_T, "d_f_T");
  if (!upstream.d_f_t.empty()) add_into(g_T, softmax_backward(head.f_t, upstream.d_f_t), "d_f_t");

  // Shortcut: f_S depends on f_T with unit Jacobian in both variants.
  for (std::size_t i = 0; i < g_T.size(); ++i) g_T[i] += g_S[i];
  if (variant_.use_residual) {
    Tensor g_hidden = res2_.backward(c.res_hidden, head.delta_f, g_S);
    Tensor g_pre = res_relu_.backward(c.res_hidden_pre, c.res_hidden, g_hidden);
    Tensor g_res_in = res1_.backward(head.f_T, c.res_hidden_pre, g_pre);
    for (std::size_t i = 0; i < g_T.size(); ++i) g_T[i] += g_res_in[i];
  }

  Tensor g_feats = fcc_.backward(head.fcb_feats, head.f_T, g_T);
  add_into(g_feats, upstream.d_fcb_feats, "d_fcb_feats");
  Tensor g_pre = fcb_relu_.backward(c.fcb_pre, head.fcb_feats, g_feats);
  Tensor g = fcb_.backward(c.feature_out, c.fcb_pre, g_pre);

  for (std::size_t i = features_.size(); i-- > 0;) {
    const Tensor& output = (i + 1 < features_.size()) ? c.feature_inputs[i + 1] : c.feature_out;
    g = features_[i].backward(c.feature_inputs[i], output, g);
  }
  cache_.reset();
  grads_ready_ = true;
  return g;
}

std::vector<std::size_t> Network::predict(const Tensor& x) const { return argmax_rows(evaluate(x).f_t); }

std::vector<ParameterRef> Network::parameters() {
  std::vector<ParameterRef> out;
  auto add = [&out](Layer& l) {
    if (!l.has_params()) return;
    out.push_back({l.name + ".weight", &l.weight, &l.grad_weight, l.lr_multiplier});
    out.push_back({l.name + ".bias", &l.bias, &l.grad_bias, l.lr_multiplier});
  };
  for (auto& l : features_) add(l);
  add(fcb_);
  add(fcc_);
  add(res1_);
  add(res2_);
  return out;
}

std::vector<const Layer*> Network::linear_layers() const {
  std::vector<const Layer*> out;
  for (const auto& l : features_)
    if (l.has_params()) out.push_back(&l);
  out.push_back(&fcb_);
  out.push_back(&fcc_);
  out.push_back(&res1_);
  out.push_back(&res2_);
  return out;
}

void Network::zero_grad() {
  for (auto& l : features_) l.zero_grad();
  fcb_.zero_grad();
  fcc_.zero_grad();
  res1_.zero_grad();
  res2_.zero_grad();
  grads_ready_ = false;
}

void Network::consume_grads() { zero_grad(); }

bool operator==(const Network& a, const Network& b) {
  if (!(a.shape_ == b.shape_) || !(a.variant_ == b.variant_)) return false;
  auto la = a.linear_layers();
  auto lb = b.linear_layers();
  if (la.size() != lb.size()) return false;
  for (std::size_t i = 0; i < la.size(); ++i) {
    if (la[i]->weight != lb[i]->weight || la[i]->bias != lb[i]->bias ||
        la[i]->lr_multiplier != lb[i]->lr_multiplier) {
      return false;
    }
  }
  return true;
}

// Checkpoint format (JSON):
//   { "format": "rtn-checkpoint", "version": 1,
//     "variant": {use_mmd, use_entropy, use_residual},
//     "shape": {input_dim, feature_widths, bottleneck_dim, num_classes,
//               feature_lr_multiplier, new_layer_lr_multiplier},
//     "layers": [{name, weight: {shape, data}, bias: {shape, data}}, ...] }
// Layers appear in linear_layers() order.
namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json tensor_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"data", t.buffer()}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  return Tensor::from_external(j.at("shape").get<Tensor::Shape>(), j.at("data").get<std::vector<double>>());
}

}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "rtn-checkpoint";
  j["version"] = kCheckpointVersion;
  const auto v = net.variant();
  j["variant"] = {{"use_mmd", v.use_mmd}, {"use_entropy", v.use_entropy}, {"use_residual", v.use_residual}};
  const auto& s = net.shape();
  j["shape"] = {{"input_dim", s.input_dim},
                {"feature_widths", s.feature_widths},
                {"bottleneck_dim", s.bottleneck_dim},
                {"num_classes", s.num_classes},
                {"feature_lr_multiplier", s.feature_lr_multiplier},
                {"new_layer_lr_multiplier", s.new_layer_lr_multiplier}};
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const Layer* l : net.linear_layers()) {
    layers.push_back({{"name", l->name}, {"weight", tensor_json(l->weight)}, {"bias", tensor_json(l->bias)}});
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os << j.dump(1) << '\n';
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
    if (j.at("format") != "rtn-checkpoint") throw ParseError("not an rtn checkpoint: " + path.string());
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ParseError("unsupported checkpoint version " + j.at("version").dump());
    }
    NetworkShape s;
    const auto& js = j.at("shape");
    s.input_dim = js.at("input_dim").get<std::size_t>();
    s.feature_widths = js.at("feature_widths").get<std::vector<std::size_t>>();
    s.bottleneck_dim = js.at("bottleneck_dim").get<std::size_t>();
    s.num_classes = js.at("num_classes").get<std::size_t>();
    s.feature_lr_multiplier = js.at("feature_lr_multiplier").get<double>();
    s.new_layer_lr_multiplier = js.at("new_layer_lr_multiplier").get<double>();
    VariantFlags v;
    v.use_mmd = j.at("variant").at("use_mmd").get<bool>();
    v.use_entropy = j.at("variant").at("use_entropy").get<bool>();
    v.use_residual = j.at("variant").at("use_residual").get<bool>();

    Rng unused(0);
    Network net = Network::create(s, v, unused);
    auto params = net.parameters();
    const auto& layers = j.at("layers");
    if (layers.size() * 2 != params.size()) throw ParseError("checkpoint layer count does not match its shape");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Tensor w = tensor_from_json(layers[i].at("weight"));
      Tensor b = tensor_from_json(layers[i].at("bias"));
      if (w.shape() != params[2 * i].value->shape() || b.shape() != params[2 * i + 1].value->shape()) {
        throw ParseError("checkpoint tensor shape mismatch in layer " + layers[i].at("name").get<std::string>());
      }
      *params[2 * i].value = std::move(w);
      *params[2 * i + 1].value = std::move(b);
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (dynamic_cast<const ParseError*>(&e)) throw;
    throw ParseError("invalid checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace rtn
