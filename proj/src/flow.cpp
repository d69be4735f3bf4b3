#include "flowcheck/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "flowcheck/errors.hpp"
#include "flowcheck/normal.hpp"

namespace flowcheck {

namespace {

constexpr double kLogScaleClamp = 7.0;
constexpr const char* kFormatTag = "flowcheck-flow-v1";

double clamp_scale(double s) { return std::clamp(s, -kLogScaleClamp, kLogScaleClamp); }

double sign_of(double v) { return v >= 0.0 ? 1.0 : -1.0; }

std::vector<int> natural_order(int m) {
  std::vector<int> o(m);
  std::iota(o.begin(), o.end(), 0);
  return o;
}

}  // namespace

// ---------------------------------------------------------------------------
// construction

ConditionalFlow ConditionalFlow::construct(int m, int d, ContextKind ctx_kind, int ctx_dim,
                                           int ctx_hidden, int cond_hidden,
                                           std::vector<std::vector<int>> orders) {
  if (m < 1 || d < 1 || orders.empty())
    throw ContractError("ConditionalFlow: dimensions and layer count must be positive");
  ConditionalFlow f;
  f.m_ = m;
  f.d_ = d;
  f.ctx_kind_ = ctx_kind;
  f.ctx_dim_ = ctx_kind == ContextKind::identity ? d : ctx_dim;
  f.ctx_hidden_ = ctx_hidden;
  f.cond_hidden_ = cond_hidden;

  int off = 0;
  if (ctx_kind == ContextKind::mlp) {
    f.ctx_net_ = Mlp(d, ctx_hidden, f.ctx_dim_);
    f.ctx_param_off_ = 0;
    off += f.ctx_net_.n_params();
  }
  for (auto& order : orders) {
    if (static_cast<int>(order.size()) != m)
      throw ContractError("ConditionalFlow: layer ordering has wrong size");
    AffineLayer layer;
    layer.order = std::move(order);
    layer.scale_offset.assign(m, 0.0);
    for (int r = 0; r < m; ++r) {
      layer.cond.emplace_back(r + f.ctx_dim_, cond_hidden, 2);
      layer.param_off.push_back(off);
      off += layer.cond.back().n_params();
    }
    f.layers_.push_back(std::move(layer));
  }
  f.params_.assign(off, 0.0);
  f.out_bias_.assign(m, 0.0);
  f.out_sign_bias_.assign(m, 0.0);
  f.check_orderings();
  return f;
}

ConditionalFlow ConditionalFlow::make(int m, int d, int n_layers, int hidden, int ctx_dim,
                                      int ctx_hidden, std::uint64_t seed) {
  if (n_layers < 1) throw ContractError("ConditionalFlow::make: need at least one layer");
  std::vector<std::vector<int>> orders;
  for (int l = 0; l < n_layers; ++l) {
    std::vector<int> o = natural_order(m);
    if (l % 2 == 1) std::reverse(o.begin(), o.end());
    orders.push_back(std::move(o));
  }
  ConditionalFlow f = construct(m, d, ctx_dim > 0 ? ContextKind::mlp : ContextKind::identity,
                                ctx_dim, ctx_hidden, hidden, std::move(orders));

  RngStream rng(seed, 902);
  if (f.ctx_kind_ == ContextKind::mlp)
    f.ctx_net_.init(std::span<double>(f.params_).subspan(f.ctx_param_off_, f.ctx_net_.n_params()),
                    rng, false);
  for (auto& layer : f.layers_)
    for (std::size_t r = 0; r < layer.cond.size(); ++r)
      layer.cond[r].init(
          std::span<double>(f.params_).subspan(layer.param_off[r], layer.cond[r].n_params()), rng,
          /*zero_output=*/true);
  return f;
}

ConditionalFlow ConditionalFlow::affine(int m, int d) {
  return construct(m, d, ContextKind::identity, d, 0, 0, {natural_order(m)});
}

void ConditionalFlow::check_orderings() const {
  const int L = n_layers();
  if (m_ < 2 || L < m_) return;
  // every coordinate must sit at a conditioned rank (> 0) in some layer
  std::vector<bool> conditioned(m_, false);
  for (const auto& layer : layers_)
    for (int r = 1; r < m_; ++r) conditioned[layer.order[r]] = true;
  for (int j = 0; j < m_; ++j)
    if (!conditioned[j])
      throw ContractError("ConditionalFlow: coordinate " + std::to_string(j) +
                          " is never conditioned by the layer orderings");
}

// ---------------------------------------------------------------------------
// evaluation

Vector ConditionalFlow::context(const Vector& x) const {
  if (ctx_kind_ == ContextKind::identity) return x;
  Vector c(ctx_dim_);
  ctx_net_.eval(std::span<const double>(params_).subspan(ctx_param_off_, ctx_net_.n_params()), x,
                c);
  return c;
}

Vector ConditionalFlow::forward(const Vector& z, const Vector& x) const {
  require_dim(z.size(), m_, "flow_forward z");
  require_dim(x.size(), d_, "flow_forward x");
  require_finite(z, "flow_forward z");
  require_finite(x, "flow_forward x");
  const Vector ctx = context(x);

  Vector v = z;
  Vector in;
  double out[2];
  for (const auto& layer : layers_) {
    Vector y(m_);
    for (int r = 0; r < m_; ++r) {
      const int j = layer.order[r];
      in.clear();
      for (int q = 0; q < r; ++q) in.push_back(y[layer.order[q]]);
      in.insert(in.end(), ctx.begin(), ctx.end());
      layer.cond[r].eval(
          std::span<const double>(params_).subspan(layer.param_off[r], layer.cond[r].n_params()),
          in, out);
      const double s = clamp_scale(out[1]) + layer.scale_offset[j];
      y[j] = out[0] + std::exp(s) * v[j];
    }
    v = std::move(y);
  }
  const double sg = sign_of(x[sign_coord_]);
  for (int j = 0; j < m_; ++j) v[j] += out_bias_[j] + out_sign_bias_[j] * sg;
  return v;
}

FlowInverse ConditionalFlow::inverse(const Vector& theta, const Vector& x) const {
  require_dim(theta.size(), m_, "flow_inverse theta");
  require_dim(x.size(), d_, "flow_inverse x");
  require_finite(theta, "flow_inverse theta");
  require_finite(x, "flow_inverse x");
  const Vector ctx = context(x);

  Vector v = theta;
  const double sg = sign_of(x[sign_coord_]);
  for (int j = 0; j < m_; ++j) v[j] -= out_bias_[j] + out_sign_bias_[j] * sg;

  double logdet = 0.0;
  Vector in;
  double out[2];
  for (int l = n_layers() - 1; l >= 0; --l) {
    const auto& layer = layers_[l];
    Vector u(m_);
    for (int r = 0; r < m_; ++r) {
      const int j = layer.order[r];
      in.clear();
      for (int q = 0; q < r; ++q) in.push_back(v[layer.order[q]]);
      in.insert(in.end(), ctx.begin(), ctx.end());
      layer.cond[r].eval(
          std::span<const double>(params_).subspan(layer.param_off[r], layer.cond[r].n_params()),
          in, out);
      const double s = clamp_scale(out[1]) + layer.scale_offset[j];
      u[j] = (v[j] - out[0]) * std::exp(-s);
      logdet -= s;
    }
    v = std::move(u);
  }
  return {std::move(v), logdet};
}

double ConditionalFlow::logpdf(const Vector& theta, const Vector& x) const {
  FlowInverse inv = inverse(theta, x);
  double lp = inv.logdet;
  for (double zi : inv.z) lp += normal_logpdf(zi);
  return lp;
}

Vector ConditionalFlow::sample(RngStream& rng, const Vector& x) const {
  return forward(rng.normal_vector(m_), x);
}

Tape::Var ConditionalFlow::nll_on_tape(Tape& tape, std::span<const Tape::Var> pvars,
                                       std::span<const double> theta,
                                       std::span<const double> x) const {
  require_dim(pvars.size(), params_.size(), "nll_on_tape pvars");
  require_dim(theta.size(), m_, "nll_on_tape theta");
  require_dim(x.size(), d_, "nll_on_tape x");

  std::vector<Tape::Var> ctx(ctx_dim_);
  if (ctx_kind_ == ContextKind::identity) {
    for (int i = 0; i < d_; ++i) ctx[i] = tape.constant(x[i]);
  } else {
    std::vector<Tape::Var> xin(d_);
    for (int i = 0; i < d_; ++i) xin[i] = tape.constant(x[i]);
    ctx_net_.eval_tape(tape, pvars.subspan(ctx_param_off_, ctx_net_.n_params()), xin, ctx);
  }

  const double sg = sign_of(x[sign_coord_]);
  std::vector<Tape::Var> v(m_);
  for (int j = 0; j < m_; ++j)
    v[j] = tape.constant(theta[j] - out_bias_[j] - out_sign_bias_[j] * sg);

  Tape::Var sum_s = tape.constant(0.0);
  Tape::Var sum_z2 = tape.constant(0.0);
  std::vector<Tape::Var> in;
  Tape::Var out[2];
  for (int l = n_layers() - 1; l >= 0; --l) {
    const auto& layer = layers_[l];
    std::vector<Tape::Var> u(m_);
    for (int r = 0; r < m_; ++r) {
      const int j = layer.order[r];
      in.clear();
      for (int q = 0; q < r; ++q) in.push_back(v[layer.order[q]]);
      in.insert(in.end(), ctx.begin(), ctx.end());
      layer.cond[r].eval_tape(tape, pvars.subspan(layer.param_off[r], layer.cond[r].n_params()),
                              in, out);
      Tape::Var s = tape.clamp(out[1], -kLogScaleClamp, kLogScaleClamp);
      if (layer.scale_offset[j] != 0.0) s = tape.add_const(s, layer.scale_offset[j]);
      u[j] = tape.mul(tape.sub(v[j], out[0]), tape.exp(tape.neg(s)));
      sum_s = tape.add(sum_s, s);
    }
    v = std::move(u);
  }
  for (int j = 0; j < m_; ++j) sum_z2 = tape.add(sum_z2, tape.square(v[j]));
  // nll = 0.5 sum z^2 + (m/2) log 2pi + sum s
  return tape.add(tape.add_const(tape.mul_const(sum_z2, 0.5), 0.5 * m_ * kLog2Pi), sum_s);
}

// ---------------------------------------------------------------------------
// analytic affine construction

ConditionalFlow affine_gaussian_flow(const Matrix& w, const Vector& b, const Matrix& sigma) {
  const int m = static_cast<int>(b.size());
  const int d = w.cols();
  if (w.rows() != m || sigma.rows() != m || sigma.cols() != m)
    throw ContractError("affine_gaussian_flow: shape mismatch");
  Matrix l = cholesky(sigma);

  ConditionalFlow f = ConditionalFlow::affine(m, d);
  AffineLayer& layer = f.layers()[0];
  for (int i = 0; i < m; ++i) {
    // r solves r * L[<i,<i] = L[i,<i], so the conditioner reads preceding outputs
    Vector r(i);
    if (i > 0) {
      Matrix lsub(i, i);
      for (int a = 0; a < i; ++a)
        for (int c = 0; c < i; ++c) lsub(a, c) = l(a, c);
      Vector li(i);
      for (int a = 0; a < i; ++a) li[a] = l(i, a);
      r = solve_lower_transposed(lsub, li);
    }
    const int in_dim = i + d;
    std::span<double> p =
        std::span<double>(f.params()).subspan(layer.param_off[i], layer.cond[i].n_params());
    // shift row: weights on y_<i, then on x, then the bias entry
    for (int a = 0; a < i; ++a) p[a] = r[a];
    for (int c = 0; c < d; ++c) {
      double wx = w(i, c);
      for (int a = 0; a < i; ++a) wx -= r[a] * w(a, c);
      p[i + c] = wx;
    }
    double bias = b[i];
    for (int a = 0; a < i; ++a) bias -= r[a] * b[a];
    p[2 * in_dim] = bias;
    // log-scale row: constant log L_ii
    p[2 * in_dim + 1] = std::log(l(i, i));
  }
  return f;
}

// ---------------------------------------------------------------------------
// serialization

std::string ConditionalFlow::tag() const {
  // FNV-1a over the parameter bytes; enough to identify a fitted flow
  std::uint64_t h = 1469598103934665603ULL;
  const unsigned char* p = reinterpret_cast<const unsigned char*>(params_.data());
  for (std::size_t i = 0; i < params_.size() * sizeof(double); ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "flow-m%d-d%d-L%d-%016llx", m_, d_, n_layers(),
                static_cast<unsigned long long>(h));
  return buf;
}

std::string ConditionalFlow::to_json_string() const {
  nlohmann::json j;
  j["format"] = kFormatTag;
  j["m"] = m_;
  j["d"] = d_;
  j["context"] = {{"kind", ctx_kind_ == ContextKind::identity ? "identity" : "mlp"},
                  {"dim", ctx_dim_},
                  {"hidden", ctx_hidden_}};
  j["conditioner_hidden"] = cond_hidden_;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : layers_)
    layers.push_back({{"order", layer.order}, {"scale_offset", layer.scale_offset}});
  j["layers"] = layers;
  j["out_bias"] = out_bias_;
  j["out_sign_bias"] = out_sign_bias_;
  j["sign_coord"] = sign_coord_;
  j["params"] = params_;
  j["train_seed"] = train_seed;
  j["train_data_tag"] = train_data_tag;
  return j.dump(2);
}

ConditionalFlow ConditionalFlow::from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("flow file is not valid JSON: ") + e.what());
  }
  if (!j.contains("format") || j["format"] != kFormatTag)
    throw ConfigError("flow file format tag mismatch: expected '" + std::string(kFormatTag) +
                      "', got '" + (j.contains("format") ? j["format"].dump() : "<missing>") + "'");
  try {
    const int m = j.at("m").get<int>();
    const int d = j.at("d").get<int>();
    const auto& jc = j.at("context");
    ContextKind ck =
        jc.at("kind").get<std::string>() == "identity" ? ContextKind::identity : ContextKind::mlp;
    std::vector<std::vector<int>> orders;
    for (const auto& jl : j.at("layers")) orders.push_back(jl.at("order").get<std::vector<int>>());
    ConditionalFlow f =
        construct(m, d, ck, jc.at("dim").get<int>(), jc.at("hidden").get<int>(),
                  j.at("conditioner_hidden").get<int>(), std::move(orders));
    std::size_t li = 0;
    for (const auto& jl : j.at("layers"))
      f.layers_[li++].scale_offset = jl.at("scale_offset").get<Vector>();
    f.out_bias_ = j.at("out_bias").get<Vector>();
    f.out_sign_bias_ = j.at("out_sign_bias").get<Vector>();
    f.sign_coord_ = j.at("sign_coord").get<int>();
    Vector params = j.at("params").get<Vector>();
    require_dim(params.size(), f.params_.size(), "flow file parameter array");
    f.params_ = std::move(params);
    f.train_seed = j.at("train_seed").get<std::uint64_t>();
    f.train_data_tag = j.at("train_data_tag").get<std::string>();
    require_dim(f.out_bias_.size(), m, "flow file out_bias");
    require_dim(f.out_sign_bias_.size(), m, "flow file out_sign_bias");
    for (const auto& layer : f.layers_)
      require_dim(layer.scale_offset.size(), m, "flow file scale_offset");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("flow file is malformed: ") + e.what());
  }
}

void ConditionalFlow::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open flow file for writing: " + path.string());
  out << to_json_string() << "\n";
}

ConditionalFlow ConditionalFlow::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open flow file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

}  // namespace flowcheck
