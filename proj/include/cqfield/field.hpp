#pragma once

// Coordinate network: a geometry trunk predicting an occupancy logit
// (or raw density pre-activation) plus a hidden feature, and a color
// head consuming (feature, encoded view direction). Forward and
// reverse passes operate on batches of samples; the reverse pass
// accumulates exact gradients of any downstream scalar loss.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cqfield/linalg.hpp"
#include "cqfield/math.hpp"
#include "cqfield/rng.hpp"
#include "cqfield/vec.hpp"

namespace cqfield {

struct FieldArchitecture {
  int pos_freqs = 6;          // positional encoding band L
  int dir_freqs = 4;          // view-direction band
  int hidden_layers = 4;      // geometry trunk depth
  int hidden_width = 64;
  int feature_dim = 32;       // hidden feature handed to the color head
  int color_hidden_layers = 2;
  int color_width = 64;
  double geometry_bias = -2.0; // initial logit bias (mostly-empty prior)

  int pos_input_dim() const { return 3 + 6 * pos_freqs; }
  int dir_input_dim() const { return 3 + 6 * dir_freqs; }
  int trunk_output_dim() const { return 1 + feature_dim; }
  int color_input_dim() const { return feature_dim + dir_input_dim(); }

  void validate() const {
    if (pos_freqs < 1 || dir_freqs < 1) throw std::invalid_argument("architecture: bands need L >= 1");
    if (hidden_layers < 1 || color_hidden_layers < 1)
      throw std::invalid_argument("architecture: at least one hidden layer per head");
    if (hidden_width < 1 || color_width < 1 || feature_dim < 1)
      throw std::invalid_argument("architecture: widths must be positive");
  }

  bool operator==(const FieldArchitecture&) const = default;
};

struct LayerSpec {
  std::size_t w_offset = 0;
  std::size_t b_offset = 0;
  int in = 0;
  int out = 0;
};

struct FieldLayout {
  std::vector<LayerSpec> trunk; // hidden_layers matrices then the output matrix
  std::vector<LayerSpec> color;
  std::size_t total = 0;
};

inline FieldLayout make_layout(const FieldArchitecture& arch) {
  arch.validate();
  FieldLayout layout;
  std::size_t off = 0;
  auto push = [&](std::vector<LayerSpec>& dst, int in, int out) {
    LayerSpec s;
    s.in = in;
    s.out = out;
    s.w_offset = off;
    off += std::size_t(in) * std::size_t(out);
    s.b_offset = off;
    off += std::size_t(out);
    dst.push_back(s);
  };
  int in = arch.pos_input_dim();
  for (int l = 0; l < arch.hidden_layers; ++l) {
    push(layout.trunk, in, arch.hidden_width);
    in = arch.hidden_width;
  }
  push(layout.trunk, in, arch.trunk_output_dim());
  in = arch.color_input_dim();
  for (int l = 0; l < arch.color_hidden_layers; ++l) {
    push(layout.color, in, arch.color_width);
    in = arch.color_width;
  }
  push(layout.color, in, 3);
  layout.total = off;
  return layout;
}

inline std::size_t param_count(const FieldArchitecture& arch) { return make_layout(arch).total; }

template <class Real>
struct FieldParams {
  FieldArchitecture arch;
  FieldLayout layout;
  std::vector<Real> values;

  const Real* w(const LayerSpec& s) const { return values.data() + s.w_offset; }
  const Real* b(const LayerSpec& s) const { return values.data() + s.b_offset; }
  Real* w(const LayerSpec& s) { return values.data() + s.w_offset; }
  Real* b(const LayerSpec& s) { return values.data() + s.b_offset; }
};

template <class Real>
struct GradientTape {
  std::vector<Real> grad;

  explicit GradientTape(std::size_t n = 0) : grad(n, Real(0)) {}
  void match(const FieldParams<Real>& p) { grad.assign(p.values.size(), Real(0)); }
  void zero() { std::fill(grad.begin(), grad.end(), Real(0)); }
  Real* w(const LayerSpec& s) { return grad.data() + s.w_offset; }
  Real* b(const LayerSpec& s) { return grad.data() + s.b_offset; }
};

// Deterministic scaled-uniform init; the geometry logit bias is set to
// the configured prior so a fresh field is mostly transparent.
template <class Real>
FieldParams<Real> init_params(std::uint64_t seed, const FieldArchitecture& arch) {
  FieldParams<Real> p;
  p.arch = arch;
  p.layout = make_layout(arch);
  p.values.assign(p.layout.total, Real(0));
  CounterRng rng(seed, rng_purpose::kParamInit);
  auto fill = [&](const LayerSpec& s) {
    const double a = std::sqrt(6.0 / double(s.in + s.out));
    Real* w = p.values.data() + s.w_offset;
    const std::size_t n = std::size_t(s.in) * std::size_t(s.out);
    for (std::size_t i = 0; i < n; ++i) w[i] = Real(rng.uniform(-a, a));
  };
  for (const auto& s : p.layout.trunk) fill(s);
  for (const auto& s : p.layout.color) fill(s);
  p.values[p.layout.trunk.back().b_offset] = Real(arch.geometry_bias);
  return p;
}

// ---------------------------------------------------------------------------
// Batched evaluation
// ---------------------------------------------------------------------------

template <class Real>
struct FieldEvalBatch {
  std::int64_t count = 0;
  Matrix<Real> pos_in;  // pos_input_dim x N
  Matrix<Real> dir_in;  // dir_input_dim x N (unused when geometry-only)

  std::vector<Matrix<Real>> trunk_act; // post-softplus activations per hidden layer
  std::vector<Matrix<Real>> trunk_sig; // matching softplus derivatives
  Matrix<Real> trunk_out;              // (1 + feature) x N, linear
  Matrix<Real> color_in;               // (feature + dir) x N
  std::vector<Matrix<Real>> color_act;
  std::vector<Matrix<Real>> color_sig;
  Matrix<Real> color_out;              // 3 x N pre-sigmoid
  Matrix<Real> color_rgb;              // 3 x N post-sigmoid
  bool has_color = false;

  const Real* logits() const { return trunk_out.row(0); }
};

namespace detail {

template <class Real>
void apply_softplus(Matrix<Real>& pre, Matrix<Real>& act, Matrix<Real>& sig, ThreadPool* pool) {
  act.resize(pre.rows, pre.cols);
  sig.resize(pre.rows, pre.cols);
  const std::int64_t n = std::int64_t(pre.data.size());
  parallel_for(pool, 0, n, [&](std::int64_t i0, std::int64_t i1, int) {
    const Real* src = pre.data.data();
    Real* a = act.data.data();
    Real* s = sig.data.data();
    for (std::int64_t i = i0; i < i1; ++i) softplus_sigmoid(src[i], a[i], s[i]);
  });
}

} // namespace detail

// Forward pass over a filled batch. When `with_color` is false only the
// trunk is evaluated (surface extraction needs no view direction).
template <class Real>
void field_forward_batch(const FieldParams<Real>& p, FieldEvalBatch<Real>& batch, bool with_color,
                         ThreadPool* pool) {
  const auto& arch = p.arch;
  if (batch.pos_in.rows != arch.pos_input_dim())
    throw std::invalid_argument("field_forward: position input width mismatch");
  const std::int64_t n = batch.pos_in.cols;
  batch.count = n;
  batch.has_color = with_color;

  const std::size_t hl = std::size_t(arch.hidden_layers);
  batch.trunk_act.resize(hl);
  batch.trunk_sig.resize(hl);
  Matrix<Real> pre;
  const Matrix<Real>* src = &batch.pos_in;
  for (std::size_t l = 0; l < hl; ++l) {
    const LayerSpec& s = p.layout.trunk[l];
    gemm_bias(p.w(s), p.b(s), *src, pre, s.out, pool);
    detail::apply_softplus(pre, batch.trunk_act[l], batch.trunk_sig[l], pool);
    src = &batch.trunk_act[l];
  }
  {
    const LayerSpec& s = p.layout.trunk.back();
    gemm_bias(p.w(s), p.b(s), *src, batch.trunk_out, s.out, pool);
  }

  if (!with_color) return;
  if (batch.dir_in.rows != arch.dir_input_dim() || batch.dir_in.cols != n)
    throw std::invalid_argument("field_forward: direction input shape mismatch");

  // color input = [feature rows of trunk_out ; encoded direction]
  batch.color_in.resize(arch.color_input_dim(), n);
  for (int f = 0; f < arch.feature_dim; ++f)
    std::memcpy(batch.color_in.row(f), batch.trunk_out.row(1 + f), std::size_t(n) * sizeof(Real));
  for (int d = 0; d < arch.dir_input_dim(); ++d)
    std::memcpy(batch.color_in.row(arch.feature_dim + d), batch.dir_in.row(d),
                std::size_t(n) * sizeof(Real));

  const std::size_t cl = std::size_t(arch.color_hidden_layers);
  batch.color_act.resize(cl);
  batch.color_sig.resize(cl);
  const Matrix<Real>* csrc = &batch.color_in;
  for (std::size_t l = 0; l < cl; ++l) {
    const LayerSpec& s = p.layout.color[l];
    gemm_bias(p.w(s), p.b(s), *csrc, pre, s.out, pool);
    detail::apply_softplus(pre, batch.color_act[l], batch.color_sig[l], pool);
    csrc = &batch.color_act[l];
  }
  {
    const LayerSpec& s = p.layout.color.back();
    gemm_bias(p.w(s), p.b(s), *csrc, batch.color_out, s.out, pool);
  }
  batch.color_rgb.resize(3, n);
  const std::int64_t total = std::int64_t(batch.color_out.data.size());
  parallel_for(pool, 0, total, [&](std::int64_t i0, std::int64_t i1, int) {
    const Real* src2 = batch.color_out.data.data();
    Real* dst = batch.color_rgb.data.data();
    for (std::int64_t i = i0; i < i1; ++i) dst[i] = sigmoid(src2[i]);
  });
}

// Reverse pass. Upstream gradients: d_logit is d(loss)/d(geometry logit)
// per sample; d_rgb is d(loss)/d(color) with color taken post-sigmoid
// (pass nullptr for a geometry-only batch). Requires the forward cache
// of the matching forward call.
template <class Real>
void field_backward_batch(const FieldParams<Real>& p, const FieldEvalBatch<Real>& batch,
                          const Real* d_logit, const Matrix<Real>* d_rgb, GradientTape<Real>& tape,
                          ThreadPool* pool) {
  if (batch.count == 0) throw std::logic_error("field_backward: no recorded forward pass");
  if (tape.grad.size() != p.values.size())
    throw std::invalid_argument("field_backward: tape shape mismatch");
  const auto& arch = p.arch;
  const std::int64_t n = batch.count;

  Matrix<Real> delta, next;
  std::vector<Real> wt;

  // d(trunk_out): row 0 from the logit, feature rows from the color head.
  Matrix<Real> d_trunk_out(arch.trunk_output_dim(), n);
  if (d_logit)
    std::memcpy(d_trunk_out.row(0), d_logit, std::size_t(n) * sizeof(Real));

  if (d_rgb) {
    if (!batch.has_color) throw std::logic_error("field_backward: forward pass had no color");
    // through the output sigmoid
    delta.resize(3, n);
    parallel_for(pool, 0, std::int64_t(delta.data.size()),
                 [&](std::int64_t i0, std::int64_t i1, int) {
                   const Real* up = d_rgb->data.data();
                   const Real* rgb = batch.color_rgb.data.data();
                   Real* d = delta.data.data();
                   for (std::int64_t i = i0; i < i1; ++i)
                     d[i] = up[i] * rgb[i] * (Real(1) - rgb[i]);
                 });
    // color layers, top down
    for (int l = int(p.layout.color.size()) - 1; l >= 0; --l) {
      const LayerSpec& s = p.layout.color[std::size_t(l)];
      const Matrix<Real>& input =
          (l == 0) ? batch.color_in : batch.color_act[std::size_t(l - 1)];
      accum_weight_grad(delta, input, tape.w(s), tape.b(s), pool);
      transpose(p.w(s), s.out, s.in, wt);
      gemm_bias<Real>(wt.data(), nullptr, delta, next, s.in, pool);
      if (l > 0) {
        const Matrix<Real>& sig = batch.color_sig[std::size_t(l - 1)];
        parallel_for(pool, 0, std::int64_t(next.data.size()),
                     [&](std::int64_t i0, std::int64_t i1, int) {
                       Real* d = next.data.data();
                       const Real* sg = sig.data.data();
                       for (std::int64_t i = i0; i < i1; ++i) d[i] *= sg[i];
                     });
        std::swap(delta, next);
      }
    }
    // `next` now holds d(color_in); its feature rows feed the trunk.
    for (int f = 0; f < arch.feature_dim; ++f) {
      Real* dst = d_trunk_out.row(1 + f);
      const Real* src = next.row(f);
      for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
    }
  }

  // trunk, top down
  delta = std::move(d_trunk_out);
  for (int l = int(p.layout.trunk.size()) - 1; l >= 0; --l) {
    const LayerSpec& s = p.layout.trunk[std::size_t(l)];
    const Matrix<Real>& input = (l == 0) ? batch.pos_in : batch.trunk_act[std::size_t(l - 1)];
    accum_weight_grad(delta, input, tape.w(s), tape.b(s), pool);
    if (l == 0) break; // input coordinates are not learnable
    transpose(p.w(s), s.out, s.in, wt);
    gemm_bias<Real>(wt.data(), nullptr, delta, next, s.in, pool);
    const Matrix<Real>& sig = batch.trunk_sig[std::size_t(l - 1)];
    parallel_for(pool, 0, std::int64_t(next.data.size()),
                 [&](std::int64_t i0, std::int64_t i1, int) {
                   Real* d = next.data.data();
                   const Real* sg = sig.data.data();
                   for (std::int64_t i = i0; i < i1; ++i) d[i] *= sg[i];
                 });
    std::swap(delta, next);
  }
}

// ---------------------------------------------------------------------------
// Per-sample convenience API
// ---------------------------------------------------------------------------

template <class Real>
struct FieldOutput {
  Real geometry = Real(0);          // occupancy logit / raw density pre-activation
  std::array<Real, 3> color{};      // post-sigmoid, in [0,1]
  std::vector<Real> feature;        // trunk feature passed to the color head
};

template <class Real>
FieldOutput<Real> field_forward(const FieldParams<Real>& p, std::span<const Real> pos_input,
                                std::span<const Real> dir_input) {
  if (int(pos_input.size()) != p.arch.pos_input_dim() ||
      int(dir_input.size()) != p.arch.dir_input_dim())
    throw std::invalid_argument("field_forward: input width mismatch");
  FieldEvalBatch<Real> batch;
  batch.pos_in.resize(p.arch.pos_input_dim(), 1);
  batch.dir_in.resize(p.arch.dir_input_dim(), 1);
  for (int i = 0; i < p.arch.pos_input_dim(); ++i) batch.pos_in.at(i, 0) = pos_input[i];
  for (int i = 0; i < p.arch.dir_input_dim(); ++i) batch.dir_in.at(i, 0) = dir_input[i];
  field_forward_batch(p, batch, /*with_color=*/true, nullptr);
  FieldOutput<Real> out;
  out.geometry = batch.trunk_out.at(0, 0);
  for (int c = 0; c < 3; ++c) out.color[std::size_t(c)] = batch.color_rgb.at(c, 0);
  out.feature.resize(std::size_t(p.arch.feature_dim));
  for (int f = 0; f < p.arch.feature_dim; ++f) out.feature[std::size_t(f)] = batch.trunk_out.at(1 + f, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned binary, little-endian doubles
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline std::string serialize_architecture(const FieldArchitecture& a) {
  std::ostringstream os;
  os << "pos_freqs=" << a.pos_freqs << "\n"
     << "dir_freqs=" << a.dir_freqs << "\n"
     << "hidden_layers=" << a.hidden_layers << "\n"
     << "hidden_width=" << a.hidden_width << "\n"
     << "feature_dim=" << a.feature_dim << "\n"
     << "color_hidden_layers=" << a.color_hidden_layers << "\n"
     << "color_width=" << a.color_width << "\n";
  os << "geometry_bias=";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, a.geometry_bias);
  os.write(buf, r.ptr - buf);
  os << "\n";
  return os.str();
}

inline FieldArchitecture parse_architecture(const std::string& text) {
  FieldArchitecture a;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("checkpoint: malformed architecture line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "pos_freqs") a.pos_freqs = std::stoi(val);
    else if (key == "dir_freqs") a.dir_freqs = std::stoi(val);
    else if (key == "hidden_layers") a.hidden_layers = std::stoi(val);
    else if (key == "hidden_width") a.hidden_width = std::stoi(val);
    else if (key == "feature_dim") a.feature_dim = std::stoi(val);
    else if (key == "color_hidden_layers") a.color_hidden_layers = std::stoi(val);
    else if (key == "color_width") a.color_width = std::stoi(val);
    else if (key == "geometry_bias") a.geometry_bias = std::stod(val);
    else throw std::runtime_error("checkpoint: unknown architecture key: " + key);
  }
  a.validate();
  return a;
}

inline constexpr char kCheckpointMagic[8] = {'C', 'Q', 'F', 'C', 'K', 'P', 'T', '1'};

inline void save_checkpoint(const std::string& path, const FieldParams<double>& p) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 8);
  const std::uint32_t version = 1;
  os.write(reinterpret_cast<const char*>(&version), 4);
  const std::string arch = serialize_architecture(p.arch);
  const std::uint32_t alen = std::uint32_t(arch.size());
  os.write(reinterpret_cast<const char*>(&alen), 4);
  os.write(arch.data(), std::streamsize(arch.size()));
  const std::uint64_t count = p.values.size();
  os.write(reinterpret_cast<const char*>(&count), 8);
  os.write(reinterpret_cast<const char*>(p.values.data()),
           std::streamsize(count * sizeof(double)));
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

inline FieldParams<double> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw std::runtime_error("unsupported checkpoint version in " + path);
  std::uint32_t alen = 0;
  is.read(reinterpret_cast<char*>(&alen), 4);
  if (!is || alen > (1u << 20)) throw std::runtime_error("corrupt checkpoint header: " + path);
  std::string arch_text(alen, '\0');
  is.read(arch_text.data(), alen);
  std::uint64_t count = 0;
  is.read(reinterpret_cast<char*>(&count), 8);
  FieldParams<double> p;
  p.arch = parse_architecture(arch_text);
  p.layout = make_layout(p.arch);
  if (count != p.layout.total)
    throw std::runtime_error("checkpoint parameter count does not match architecture: " + path);
  p.values.resize(count);
  is.read(reinterpret_cast<char*>(p.values.data()), std::streamsize(count * sizeof(double)));
  if (!is) throw std::runtime_error("checkpoint truncated: " + path);
  return p;
}

template <class Real>
FieldParams<Real> convert_params(const FieldParams<double>& p) {
  FieldParams<Real> out;
  out.arch = p.arch;
  out.layout = p.layout;
  out.values.resize(p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i) out.values[i] = Real(p.values[i]);
  return out;
}

inline FieldParams<double> widen_params(const FieldParams<float>& p) {
  FieldParams<double> out;
  out.arch = p.arch;
  out.layout = p.layout;
  out.values.assign(p.values.begin(), p.values.end());
  return out;
}

} // namespace cqfield
