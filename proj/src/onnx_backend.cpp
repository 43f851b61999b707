#include "truncgen/onnx_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "onnx_subset.pb.h"
#include "truncgen/errors.hpp"
#include "truncgen/hash.hpp"

namespace fs = std::filesystem;

namespace truncgen::onnx {

using Shape = std::vector<std::int64_t>;

std::int64_t Tensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

Tensor Tensor::zeros(std::vector<std::int64_t> s) {
  Tensor t;
  t.shape = std::move(s);
  t.data.assign(static_cast<std::size_t>(t.numel()), 0.0f);
  return t;
}

namespace {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

Shape strides_of(const Shape& s) {
  Shape st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

std::int64_t norm_axis(std::int64_t axis, std::size_t rank) {
  const auto r = static_cast<std::int64_t>(rank);
  if (axis < -r || axis >= std::max<std::int64_t>(r, 1)) throw BackendContractError("axis out of range");
  return axis < 0 ? axis + r : axis;
}

// ------------------------------------------------------------ tensor decoding

Tensor decode_tensor(const onnxpb::TensorProto& p) {
  if (p.data_location() != 0) throw BackendLoadError("external tensor data is not supported: " + p.name());
  Tensor t;
  t.shape.assign(p.dims().begin(), p.dims().end());
  const auto n = static_cast<std::size_t>(t.numel());
  t.data.resize(n);
  const std::string& raw = p.raw_data();
  auto from_raw = [&](auto tag) {
    using T = decltype(tag);
    if (raw.size() != n * sizeof(T)) throw BackendLoadError("tensor " + p.name() + ": raw_data size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      T v;
      std::memcpy(&v, raw.data() + i * sizeof(T), sizeof(T));
      t.data[i] = static_cast<float>(v);
    }
  };
  auto from_field = [&](const auto& field) {
    if (static_cast<std::size_t>(field.size()) != n)
      throw BackendLoadError("tensor " + p.name() + ": element count mismatch");
    for (std::size_t i = 0; i < n; ++i) t.data[i] = static_cast<float>(field.Get(static_cast<int>(i)));
  };
  switch (p.data_type()) {
    case onnxpb::TensorProto::FLOAT:
      raw.empty() ? from_field(p.float_data()) : from_raw(float{});
      break;
    case onnxpb::TensorProto::DOUBLE:
      raw.empty() ? from_field(p.double_data()) : from_raw(double{});
      break;
    case onnxpb::TensorProto::INT64:
      raw.empty() ? from_field(p.int64_data()) : from_raw(std::int64_t{});
      break;
    case onnxpb::TensorProto::INT32:
      raw.empty() ? from_field(p.int32_data()) : from_raw(std::int32_t{});
      break;
    case onnxpb::TensorProto::UINT8:
      raw.empty() ? from_field(p.int32_data()) : from_raw(std::uint8_t{});
      break;
    case onnxpb::TensorProto::INT8:
      raw.empty() ? from_field(p.int32_data()) : from_raw(std::int8_t{});
      break;
    case onnxpb::TensorProto::BOOL:
      raw.empty() ? from_field(p.int32_data()) : from_raw(std::uint8_t{});
      break;
    default:
      throw BackendLoadError("tensor " + p.name() + ": unsupported data type " + std::to_string(p.data_type()));
  }
  return t;
}

Shape as_ints(const Tensor& t) {
  Shape out;
  for (float v : t.data) out.push_back(static_cast<std::int64_t>(std::llround(v)));
  return out;
}

// ------------------------------------------------------------ attributes

struct Attrs {
  const onnxpb::NodeProto& node;

  const onnxpb::AttributeProto* find(const char* name) const {
    for (const auto& a : node.attribute())
      if (a.name() == name) return &a;
    return nullptr;
  }
  bool has(const char* name) const { return find(name) != nullptr; }
  std::int64_t i(const char* name, std::int64_t def) const {
    const auto* a = find(name);
    return a ? a->i() : def;
  }
  float f(const char* name, float def) const {
    const auto* a = find(name);
    return a ? a->f() : def;
  }
  std::string s(const char* name, const std::string& def) const {
    const auto* a = find(name);
    return a ? a->s() : def;
  }
  Shape ints(const char* name, Shape def = {}) const {
    const auto* a = find(name);
    return a ? Shape(a->ints().begin(), a->ints().end()) : def;
  }
};

// ------------------------------------------------------------ kernels

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1)
      throw BackendContractError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = da == 1 ? db : da;
  }
  return out;
}

// Strides of `in` viewed at rank of `out`, zero on broadcast dimensions.
Shape broadcast_strides(const Shape& in, const Shape& out) {
  const Shape st = strides_of(in);
  Shape res(out.size(), 0);
  const std::size_t off = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) res[off + i] = in[i] == 1 ? 0 : st[i];
  return res;
}

template <typename F>
Tensor binary(const Tensor& a, const Tensor& b, F op) {
  Tensor out = Tensor::zeros(broadcast_shape(a.shape, b.shape));
  const Shape sa = broadcast_strides(a.shape, out.shape);
  const Shape sb = broadcast_strides(b.shape, out.shape);
  const std::size_t r = out.shape.size();
  Shape idx(r, 0);
  std::int64_t ia = 0, ib = 0;
  const std::int64_t n = out.numel();
  for (std::int64_t k = 0; k < n; ++k) {
    out.data[k] = op(a.data[ia], b.data[ib]);
    for (int d = static_cast<int>(r) - 1; d >= 0; --d) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out.shape[d]) break;
      ia -= sa[d] * out.shape[d];
      ib -= sb[d] * out.shape[d];
      idx[d] = 0;
    }
  }
  return out;
}

Tensor expand_to(const Tensor& a, const Shape& target) {
  return binary(a, Tensor::zeros(target), [](float x, float) { return x; });
}

template <typename F>
Tensor unary(Tensor t, F op) {
  for (auto& v : t.data) v = op(v);
  return t;
}

Tensor matmul(const Tensor& a_in, const Tensor& b_in) {
  Tensor a = a_in, b = b_in;
  const bool a_vec = a.shape.size() == 1, b_vec = b.shape.size() == 1;
  if (a_vec) a.shape.insert(a.shape.begin(), 1);
  if (b_vec) b.shape.push_back(1);
  if (a.shape.size() < 2 || b.shape.size() < 2) throw BackendContractError("MatMul: rank too small");
  const std::int64_t m = a.shape[a.shape.size() - 2], k = a.shape.back();
  const std::int64_t k2 = b.shape[b.shape.size() - 2], n = b.shape.back();
  if (k != k2) throw BackendContractError("MatMul: inner dims " + shape_str(a.shape) + " x " + shape_str(b.shape));
  const Shape ba(a.shape.begin(), a.shape.end() - 2), bb(b.shape.begin(), b.shape.end() - 2);
  const Shape batch = broadcast_shape(ba, bb);
  const Shape sa = broadcast_strides(ba, batch), sb = broadcast_strides(bb, batch);
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out = Tensor::zeros(out_shape);
  const std::int64_t nb = std::accumulate(batch.begin(), batch.end(), std::int64_t{1}, std::multiplies<>());
  const Shape bst = strides_of(batch);
  for (std::int64_t q = 0; q < nb; ++q) {
    std::int64_t oa = 0, ob = 0, rem = q;
    for (std::size_t d = 0; d < batch.size(); ++d) {
      const std::int64_t id = rem / bst[d];
      rem %= bst[d];
      oa += id * sa[d];
      ob += id * sb[d];
    }
    const float* pa = a.data.data() + oa * m * k;
    const float* pb = b.data.data() + ob * k * n;
    float* po = out.data.data() + q * m * n;
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::int64_t t = 0; t < k; ++t) acc += static_cast<double>(pa[i * k + t]) * pb[t * n + j];
        po[i * n + j] = static_cast<float>(acc);
      }
  }
  if (a_vec) out.shape.erase(out.shape.end() - 2);
  if (b_vec) out.shape.pop_back();
  return out;
}

Tensor transpose2(const Tensor& t) {
  Tensor out = Tensor::zeros({t.shape[1], t.shape[0]});
  for (std::int64_t i = 0; i < t.shape[0]; ++i)
    for (std::int64_t j = 0; j < t.shape[1]; ++j) out.data[j * t.shape[0] + i] = t.data[i * t.shape[1] + j];
  return out;
}

Tensor gemm(const Attrs& at, const std::vector<const Tensor*>& in) {
  Tensor a = *in[0], b = *in[1];
  if (a.shape.size() != 2 || b.shape.size() != 2) throw BackendContractError("Gemm expects 2-D inputs");
  if (at.i("transA", 0)) a = transpose2(a);
  if (at.i("transB", 0)) b = transpose2(b);
  const double alpha = at.f("alpha", 1.0f), beta = at.f("beta", 1.0f);
  const std::int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  if (b.shape[0] != k) throw BackendContractError("Gemm: inner dims " + shape_str(a.shape) + " x " + shape_str(b.shape));
  Tensor out = Tensor::zeros({m, n});
  Tensor c;
  if (in.size() > 2 && in[2]) c = expand_to(*in[2], {m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t t = 0; t < k; ++t) acc += static_cast<double>(a.data[i * k + t]) * b.data[t * n + j];
      double v = alpha * acc;
      if (!c.data.empty()) v += beta * c.data[i * n + j];
      out.data[i * n + j] = static_cast<float>(v);
    }
  return out;
}

Tensor softmax_op(const Tensor& x, std::int64_t axis, bool legacy) {
  const std::size_t r = x.shape.size();
  axis = norm_axis(axis, r);
  Tensor out = x;
  std::int64_t outer = 1, len = 1, inner = 1;
  if (legacy) {
    for (std::int64_t d = 0; d < axis; ++d) outer *= x.shape[d];
    for (std::size_t d = axis; d < r; ++d) len *= x.shape[d];
  } else {
    for (std::int64_t d = 0; d < axis; ++d) outer *= x.shape[d];
    len = x.shape[axis];
    for (std::size_t d = axis + 1; d < r; ++d) inner *= x.shape[d];
  }
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t in = 0; in < inner; ++in) {
      auto at = [&](std::int64_t l) -> float& { return out.data[(o * len + l) * inner + in]; };
      float mx = -std::numeric_limits<float>::infinity();
      for (std::int64_t l = 0; l < len; ++l) mx = std::max(mx, at(l));
      double sum = 0.0;
      for (std::int64_t l = 0; l < len; ++l) sum += std::exp(static_cast<double>(at(l)) - mx);
      for (std::int64_t l = 0; l < len; ++l) at(l) = static_cast<float>(std::exp(static_cast<double>(at(l)) - mx) / sum);
    }
  return out;
}

Tensor transpose(const Tensor& x, Shape perm) {
  const std::size_t r = x.shape.size();
  if (perm.empty()) {
    perm.resize(r);
    for (std::size_t i = 0; i < r; ++i) perm[i] = static_cast<std::int64_t>(r - 1 - i);
  }
  if (perm.size() != r) throw BackendContractError("Transpose: perm rank mismatch");
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.shape[perm[i]];
  Tensor out = Tensor::zeros(out_shape);
  const Shape in_st = strides_of(x.shape);
  Shape idx(r, 0);
  for (std::int64_t k = 0; k < out.numel(); ++k) {
    std::int64_t src = 0;
    for (std::size_t d = 0; d < r; ++d) src += idx[d] * in_st[perm[d]];
    out.data[k] = x.data[src];
    for (int d = static_cast<int>(r) - 1; d >= 0; --d) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

Tensor concat(const std::vector<const Tensor*>& in, std::int64_t axis) {
  if (in.empty()) throw BackendContractError("Concat: no inputs");
  const std::size_t r = in[0]->shape.size();
  axis = norm_axis(axis, r);
  Shape out_shape = in[0]->shape;
  out_shape[axis] = 0;
  for (const Tensor* t : in) {
    if (t->shape.size() != r) throw BackendContractError("Concat: rank mismatch");
    for (std::size_t d = 0; d < r; ++d)
      if (static_cast<std::int64_t>(d) != axis && t->shape[d] != in[0]->shape[d])
        throw BackendContractError("Concat: shape mismatch");
    out_shape[axis] += t->shape[axis];
  }
  Tensor out = Tensor::zeros(out_shape);
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t d = 0; d < axis; ++d) outer *= out_shape[d];
  for (std::size_t d = axis + 1; d < r; ++d) inner *= out_shape[d];
  std::int64_t offset = 0;
  for (const Tensor* t : in) {
    const std::int64_t chunk = t->shape[axis] * inner;
    for (std::int64_t o = 0; o < outer; ++o)
      std::copy_n(t->data.begin() + o * chunk, chunk, out.data.begin() + o * out_shape[axis] * inner + offset);
    offset += chunk;
  }
  return out;
}

Tensor reshape(const Tensor& x, const Shape& spec, bool allowzero) {
  Shape out(spec.size());
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec[i] == -1) {
      if (infer >= 0) throw BackendContractError("Reshape: more than one -1");
      infer = static_cast<int>(i);
      continue;
    }
    out[i] = spec[i] == 0 && !allowzero ? x.shape.at(i) : spec[i];
    known *= out[i];
  }
  if (infer >= 0) {
    if (known == 0 || x.numel() % known) throw BackendContractError("Reshape: cannot infer dimension");
    out[infer] = x.numel() / known;
  }
  Tensor t = x;
  t.shape = out;
  if (t.numel() != x.numel())
    throw BackendContractError("Reshape: " + shape_str(x.shape) + " -> " + shape_str(out) + " changes size");
  return t;
}

struct Window2d {
  std::int64_t kh, kw, sh, sw, dh = 1, dw = 1, pt, pl, pb, pr;
};

Window2d window_attrs(const Attrs& at, std::int64_t kh, std::int64_t kw) {
  const std::string auto_pad = at.s("auto_pad", "NOTSET");
  if (auto_pad != "NOTSET" && auto_pad != "VALID")
    throw BackendLoadError("auto_pad=" + auto_pad + " is not supported");
  const Shape k = at.ints("kernel_shape", {kh, kw});
  const Shape s = at.ints("strides", {1, 1});
  const Shape d = at.ints("dilations", {1, 1});
  const Shape p = at.ints("pads", {0, 0, 0, 0});
  if (k.size() != 2 || s.size() != 2 || d.size() != 2 || p.size() != 4)
    throw BackendLoadError("only 2-D windows are supported");
  if (at.i("ceil_mode", 0)) throw BackendLoadError("ceil_mode=1 is not supported");
  return {k[0], k[1], s[0], s[1], d[0], d[1], p[0], p[1], p[2], p[3]};
}

Tensor conv(const Attrs& at, const std::vector<const Tensor*>& in) {
  const Tensor& x = *in[0];
  const Tensor& w = *in[1];
  if (x.shape.size() != 4 || w.shape.size() != 4) throw BackendContractError("Conv: only 2-D NCHW is supported");
  const std::int64_t group = at.i("group", 1);
  const Window2d win = window_attrs(at, w.shape[2], w.shape[3]);
  const std::int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const std::int64_t m = w.shape[0], cg = w.shape[1];
  if (cg * group != c || m % group) throw BackendContractError("Conv: channel/group mismatch");
  const std::int64_t oh = (h + win.pt + win.pb - (win.dh * (win.kh - 1) + 1)) / win.sh + 1;
  const std::int64_t ow = (wd + win.pl + win.pr - (win.dw * (win.kw - 1) + 1)) / win.sw + 1;
  Tensor out = Tensor::zeros({n, m, oh, ow});
  const Tensor* bias = in.size() > 2 ? in[2] : nullptr;
  const std::int64_t mg = m / group;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t oc = 0; oc < m; ++oc) {
      const std::int64_t g = oc / mg;
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t xo = 0; xo < ow; ++xo) {
          double acc = bias ? bias->data[oc] : 0.0;
          for (std::int64_t ic = 0; ic < cg; ++ic)
            for (std::int64_t ky = 0; ky < win.kh; ++ky) {
              const std::int64_t iy = y * win.sh - win.pt + ky * win.dh;
              if (iy < 0 || iy >= h) continue;
              for (std::int64_t kx = 0; kx < win.kw; ++kx) {
                const std::int64_t ix = xo * win.sw - win.pl + kx * win.dw;
                if (ix < 0 || ix >= wd) continue;
                acc += static_cast<double>(x.data[((b * c + g * cg + ic) * h + iy) * wd + ix]) *
                       w.data[((oc * cg + ic) * win.kh + ky) * win.kw + kx];
              }
            }
          out.data[((b * m + oc) * oh + y) * ow + xo] = static_cast<float>(acc);
        }
    }
  return out;
}

Tensor pool(const Attrs& at, const Tensor& x, bool max_pool) {
  if (x.shape.size() != 4) throw BackendContractError("pooling: only 2-D NCHW is supported");
  const Window2d win = window_attrs(at, 1, 1);
  if (!at.has("kernel_shape")) throw BackendLoadError("pooling: kernel_shape is required");
  const bool include_pad = at.i("count_include_pad", 0) != 0;
  const std::int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const std::int64_t oh = (h + win.pt + win.pb - (win.dh * (win.kh - 1) + 1)) / win.sh + 1;
  const std::int64_t ow = (wd + win.pl + win.pr - (win.dw * (win.kw - 1) + 1)) / win.sw + 1;
  Tensor out = Tensor::zeros({n, c, oh, ow});
  for (std::int64_t p = 0; p < n * c; ++p)
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t xo = 0; xo < ow; ++xo) {
        double acc = max_pool ? -std::numeric_limits<double>::infinity() : 0.0;
        std::int64_t count = 0;
        for (std::int64_t ky = 0; ky < win.kh; ++ky)
          for (std::int64_t kx = 0; kx < win.kw; ++kx) {
            const std::int64_t iy = y * win.sh - win.pt + ky * win.dh;
            const std::int64_t ix = xo * win.sw - win.pl + kx * win.dw;
            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) {
              if (include_pad) ++count;
              continue;
            }
            const double v = x.data[(p * h + iy) * wd + ix];
            acc = max_pool ? std::max(acc, v) : acc + v;
            ++count;
          }
        out.data[(p * oh + y) * ow + xo] = static_cast<float>(max_pool ? acc : acc / std::max<std::int64_t>(count, 1));
      }
  return out;
}

Tensor global_average_pool(const Tensor& x) {
  if (x.shape.size() < 3) throw BackendContractError("GlobalAveragePool: rank < 3");
  const std::int64_t nc = x.shape[0] * x.shape[1];
  const std::int64_t spatial = x.numel() / std::max<std::int64_t>(nc, 1);
  Shape s = x.shape;
  for (std::size_t d = 2; d < s.size(); ++d) s[d] = 1;
  Tensor out = Tensor::zeros(s);
  for (std::int64_t p = 0; p < nc; ++p) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < spatial; ++i) acc += x.data[p * spatial + i];
    out.data[p] = static_cast<float>(acc / spatial);
  }
  return out;
}

Tensor unsqueeze(const Tensor& x, Shape axes) {
  Tensor t = x;
  const std::size_t r = x.shape.size() + axes.size();
  for (auto& a : axes) a = norm_axis(a, r);
  std::sort(axes.begin(), axes.end());
  for (auto a : axes) t.shape.insert(t.shape.begin() + a, 1);
  return t;
}

Tensor squeeze(const Tensor& x, Shape axes) {
  Tensor t = x;
  if (axes.empty()) {
    Shape s;
    for (auto d : x.shape)
      if (d != 1) s.push_back(d);
    t.shape = s;
    return t;
  }
  for (auto& a : axes) a = norm_axis(a, x.shape.size());
  std::sort(axes.rbegin(), axes.rend());
  for (auto a : axes) {
    if (t.shape[a] != 1) throw BackendContractError("Squeeze: dimension is not 1");
    t.shape.erase(t.shape.begin() + a);
  }
  return t;
}

Tensor constant(const Attrs& at) {
  if (const auto* a = at.find("value")) return decode_tensor(a->t());
  if (const auto* a = at.find("value_float")) return Tensor{{}, {a->f()}};
  if (const auto* a = at.find("value_floats"))
    return Tensor{{static_cast<std::int64_t>(a->floats_size())}, {a->floats().begin(), a->floats().end()}};
  if (const auto* a = at.find("value_int")) return Tensor{{}, {static_cast<float>(a->i())}};
  if (const auto* a = at.find("value_ints")) {
    Tensor t{{static_cast<std::int64_t>(a->ints_size())}, {}};
    for (auto v : a->ints()) t.data.push_back(static_cast<float>(v));
    return t;
  }
  throw BackendLoadError("Constant: unsupported value attribute");
}

}  // namespace

// ------------------------------------------------------------ model

struct Model::Impl {
  onnxpb::GraphProto graph;
  std::map<std::string, Tensor> initializers;
  std::int64_t opset = 13;
  std::string label;
};

Model Model::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendLoadError("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_bytes(ss.str(), path.string());
}

Model Model::from_bytes(const std::string& bytes, const std::string& label) {
  onnxpb::ModelProto proto;
  if (!proto.ParseFromString(bytes) || !proto.has_graph())
    throw BackendLoadError("cannot parse ONNX model " + label);
  auto impl = std::make_shared<Impl>();
  impl->label = label;
  impl->graph = proto.graph();
  for (const auto& op : proto.opset_import())
    if (op.domain().empty() || op.domain() == "ai.onnx") impl->opset = op.version();
  for (const auto& init : impl->graph.initializer()) impl->initializers[init.name()] = decode_tensor(init);

  static const std::set<std::string> supported{
      "Gemm",       "MatMul",    "Add",       "Sub",      "Mul",      "Div",         "Relu",
      "LeakyRelu",  "Sigmoid",   "Tanh",      "Exp",      "Softmax",  "Flatten",     "Reshape",
      "Transpose",  "Concat",    "Unsqueeze", "Squeeze",  "Conv",     "AveragePool", "MaxPool",
      "GlobalAveragePool",       "Clip",      "Constant", "Identity", "Expand"};
  for (const auto& node : impl->graph.node()) {
    if (!node.domain().empty() && node.domain() != "ai.onnx")
      throw BackendLoadError(label + ": operator domain '" + node.domain() + "' is not supported");
    if (!supported.count(node.op_type()))
      throw BackendLoadError(label + ": operator " + node.op_type() + " is not supported");
  }

  Model m;
  for (const auto& v : impl->graph.input())
    if (!impl->initializers.count(v.name())) m.inputs_.push_back(v.name());
  for (const auto& v : impl->graph.output()) m.outputs_.push_back(v.name());
  m.sha256_ = sha256_hex(bytes);
  m.impl_ = std::move(impl);
  return m;
}

std::map<std::string, Tensor> Model::run(const std::map<std::string, Tensor>& inputs,
                                         const std::vector<std::string>& outputs) const {
  const Impl& g = *impl_;
  std::map<std::string, Tensor> values = g.initializers;
  for (const auto& name : inputs_) {
    auto it = inputs.find(name);
    if (it == inputs.end()) throw BackendContractError(g.label + ": missing input '" + name + "'");
    if (it->second.numel() != static_cast<std::int64_t>(it->second.data.size()))
      throw BackendContractError(g.label + ": input '" + name + "' data does not match its shape");
    values[name] = it->second;
  }

  for (const auto& node : g.graph.node()) {
    std::vector<const Tensor*> in;
    for (const auto& name : node.input()) {
      if (name.empty()) {
        in.push_back(nullptr);
        continue;
      }
      auto it = values.find(name);
      if (it == values.end()) throw BackendContractError(g.label + ": value '" + name + "' used before definition");
      in.push_back(&it->second);
    }
    auto need = [&](std::size_t n) {
      if (in.size() < n || std::any_of(in.begin(), in.begin() + n, [](const Tensor* t) { return !t; }))
        throw BackendContractError(g.label + ": " + node.op_type() + " needs " + std::to_string(n) + " inputs");
    };
    const Attrs at{node};
    const std::string& op = node.op_type();
    Tensor out;
    if (op == "Gemm") {
      need(2);
      out = gemm(at, in);
    } else if (op == "MatMul") {
      need(2);
      out = matmul(*in[0], *in[1]);
    } else if (op == "Add") {
      need(2);
      out = binary(*in[0], *in[1], [](float a, float b) { return a + b; });
    } else if (op == "Sub") {
      need(2);
      out = binary(*in[0], *in[1], [](float a, float b) { return a - b; });
    } else if (op == "Mul") {
      need(2);
      out = binary(*in[0], *in[1], [](float a, float b) { return a * b; });
    } else if (op == "Div") {
      need(2);
      out = binary(*in[0], *in[1], [](float a, float b) { return a / b; });
    } else if (op == "Relu") {
      need(1);
      out = unary(*in[0], [](float v) { return v > 0.0f ? v : 0.0f; });
    } else if (op == "LeakyRelu") {
      need(1);
      const float alpha = at.f("alpha", 0.01f);
      out = unary(*in[0], [alpha](float v) { return v >= 0.0f ? v : alpha * v; });
    } else if (op == "Sigmoid") {
      need(1);
      out = unary(*in[0], [](float v) { return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v)))); });
    } else if (op == "Tanh") {
      need(1);
      out = unary(*in[0], [](float v) { return std::tanh(v); });
    } else if (op == "Exp") {
      need(1);
      out = unary(*in[0], [](float v) { return std::exp(v); });
    } else if (op == "Softmax") {
      need(1);
      const bool legacy = g.opset < 13;
      out = softmax_op(*in[0], at.i("axis", legacy ? 1 : -1), legacy);
    } else if (op == "Flatten") {
      need(1);
      const auto axis = norm_axis(at.i("axis", 1), in[0]->shape.size() + 1);
      std::int64_t outer = 1;
      for (std::int64_t d = 0; d < axis; ++d) outer *= in[0]->shape[d];
      out = *in[0];
      out.shape = {outer, outer ? in[0]->numel() / outer : 0};
    } else if (op == "Reshape") {
      need(2);
      out = reshape(*in[0], as_ints(*in[1]), at.i("allowzero", 0) != 0);
    } else if (op == "Transpose") {
      need(1);
      out = transpose(*in[0], at.ints("perm"));
    } else if (op == "Concat") {
      out = concat(in, at.i("axis", 0));
    } else if (op == "Unsqueeze") {
      need(1);
      out = unsqueeze(*in[0], in.size() > 1 && in[1] ? as_ints(*in[1]) : at.ints("axes"));
    } else if (op == "Squeeze") {
      need(1);
      out = squeeze(*in[0], in.size() > 1 && in[1] ? as_ints(*in[1]) : at.ints("axes"));
    } else if (op == "Conv") {
      need(2);
      out = conv(at, in);
    } else if (op == "AveragePool" || op == "MaxPool") {
      need(1);
      if (op == "MaxPool" && node.output_size() > 1) throw BackendLoadError("MaxPool indices output is not supported");
      out = pool(at, *in[0], op == "MaxPool");
    } else if (op == "GlobalAveragePool") {
      need(1);
      out = global_average_pool(*in[0]);
    } else if (op == "Clip") {
      need(1);
      float lo = -std::numeric_limits<float>::infinity(), hi = std::numeric_limits<float>::infinity();
      if (g.opset < 11) {
        lo = at.f("min", lo);
        hi = at.f("max", hi);
      } else {
        if (in.size() > 1 && in[1]) lo = in[1]->data.at(0);
        if (in.size() > 2 && in[2]) hi = in[2]->data.at(0);
      }
      out = unary(*in[0], [lo, hi](float v) { return std::min(std::max(v, lo), hi); });
    } else if (op == "Constant") {
      out = constant(at);
    } else if (op == "Identity") {
      need(1);
      out = *in[0];
    } else if (op == "Expand") {
      need(2);
      out = expand_to(*in[0], as_ints(*in[1]));
    }
    if (node.output_size() < 1) throw BackendLoadError(g.label + ": node without outputs");
    values[node.output(0)] = std::move(out);
  }

  std::map<std::string, Tensor> result;
  for (const auto& name : outputs) {
    auto it = values.find(name);
    if (it == values.end()) throw BackendContractError(g.label + ": graph does not produce '" + name + "'");
    result[name] = it->second;
  }
  return result;
}

Tensor Model::run1(const std::map<std::string, Tensor>& inputs, const std::string& output) const {
  return run(inputs, {output}).at(output);
}

// ------------------------------------------------------------ manifest

Manifest load_manifest(const fs::path& path) {
  nlohmann::json j;
  {
    std::ifstream in(path);
    if (!in) throw BackendLoadError("cannot open manifest " + path.string());
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw BackendLoadError("manifest " + path.string() + ": " + e.what());
    }
  }
  const fs::path base = path.parent_path();
  Manifest m;
  try {
    auto graph = [&](const char* key, bool multi_input) {
      const auto& g = j.at(key);
      GraphSpec s;
      s.file = base / g.at("file").get<std::string>();
      if (multi_input) {
        s.inputs = g.at("inputs").get<std::vector<std::string>>();
      } else {
        s.inputs = {g.at("input").get<std::string>()};
      }
      s.output = g.at("output").get<std::string>();
      return s;
    };
    m.mapper = graph("mapper", true);
    m.synthesis = graph("synthesis", false);
    m.classifier = graph("classifier", false);
    if (m.mapper.inputs.size() != 2) throw BackendLoadError("manifest: mapper needs inputs [z, c]");
    const auto& d = j.at("dims");
    m.latent_dim = d.at("latent_dim").get<int>();
    m.style_dim = d.at("style_dim").get<int>();
    m.num_layers = d.at("num_layers").get<int>();
    m.num_classes = d.at("num_classes").get<int>();
    const auto img = d.at("image").get<std::vector<int>>();
    if (img.size() != 3) throw BackendLoadError("manifest: dims.image must be [height, width, channels]");
    m.image = ImageShape{img[0], img[1], img[2]};
    const auto range = j.at("synthesis").value("output_range", std::vector<double>{0.0, 1.0});
    if (range.size() != 2 || !(range[1] > range[0])) throw BackendLoadError("manifest: bad synthesis output_range");
    m.output_lo = range[0];
    m.output_hi = range[1];
    m.classifier_outputs_probs = j.at("classifier").value("outputs", "logits") == "probs";
  } catch (const nlohmann::json::exception& e) {
    throw BackendLoadError("manifest " + path.string() + ": " + e.what());
  }
  if (m.latent_dim < 1 || m.style_dim < 1 || m.num_layers < 1 || m.num_classes < 2 || m.image.size() < 1)
    throw BackendLoadError("manifest " + path.string() + ": dims must be positive (and at least two classes)");
  if (m.image.channels != 1 && m.image.channels != 3)
    throw BackendLoadError("manifest: images must have 1 or 3 channels");
  return m;
}

Tensor image_to_nchw(const Image& image) {
  const auto& s = image.shape;
  Tensor t = Tensor::zeros({1, s.channels, s.height, s.width});
  for (int c = 0; c < s.channels; ++c)
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x)
        t.data[(static_cast<std::size_t>(c) * s.height + y) * s.width + x] = static_cast<float>(image.at(y, x, c));
  return t;
}

Image nchw_to_image(const Tensor& t, const ImageShape& shape, double lo, double hi) {
  const Shape expected{1, shape.channels, shape.height, shape.width};
  if (t.shape != expected)
    throw BackendContractError("synthesis output " + shape_str(t.shape) + " != declared " + shape_str(expected));
  Image img(shape);
  for (int c = 0; c < shape.channels; ++c)
    for (int y = 0; y < shape.height; ++y)
      for (int x = 0; x < shape.width; ++x)
        img.at(y, x, c) = (t.data[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x] - lo) / (hi - lo);
  img.clamp();
  return img;
}

// ------------------------------------------------------------ backends

OnnxGenerator::OnnxGenerator(const Manifest& manifest)
    : m_(manifest), mapper_(Model::load(manifest.mapper.file)), synthesis_(Model::load(manifest.synthesis.file)) {}

StyleVector OnnxGenerator::map_w(const Eigen::VectorXd& z, int class_label) const {
  check_latent(z, class_label);
  Tensor zt = Tensor::zeros({1, m_.latent_dim});
  for (int i = 0; i < m_.latent_dim; ++i) zt.data[i] = static_cast<float>(z[i]);
  Tensor ct = Tensor::zeros({1, m_.num_classes});
  ct.data[class_label] = 1.0f;
  const Tensor w = mapper_.run1({{m_.mapper.inputs[0], zt}, {m_.mapper.inputs[1], ct}}, m_.mapper.output);
  if (w.numel() != m_.style_dim)
    throw BackendContractError("mapper output " + shape_str(w.shape) + " != style_dim " + std::to_string(m_.style_dim));
  StyleVector out(m_.style_dim);
  for (int i = 0; i < m_.style_dim; ++i) out[i] = w.data[i];
  if (!out.allFinite()) throw BackendContractError("mapper produced non-finite values");
  return out;
}

Image OnnxGenerator::synthesize(const StyleCode& w) const {
  check_style(w);
  Tensor wt = Tensor::zeros({1, m_.num_layers, m_.style_dim});
  for (int l = 0; l < m_.num_layers; ++l)
    for (int d = 0; d < m_.style_dim; ++d) wt.data[l * m_.style_dim + d] = static_cast<float>(w(l, d));
  const Tensor img = synthesis_.run1({{m_.synthesis.inputs[0], wt}}, m_.synthesis.output);
  Image out = nchw_to_image(img, m_.image, m_.output_lo, m_.output_hi);
  out.provenance = Provenance::Truncated;
  return out;
}

std::string OnnxGenerator::fingerprint() const {
  return sha256_hex("mapper:" + mapper_.sha256() + "|synthesis:" + synthesis_.sha256());
}

OnnxClassifier::OnnxClassifier(const Manifest& manifest)
    : m_(manifest), model_(Model::load(manifest.classifier.file)) {}

Prediction OnnxClassifier::classify(const Image& image) const {
  check_image(image);
  const Tensor out = model_.run1({{m_.classifier.inputs[0], image_to_nchw(image)}}, m_.classifier.output);
  if (out.numel() != m_.num_classes)
    throw BackendContractError("classifier output " + shape_str(out.shape) + " != num_classes " +
                               std::to_string(m_.num_classes));
  Eigen::VectorXd v(m_.num_classes);
  for (int k = 0; k < m_.num_classes; ++k) v[k] = out.data[k];
  if (!v.allFinite()) throw BackendContractError("classifier produced non-finite values");
  if (m_.classifier_outputs_probs) {
    if ((v.array() < 0.0).any() || std::abs(v.sum() - 1.0) > 1e-4)
      throw BackendContractError("classifier declared probabilities but output is not a distribution");
    return make_prediction(v / v.sum());
  }
  return make_prediction(softmax(v));
}

std::string OnnxClassifier::fingerprint() const { return model_.sha256(); }

OnnxEmbedder::OnnxEmbedder(const fs::path& file, std::string input, std::string output)
    : model_(Model::load(file)), input_(std::move(input)), output_(std::move(output)) {}

Eigen::VectorXd OnnxEmbedder::embed(const Image& image) const {
  const Tensor out = model_.run1({{input_, image_to_nchw(image)}}, output_);
  Eigen::VectorXd v(out.numel());
  for (std::int64_t i = 0; i < out.numel(); ++i) v[i] = out.data[i];
  if (!v.allFinite()) throw BackendError("embedder produced non-finite values");
  return v;
}

std::string OnnxEmbedder::id() const { return "onnx:" + model_.sha256().substr(0, 16); }

}  // namespace truncgen::onnx
