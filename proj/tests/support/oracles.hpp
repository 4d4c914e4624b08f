#pragma once

// Straight-from-the-definition reference implementations used as test oracles.
// Deliberately naive: nested loops over explicit indices, no shared code with
// the library kernels beyond the tensor containers.

#include <cmath>
#include <cstdint>
#include <vector>

#include "slicewise/model.hpp"
#include "slicewise/tensor.hpp"

namespace oracle {

using slicewise::FloatTensor;
using slicewise::LayerKind;
using slicewise::ModelGraph;

struct Dense {
  std::vector<std::size_t> shape;
  std::vector<double> v;
};

struct DenseInt {
  std::vector<std::size_t> shape;
  std::vector<std::int64_t> v;
};

inline Dense from(const FloatTensor& t) { return {t.shape(), {t.data().begin(), t.data().end()}}; }

// Float semantics of one layer.
inline Dense float_layer(const ModelGraph& m, const slicewise::LayerSpec& l, const Dense& x) {
  Dense y;
  switch (l.kind) {
    case LayerKind::conv2d: {
      const FloatTensor& w = m.weight(*l.weight_ref);
      const FloatTensor& b = m.weight(*l.bias_ref);
      std::size_t C = x.shape[0], H = x.shape[1], W = x.shape[2], K = l.kernel, S = l.stride;
      std::size_t OH = (H - K) / S + 1, OW = (W - K) / S + 1, O = l.out_channels;
      y.shape = {O, OH, OW};
      y.v.assign(O * OH * OW, 0.0);
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t i = 0; i < OH; ++i)
          for (std::size_t j = 0; j < OW; ++j) {
            double acc = b.data()[o];
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t di = 0; di < K; ++di)
                for (std::size_t dj = 0; dj < K; ++dj)
                  acc += w.data()[((o * C + c) * K + di) * K + dj] * x.v[(c * H + i * S + di) * W + j * S + dj];
            y.v[(o * OH + i) * OW + j] = acc;
          }
      return y;
    }
    case LayerKind::relu:
      y = x;
      for (double& v : y.v) v = v > 0 ? v : 0;
      return y;
    case LayerKind::maxpool2d: {
      std::size_t C = x.shape[0], H = x.shape[1], W = x.shape[2], P = l.window;
      y.shape = {C, H / P, W / P};
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H / P; ++i)
          for (std::size_t j = 0; j < W / P; ++j) {
            double best = -INFINITY;
            for (std::size_t a = 0; a < P; ++a)
              for (std::size_t b = 0; b < P; ++b) best = std::max(best, x.v[(c * H + i * P + a) * W + j * P + b]);
            y.v.push_back(best);
          }
      return y;
    }
    case LayerKind::flatten:
      return {{x.v.size()}, x.v};
    case LayerKind::linear: {
      const FloatTensor& w = m.weight(*l.weight_ref);
      const FloatTensor& b = m.weight(*l.bias_ref);
      y.shape = {l.out_features};
      for (std::size_t o = 0; o < l.out_features; ++o) {
        double acc = b.data()[o];
        for (std::size_t i = 0; i < l.in_features; ++i) acc += w.data()[o * l.in_features + i] * x.v[i];
        y.v.push_back(acc);
      }
      return y;
    }
  }
  return y;
}

inline Dense float_model(const ModelGraph& m, const FloatTensor& input) {
  Dense x = from(input);
  for (const auto& l : m.layers) x = float_layer(m, l, x);
  return x;
}

// Round half away from zero of v / 2^s for s >= 0, evaluated in exact integers.
inline std::int64_t rdiv(__int128 v, int s) {
  if (s == 0) return static_cast<std::int64_t>(v);
  __int128 d = static_cast<__int128>(1) << s;
  __int128 mag = v < 0 ? -v : v;
  __int128 q = (mag + d / 2) / d;
  return static_cast<std::int64_t>(v < 0 ? -q : q);
}

inline std::int64_t quant(double v, int f) { return static_cast<std::int64_t>(std::llround(std::ldexp(v, f))); }

// Fixed-point semantics: activations and weights at scale f, bias at 2f,
// products accumulated exactly and rescaled back to f.
inline DenseInt int_layer(const ModelGraph& m, const slicewise::LayerSpec& l, const DenseInt& x, int f) {
  DenseInt y;
  auto qw = [&](const std::string& ref, std::size_t i, int s) { return quant(m.weight(ref).data()[i], s); };
  switch (l.kind) {
    case LayerKind::conv2d: {
      std::size_t C = x.shape[0], H = x.shape[1], W = x.shape[2], K = l.kernel, S = l.stride;
      std::size_t OH = (H - K) / S + 1, OW = (W - K) / S + 1, O = l.out_channels;
      y.shape = {O, OH, OW};
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t i = 0; i < OH; ++i)
          for (std::size_t j = 0; j < OW; ++j) {
            __int128 acc = qw(*l.bias_ref, o, 2 * f);
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t di = 0; di < K; ++di)
                for (std::size_t dj = 0; dj < K; ++dj)
                  acc += static_cast<__int128>(qw(*l.weight_ref, ((o * C + c) * K + di) * K + dj, f)) *
                         x.v[(c * H + i * S + di) * W + j * S + dj];
            y.v.push_back(rdiv(acc, f));
          }
      return y;
    }
    case LayerKind::relu:
      y = x;
      for (auto& v : y.v) v = v > 0 ? v : 0;
      return y;
    case LayerKind::maxpool2d: {
      std::size_t C = x.shape[0], H = x.shape[1], W = x.shape[2], P = l.window;
      y.shape = {C, H / P, W / P};
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H / P; ++i)
          for (std::size_t j = 0; j < W / P; ++j) {
            std::int64_t best = INT64_MIN;
            for (std::size_t a = 0; a < P; ++a)
              for (std::size_t b = 0; b < P; ++b) best = std::max(best, x.v[(c * H + i * P + a) * W + j * P + b]);
            y.v.push_back(best);
          }
      return y;
    }
    case LayerKind::flatten:
      return {{x.v.size()}, x.v};
    case LayerKind::linear: {
      y.shape = {l.out_features};
      for (std::size_t o = 0; o < l.out_features; ++o) {
        __int128 acc = qw(*l.bias_ref, o, 2 * f);
        for (std::size_t i = 0; i < l.in_features; ++i)
          acc += static_cast<__int128>(qw(*l.weight_ref, o * l.in_features + i, f)) * x.v[i];
        y.v.push_back(rdiv(acc, f));
      }
      return y;
    }
  }
  return y;
}

// Whole model at one global scale.
inline DenseInt int_model(const ModelGraph& m, const FloatTensor& input, int f) {
  DenseInt x{input.shape(), {}};
  for (double v : input.data()) x.v.push_back(quant(v, f));
  for (const auto& l : m.layers) x = int_layer(m, l, x, f);
  return x;
}

// Metric definitions evaluated term by term.
inline double d_p(const std::vector<double>& a, const std::vector<double>& b, int p) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(std::fabs(a[i] - b[i]), p);
  return s;
}

inline double tvd(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - q[i]);
  return s / 2;
}

// Jensen-Shannon as the mean KL divergence to the midpoint distribution.
inline double kl2(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += p[i] * (std::log(p[i]) - std::log(q[i])) / std::log(2.0);
  return s;
}

inline double jsd(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = (p[i] + q[i]) / 2;
  return kl2(p, m) / 2 + kl2(q, m) / 2;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  std::vector<double> e;
  double s = 0;
  for (double v : z) {
    e.push_back(std::exp(v - mx));
    s += e.back();
  }
  for (double& v : e) v /= s;
  return e;
}

}  // namespace oracle
