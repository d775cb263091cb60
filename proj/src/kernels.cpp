#include "ringfree/kernels.hpp"

#include <algorithm>
#include <vector>

#include <omp.h>

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

namespace ringfree::kernels {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
using VecMapC = Eigen::Map<const Eigen::RowVectorXd>;

std::size_t n_blocks(std::size_t rows) { return (rows + kReduceBlockRows - 1) / kReduceBlockRows; }

void forward_serial(std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y, std::size_t rows,
                    std::size_t in, std::size_t out, Activation act) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t k = 0; k < in; ++k) acc += x[r * in + k] * w[k * out + o];
      acc += b[o];
      y[r * out + o] = (act == Activation::Relu && !(acc > 0.0)) ? 0.0 : acc;
    }
  }
}

void forward_parallel(std::span<const double> x, std::span<const double> w,
                      std::span<const double> b, std::span<double> y, std::size_t rows,
                      std::size_t in, std::size_t out, Activation act) {
  const MapC wm(w.data(), in, out);
  const VecMapC bv(b.data(), out);
  const auto tiles = static_cast<std::ptrdiff_t>((rows + kTileRows - 1) / kTileRows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < tiles; ++t) {
    const std::size_t r0 = static_cast<std::size_t>(t) * kTileRows;
    const std::size_t nr = std::min(kTileRows, rows - r0);
    const MapC xt(x.data() + r0 * in, nr, in);
    Map yt(y.data() + r0 * out, nr, out);
    yt.noalias() = xt * wm;
    yt.rowwise() += bv;
    if (act == Activation::Relu) yt = yt.cwiseMax(0.0);
  }
}

// Masked upstream gradient for one tile: g' = gy * relu'(z), with relu'(0) = 0.
void masked_grad(const double* gy, const double* y, double* g, std::size_t n, Activation act) {
  if (act == Activation::Relu) {
    for (std::size_t k = 0; k < n; ++k) g[k] = y[k] > 0.0 ? gy[k] : 0.0;
  } else {
    std::copy(gy, gy + n, g);
  }
}

void backward_serial(std::span<const double> x, std::span<const double> w,
                     std::span<const double> y, std::span<const double> gy,
                     std::span<double> gx, std::span<double> gw, std::span<double> gb,
                     std::size_t rows, std::size_t in, std::size_t out, Activation act) {
  std::vector<double> g(rows * out);
  masked_grad(gy.data(), y.data(), g.data(), g.size(), act);
  if (!gx.empty()) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < in; ++k) {
        double acc = 0.0;
        for (std::size_t o = 0; o < out; ++o) acc += g[r * out + o] * w[k * out + o];
        gx[r * in + k] += acc;
      }
    }
  }
  for (std::size_t k = 0; k < in; ++k) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r) acc += x[r * in + k] * g[r * out + o];
      gw[k * out + o] += acc;
    }
  }
  for (std::size_t o = 0; o < out; ++o) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += g[r * out + o];
    gb[o] += acc;
  }
}

void backward_parallel(std::span<const double> x, std::span<const double> w,
                       std::span<const double> y, std::span<const double> gy,
                       std::span<double> gx, std::span<double> gw, std::span<double> gb,
                       std::size_t rows, std::size_t in, std::size_t out, Activation act) {
  const MapC wm(w.data(), in, out);
  const std::size_t blocks = n_blocks(rows);
  std::vector<double> part_w(blocks * in * out, 0.0);
  std::vector<double> part_b(blocks * out, 0.0);
#pragma omp parallel
  {
    std::vector<double> g(kTileRows * out);
#pragma omp for schedule(static)
    for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(blocks); ++blk) {
      const std::size_t b0 = static_cast<std::size_t>(blk) * kReduceBlockRows;
      const std::size_t b1 = std::min(rows, b0 + kReduceBlockRows);
      Map pw(part_w.data() + static_cast<std::size_t>(blk) * in * out, in, out);
      Eigen::Map<Eigen::RowVectorXd> pb(part_b.data() + static_cast<std::size_t>(blk) * out, out);
      for (std::size_t r0 = b0; r0 < b1; r0 += kTileRows) {
        const std::size_t nr = std::min(kTileRows, b1 - r0);
        masked_grad(gy.data() + r0 * out, y.data() + r0 * out, g.data(), nr * out, act);
        const MapC gt(g.data(), nr, out);
        const MapC xt(x.data() + r0 * in, nr, in);
        if (!gx.empty()) {
          Map gxt(gx.data() + r0 * in, nr, in);
          gxt.noalias() += gt * wm.transpose();
        }
        pw.noalias() += xt.transpose() * gt;
        pb += gt.colwise().sum();
      }
    }
  }
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    for (std::size_t k = 0; k < in * out; ++k) gw[k] += part_w[blk * in * out + k];
    for (std::size_t o = 0; o < out; ++o) gb[o] += part_b[blk * out + o];
  }
}

}  // namespace

void dense_forward(std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y, std::size_t rows,
                   std::size_t in, std::size_t out, Activation act, Exec exec) {
  if (exec == Exec::Serial) {
    forward_serial(x, w, b, y, rows, in, out, act);
  } else {
    forward_parallel(x, w, b, y, rows, in, out, act);
  }
}

void dense_backward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> y, std::span<const double> gy,
                    std::span<double> gx, std::span<double> gw, std::span<double> gb,
                    std::size_t rows, std::size_t in, std::size_t out, Activation act, Exec exec) {
  if (exec == Exec::Serial) {
    backward_serial(x, w, y, gy, gx, gw, gb, rows, in, out, act);
  } else {
    backward_parallel(x, w, y, gy, gx, gw, gb, rows, in, out, act);
  }
}

std::size_t mlp_hidden_size(const MlpView& net, std::size_t rows) {
  std::size_t w = 0;
  for (std::size_t l = 1; l + 1 < net.widths.size(); ++l) w += net.widths[l];
  return w * rows;
}

namespace {

std::size_t layers_of(const MlpView& net) { return net.widths.size() - 1; }

bool is_relu(const MlpView& net, std::size_t l) { return l + 1 < layers_of(net); }

/// Offsets of each hidden layer's block inside `hidden`, per row.
std::vector<std::size_t> hidden_offsets(const MlpView& net) {
  std::vector<std::size_t> off(layers_of(net), 0);
  for (std::size_t l = 1; l < off.size(); ++l) off[l] = off[l - 1] + net.widths[l];
  return off;
}

template <class T>
std::vector<std::vector<T>> cast_all(std::span<const std::span<const double>> v) {
  std::vector<std::vector<T>> out;
  for (auto s : v) out.emplace_back(s.begin(), s.end());
  return out;
}

template <class T>
void mlp_forward_serial(const MlpView& net, std::span<const double> x, std::span<T> hidden,
                        std::span<double> y, std::size_t rows) {
  const auto off = hidden_offsets(net);
  const std::size_t layers = layers_of(net);
  const auto w = cast_all<T>(net.weights), b = cast_all<T>(net.biases);
  std::vector<T> in(x.begin(), x.end()), out;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t wi = net.widths[l], wo = net.widths[l + 1];
    out.assign(rows * wo, T(0));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < wo; ++o) {
        T acc = 0;
        for (std::size_t k = 0; k < wi; ++k) acc += in[r * wi + k] * w[l][k * wo + o];
        acc += b[l][o];
        out[r * wo + o] = (is_relu(net, l) && !(acc > T(0))) ? T(0) : acc;
      }
    }
    if (is_relu(net, l)) {
      std::copy(out.begin(), out.end(), hidden.begin() + static_cast<std::ptrdiff_t>(off[l] * rows));
    } else {
      std::copy(out.begin(), out.end(), y.begin());
    }
    in.swap(out);
  }
}

template <class T>
void mlp_backward_serial(const MlpView& net, std::span<const double> x, std::span<const T> hidden,
                         std::span<const double> gy, std::span<double> gx,
                         std::span<const std::span<double>> gw,
                         std::span<const std::span<double>> gb, std::size_t rows) {
  const auto off = hidden_offsets(net);
  const std::size_t layers = layers_of(net);
  const auto w = cast_all<T>(net.weights);
  const std::vector<T> xt(x.begin(), x.end());
  std::vector<T> g(gy.begin(), gy.end()), gin;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t wi = net.widths[l], wo = net.widths[l + 1];
    const T* in = l == 0 ? xt.data() : hidden.data() + off[l - 1] * rows;
    for (std::size_t k = 0; k < wi; ++k) {
      for (std::size_t o = 0; o < wo; ++o) {
        T acc = 0;
        for (std::size_t r = 0; r < rows; ++r) acc += in[r * wi + k] * g[r * wo + o];
        gw[l][k * wo + o] += static_cast<double>(acc);
      }
    }
    for (std::size_t o = 0; o < wo; ++o) {
      T acc = 0;
      for (std::size_t r = 0; r < rows; ++r) acc += g[r * wo + o];
      gb[l][o] += static_cast<double>(acc);
    }
    if (l == 0 && gx.empty()) break;
    gin.assign(rows * wi, T(0));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < wi; ++k) {
        T acc = 0;
        for (std::size_t o = 0; o < wo; ++o) acc += g[r * wo + o] * w[l][k * wo + o];
        // The input of layer l > 0 is a ReLU output; relu'(0) = 0.
        gin[r * wi + k] = (l > 0 && !(in[r * wi + k] > T(0))) ? T(0) : acc;
      }
    }
    if (l == 0) {
      for (std::size_t k = 0; k < gin.size(); ++k) gx[k] += static_cast<double>(gin[k]);
    }
    g.swap(gin);
  }
}

template <class T>
using TMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
void mlp_forward_parallel(const MlpView& net, std::span<const double> x, std::span<T> hidden,
                          std::span<double> y, std::size_t rows) {
  using Mat = TMat<T>;
  const auto off = hidden_offsets(net);
  const std::size_t layers = layers_of(net);
  std::vector<Mat> w;
  std::vector<Eigen::Matrix<T, 1, Eigen::Dynamic>> b;
  for (std::size_t l = 0; l < layers; ++l) {
    w.push_back(MapC(net.weights[l].data(), net.widths[l], net.widths[l + 1]).cast<T>());
    b.push_back(VecMapC(net.biases[l].data(), net.widths[l + 1]).cast<T>());
  }
  const std::size_t w0 = net.widths[0];
  const auto tiles = static_cast<std::ptrdiff_t>((rows + kTileRows - 1) / kTileRows);
#pragma omp parallel
  {
    Mat xin(kTileRows, w0), last(kTileRows, net.widths[layers]);
#pragma omp for schedule(static)
    for (std::ptrdiff_t t = 0; t < tiles; ++t) {
      const std::size_t r0 = static_cast<std::size_t>(t) * kTileRows;
      const std::size_t nr = std::min(kTileRows, rows - r0);
      auto xt = xin.topRows(static_cast<Eigen::Index>(nr));
      xt = MapC(x.data() + r0 * w0, nr, w0).cast<T>();
      const T* in = xin.data();
      for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t wi = net.widths[l], wo = net.widths[l + 1];
        T* out = is_relu(net, l) ? hidden.data() + off[l] * rows + r0 * wo : last.data();
        Eigen::Map<Mat> yt(out, nr, wo);
        yt.noalias() = Eigen::Map<const Mat>(in, nr, wi) * w[l];
        yt.rowwise() += b[l];
        if (is_relu(net, l)) yt = yt.cwiseMax(T(0));
        in = out;
      }
      const std::size_t wl = net.widths[layers];
      Map(y.data() + r0 * wl, nr, wl) =
          Eigen::Map<const Mat>(last.data(), nr, wl).template cast<double>();
    }
  }
}

template <class T>
void mlp_backward_parallel(const MlpView& net, std::span<const double> x,
                           std::span<const T> hidden, std::span<const double> gy,
                           std::span<double> gx, std::span<const std::span<double>> gw,
                           std::span<const std::span<double>> gb, std::size_t rows) {
  using Mat = TMat<T>;
  using Row = Eigen::Matrix<T, 1, Eigen::Dynamic>;
  const auto off = hidden_offsets(net);
  const std::size_t layers = layers_of(net);
  std::vector<Mat> w;
  std::vector<std::size_t> woff(layers + 1, 0), boff(layers + 1, 0);
  std::size_t max_w = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    w.push_back(MapC(net.weights[l].data(), net.widths[l], net.widths[l + 1]).cast<T>());
    woff[l + 1] = woff[l] + net.widths[l] * net.widths[l + 1];
    boff[l + 1] = boff[l] + net.widths[l + 1];
    max_w = std::max(max_w, std::max(net.widths[l], net.widths[l + 1]));
  }
  const std::size_t w0 = net.widths[0], wl = net.widths[layers];
  const std::size_t blocks = n_blocks(rows);
  std::vector<double> part_w(blocks * woff[layers], 0.0);
  std::vector<double> part_b(blocks * boff[layers], 0.0);
#pragma omp parallel
  {
    Mat ga(kTileRows, max_w), gn(kTileRows, max_w), xin(kTileRows, w0);
    std::vector<Mat> bw;
    std::vector<Row> bb;
    for (std::size_t l = 0; l < layers; ++l) {
      bw.emplace_back(net.widths[l], net.widths[l + 1]);
      bb.emplace_back(net.widths[l + 1]);
    }
#pragma omp for schedule(static)
    for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(blocks); ++blk) {
      const auto bi = static_cast<std::size_t>(blk);
      const std::size_t b0 = bi * kReduceBlockRows;
      const std::size_t b1 = std::min(rows, b0 + kReduceBlockRows);
      for (std::size_t l = 0; l < layers; ++l) {
        bw[l].setZero();
        bb[l].setZero();
      }
      for (std::size_t r0 = b0; r0 < b1; r0 += kTileRows) {
        const std::size_t nr = std::min(kTileRows, b1 - r0);
        const auto n = static_cast<Eigen::Index>(nr);
        Eigen::Map<Mat>(ga.data(), nr, wl) = MapC(gy.data() + r0 * wl, nr, wl).cast<T>();
        Eigen::Map<Mat>(xin.data(), nr, w0) = MapC(x.data() + r0 * w0, nr, w0).cast<T>();
        T* g = ga.data();
        T* next = gn.data();
        for (std::size_t l = layers; l-- > 0;) {
          const std::size_t wi = net.widths[l], wo = net.widths[l + 1];
          const T* in = l == 0 ? xin.data() : hidden.data() + off[l - 1] * rows + r0 * wi;
          const Eigen::Map<const Mat> gt(g, n, static_cast<Eigen::Index>(wo));
          const Eigen::Map<const Mat> it(in, n, static_cast<Eigen::Index>(wi));
          bw[l].noalias() += it.transpose() * gt;
          bb[l] += gt.colwise().sum();
          if (l > 0) {
            Eigen::Map<Mat> gnt(next, n, static_cast<Eigen::Index>(wi));
            gnt.noalias() = gt * w[l].transpose();
            // The input of layer l > 0 is a ReLU output; relu'(0) = 0.
            for (std::size_t k = 0; k < nr * wi; ++k) {
              if (!(in[k] > T(0))) next[k] = T(0);
            }
            std::swap(g, next);
          } else if (!gx.empty()) {
            Map(gx.data() + r0 * wi, nr, wi) += (gt * w[l].transpose()).template cast<double>();
          }
        }
      }
      for (std::size_t l = 0; l < layers; ++l) {
        Map(part_w.data() + bi * woff[layers] + woff[l], net.widths[l], net.widths[l + 1]) =
            bw[l].template cast<double>();
        Eigen::Map<Eigen::RowVectorXd>(part_b.data() + bi * boff[layers] + boff[l],
                                       static_cast<Eigen::Index>(net.widths[l + 1])) =
            bb[l].template cast<double>();
      }
    }
  }
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    for (std::size_t l = 0; l < layers; ++l) {
      const double* pw = part_w.data() + blk * woff[layers] + woff[l];
      const double* pb = part_b.data() + blk * boff[layers] + boff[l];
      for (std::size_t k = 0; k < gw[l].size(); ++k) gw[l][k] += pw[k];
      for (std::size_t k = 0; k < gb[l].size(); ++k) gb[l][k] += pb[k];
    }
  }
}

}  // namespace

template <class T>
void mlp_forward(const MlpView& net, std::span<const double> x, std::span<T> hidden,
                 std::span<double> y, std::size_t rows, Exec exec) {
  if (exec == Exec::Serial) {
    mlp_forward_serial<T>(net, x, hidden, y, rows);
  } else {
    mlp_forward_parallel<T>(net, x, hidden, y, rows);
  }
}

template <class T>
void mlp_backward(const MlpView& net, std::span<const double> x, std::span<const T> hidden,
                  std::span<const double> gy, std::span<double> gx,
                  std::span<const std::span<double>> gw, std::span<const std::span<double>> gb,
                  std::size_t rows, Exec exec) {
  if (exec == Exec::Serial) {
    mlp_backward_serial<T>(net, x, hidden, gy, gx, gw, gb, rows);
  } else {
    mlp_backward_parallel<T>(net, x, hidden, gy, gx, gw, gb, rows);
  }
}

template void mlp_forward<float>(const MlpView&, std::span<const double>, std::span<float>,
                                 std::span<double>, std::size_t, Exec);
template void mlp_forward<double>(const MlpView&, std::span<const double>, std::span<double>,
                                  std::span<double>, std::size_t, Exec);
template void mlp_backward<float>(const MlpView&, std::span<const double>, std::span<const float>,
                                  std::span<const double>, std::span<double>,
                                  std::span<const std::span<double>>,
                                  std::span<const std::span<double>>, std::size_t, Exec);
template void mlp_backward<double>(const MlpView&, std::span<const double>,
                                   std::span<const double>, std::span<const double>,
                                   std::span<double>, std::span<const std::span<double>>,
                                   std::span<const std::span<double>>, std::size_t, Exec);

double sum(std::span<const double> v, Exec exec) {
  if (exec == Exec::Serial) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
  }
  const std::size_t blocks = n_blocks(v.size());
  std::vector<double> part(blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(blocks); ++blk) {
    const std::size_t b0 = static_cast<std::size_t>(blk) * kReduceBlockRows;
    const std::size_t b1 = std::min(v.size(), b0 + kReduceBlockRows);
    double acc = 0.0;
    for (std::size_t k = b0; k < b1; ++k) acc += v[k];
    part[static_cast<std::size_t>(blk)] = acc;
  }
  double acc = 0.0;
  for (double p : part) acc += p;
  return acc;
}

int max_threads() { return omp_get_max_threads(); }
void set_threads(int n) { omp_set_num_threads(std::max(1, n)); }

}  // namespace ringfree::kernels
