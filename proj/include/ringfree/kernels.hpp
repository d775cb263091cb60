#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ringfree::kernels {

/// Serial kernels are straightforward loops kept as the reference; Parallel
/// kernels are tiled, OpenMP-distributed and reduce over a fixed block
/// decomposition, so their results do not depend on the worker count.
enum class Exec { Serial, Parallel };

enum class Activation { Identity, Relu };

/// Arithmetic type of the fused network kernels.
enum class Precision { Single, Double };

/// Rows per reduction block of the parallel kernels.
inline constexpr std::size_t kReduceBlockRows = 4096;
/// Rows per GEMM tile inside a block.
inline constexpr std::size_t kTileRows = 256;

/// y = act(x * w + b); x is rows x in, w is in x out, all row-major.
void dense_forward(std::span<const double> x, std::span<const double> w,
                   std::span<const double> b, std::span<double> y, std::size_t rows,
                   std::size_t in, std::size_t out, Activation act, Exec exec);

/// Accumulates gradients of a dense layer given the upstream gradient gy of its
/// (post-activation) output y. gx may be empty to skip input gradients.
void dense_backward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> y, std::span<const double> gy,
                    std::span<double> gx, std::span<double> gw, std::span<double> gb,
                    std::size_t rows, std::size_t in, std::size_t out, Activation act, Exec exec);

/// Multilayer perceptron: layer l maps widths[l] -> widths[l+1] with ReLU on
/// every layer but the last, which is linear.
struct MlpView {
  std::span<const std::size_t> widths;
  std::span<const std::span<const double>> weights;  // widths[l] x widths[l+1]
  std::span<const std::span<const double>> biases;   // 1 x widths[l+1]
};

/// Length of the `hidden` buffer: rows times the sum of the hidden widths.
std::size_t mlp_hidden_size(const MlpView& net, std::size_t rows);

/// y = net(x). `hidden` receives every hidden layer's post-activation output,
/// layer after layer, each a rows x width block. Arithmetic runs in T (float
/// or double); inputs, outputs and parameters stay double.
template <class T>
void mlp_forward(const MlpView& net, std::span<const double> x, std::span<T> hidden,
                 std::span<double> y, std::size_t rows, Exec exec);

/// Accumulates input, weight and bias gradients of the whole network given the
/// output gradient gy. gx may be empty. Cross-block sums are taken in double.
template <class T>
void mlp_backward(const MlpView& net, std::span<const double> x, std::span<const T> hidden,
                  std::span<const double> gy, std::span<double> gx,
                  std::span<const std::span<double>> gw, std::span<const std::span<double>> gb,
                  std::size_t rows, Exec exec);

extern template void mlp_forward<float>(const MlpView&, std::span<const double>, std::span<float>,
                                        std::span<double>, std::size_t, Exec);
extern template void mlp_forward<double>(const MlpView&, std::span<const double>,
                                         std::span<double>, std::span<double>, std::size_t, Exec);
extern template void mlp_backward<float>(const MlpView&, std::span<const double>,
                                         std::span<const float>, std::span<const double>,
                                         std::span<double>, std::span<const std::span<double>>,
                                         std::span<const std::span<double>>, std::size_t, Exec);
extern template void mlp_backward<double>(const MlpView&, std::span<const double>,
                                          std::span<const double>, std::span<const double>,
                                          std::span<double>, std::span<const std::span<double>>,
                                          std::span<const std::span<double>>, std::size_t, Exec);

/// Sum with a fixed blocked order (Parallel) or left-to-right (Serial).
double sum(std::span<const double> v, Exec exec);

/// Number of OpenMP workers available (1 without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace ringfree::kernels
