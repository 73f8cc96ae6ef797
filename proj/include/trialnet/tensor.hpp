#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "trialnet/random.hpp"

namespace trialnet {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

/// Dense row-major tensor of 64-bit reals. `grad`, once allocated, always
/// matches `values` in length. Gradients accumulate across backward passes
/// until explicitly zeroed.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(Shape s, double fill);
  Tensor(Shape s, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }
  bool is_scalar() const { return size() == 1; }
  double scalar() const;

  void ensure_grad();
  void zero_grad();
  bool all_finite() const;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(Shape shape, std::vector<double> values,
                      bool requires_grad = false);
TensorPtr make_vector(std::vector<double> values, bool requires_grad = false);
TensorPtr make_scalar(double v, bool requires_grad = false);
TensorPtr zeros(Shape shape, bool requires_grad = false);
TensorPtr full(Shape shape, double value, bool requires_grad = false);

/// Value copy detached from gradient propagation.
TensorPtr detach(const TensorPtr& t);

/// Reverse-mode gradient tape. Every operation computes its output eagerly
/// and, when the output requires a gradient, appends its backward rule.
/// `backward` replays the rules last-to-first, so each tensor's gradient is
/// complete before the op that produced it propagates further.
///
/// A tape instance is single-threaded; one forward pass plus one backward
/// pass per instance is the intended use.
class Tape {
 public:
  // Elementwise (shapes must match exactly; no broadcasting).
  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
  TensorPtr scale(const TensorPtr& x, double c);
  TensorPtr one_minus(const TensorPtr& x);
  TensorPtr relu(const TensorPtr& x);
  TensorPtr sigmoid(const TensorPtr& x);

  // Linear algebra.
  TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
  /// w: {m,k}, x: {k} -> {m}
  TensorPtr matvec(const TensorPtr& w, const TensorPtr& x);
  /// w: {n}, x: {n,d} -> {d}; weighted sum of rows.
  TensorPtr vecmat(const TensorPtr& w, const TensorPtr& x);
  /// x: {n,d}, b: {d} -> {n,d}; adds b to every row.
  TensorPtr add_row_bias(const TensorPtr& x, const TensorPtr& b);

  // Structure.
  TensorPtr concat(const std::vector<TensorPtr>& parts);  // rank-1 inputs
  TensorPtr concat_cols(const TensorPtr& a, const TensorPtr& b);
  TensorPtr stack_rows(const std::vector<TensorPtr>& rows);
  TensorPtr row(const TensorPtr& x, std::size_t i);
  /// x: {n,d}, indices in [0,n) -> {m,d}; repeated indices allowed.
  TensorPtr gather_rows(const TensorPtr& x,
                        const std::vector<std::size_t>& indices);
  TensorPtr reshape(const TensorPtr& x, Shape shape);

  // Reductions over axis 0 of a {n,d} tensor.
  TensorPtr mean_rows(const TensorPtr& x);
  TensorPtr max_rows(const TensorPtr& x);
  /// x: {m,d}, group[i] in [0,n) -> {n,d}; per-group row sums.
  TensorPtr sum_grouped_rows(const TensorPtr& x,
                             const std::vector<std::size_t>& group,
                             std::size_t n);
  TensorPtr sum(const TensorPtr& x);  // -> {1}

  TensorPtr softmax(const TensorPtr& x);  // rank-1, max-subtracted

  /// x: {len,dim}, w: {channels, kernel*dim}, b: {channels} -> {channels}.
  /// 1-D convolution along axis 0 followed by max-pooling over positions.
  /// Inputs shorter than the kernel are zero-padded to one position.
  TensorPtr conv1d_max(const TensorPtr& x, const TensorPtr& w,
                       const TensorPtr& b, std::size_t kernel);

  /// Inverted dropout; rate in [0,1). Identity when rate == 0.
  TensorPtr dropout(const TensorPtr& x, double rate, Rng& rng);

  /// y must be exactly 0 or 1; y_hat is clamped to [1e-12, 1-1e-12].
  TensorPtr bce_loss(const TensorPtr& y_hat, double y);
  /// Sum of squared differences.
  TensorPtr mse_loss(const TensorPtr& a, const TensorPtr& b);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
  void backward(const TensorPtr& loss);

  std::size_t num_ops() const { return steps_.size(); }
  void clear() { steps_.clear(); }

 private:
  void record(const TensorPtr& out, std::function<void()> back);
  std::vector<std::function<void()>> steps_;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

/// Central-difference check of tape gradients for a scalar-valued function
/// of the given inputs. When an input has more coordinates than
/// `max_coords_per_input`, a deterministic sample of coordinates is checked.
/// Relative error uses the floor max(|analytic|, |numeric|, 1e-3) so that
/// near-zero gradient pairs do not register spurious error.
GradCheckReport grad_check(
    const std::function<TensorPtr(Tape&, const std::vector<TensorPtr>&)>& f,
    const std::vector<TensorPtr>& inputs, double eps,
    std::size_t max_coords_per_input = static_cast<std::size_t>(-1),
    std::uint64_t sample_seed = 17);

}  // namespace trialnet
