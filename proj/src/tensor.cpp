#include "trialnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace trialnet {

namespace {

constexpr double kBceClamp = 1e-12;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

std::string two_shapes(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": incompatible shapes " + shape_str(a) + " vs " +
         shape_str(b);
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "}";
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

Tensor::Tensor(Shape s, double fill)
    : shape(std::move(s)), values(shape_numel(shape), fill) {
  require(!shape.empty(), "tensor rank must be >= 1");
  for (std::size_t d : shape) require(d > 0, "tensor dims must be positive");
}

Tensor::Tensor(Shape s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  require(!shape.empty(), "tensor rank must be >= 1");
  for (std::size_t d : shape) require(d > 0, "tensor dims must be positive");
  require(shape_numel(shape) == values.size(),
          "value count " + std::to_string(values.size()) +
              " does not match shape " + shape_str(shape));
}

double Tensor::scalar() const {
  require(is_scalar(), "scalar() on tensor of shape " + shape_str(shape));
  return values[0];
}

void Tensor::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() { grad.clear(); }

bool Tensor::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

TensorPtr make_tensor(Shape shape, std::vector<double> values,
                      bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(shape), std::move(values));
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr make_vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return make_tensor({n}, std::move(values), requires_grad);
}

TensorPtr make_scalar(double v, bool requires_grad) {
  return make_tensor({1}, {v}, requires_grad);
}

TensorPtr zeros(Shape shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(shape), 0.0);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr full(Shape shape, double value, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(shape), value);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr detach(const TensorPtr& t) {
  return make_tensor(t->shape, t->values, false);
}

void Tape::record(const TensorPtr& out, std::function<void()> back) {
  if (out->requires_grad) steps_.push_back(std::move(back));
}

void Tape::backward(const TensorPtr& loss) {
  require(loss->is_scalar(),
          "backward requires a scalar loss, got " + shape_str(loss->shape));
  if (!loss->requires_grad) return;
  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

void check_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) fail(two_shapes(op, a->shape, b->shape));
}

bool any_grad(const TensorPtr& a, const TensorPtr& b) {
  return a->requires_grad || b->requires_grad;
}

}  // namespace

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape("add", a, b);
  auto out = zeros(a->shape, any_grad(a, b));
  const std::size_t n = a->size();
  for (std::size_t i = 0; i < n; ++i)
    out->values[i] = a->values[i] + b->values[i];
  record(out, [a, b, out] {
    if (out->grad.empty()) return;
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[i];
    }
  });
  return out;
}

TensorPtr Tape::sub(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape("sub", a, b);
  auto out = zeros(a->shape, any_grad(a, b));
  const std::size_t n = a->size();
  for (std::size_t i = 0; i < n; ++i)
    out->values[i] = a->values[i] - b->values[i];
  record(out, [a, b, out] {
    if (out->grad.empty()) return;
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < b->size(); ++i) b->grad[i] -= out->grad[i];
    }
  });
  return out;
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape("mul", a, b);
  auto out = zeros(a->shape, any_grad(a, b));
  const std::size_t n = a->size();
  for (std::size_t i = 0; i < n; ++i)
    out->values[i] = a->values[i] * b->values[i];
  record(out, [a, b, out] {
    if (out->grad.empty()) return;
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i)
        a->grad[i] += out->grad[i] * b->values[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < b->size(); ++i)
        b->grad[i] += out->grad[i] * a->values[i];
    }
  });
  return out;
}

TensorPtr Tape::scale(const TensorPtr& x, double c) {
  auto out = zeros(x->shape, x->requires_grad);
  for (std::size_t i = 0; i < x->size(); ++i) out->values[i] = c * x->values[i];
  record(out, [x, out, c] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] += c * out->grad[i];
  });
  return out;
}

TensorPtr Tape::one_minus(const TensorPtr& x) {
  auto out = zeros(x->shape, x->requires_grad);
  for (std::size_t i = 0; i < x->size(); ++i)
    out->values[i] = 1.0 - x->values[i];
  record(out, [x, out] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] -= out->grad[i];
  });
  return out;
}

TensorPtr Tape::relu(const TensorPtr& x) {
  auto out = zeros(x->shape, x->requires_grad);
  for (std::size_t i = 0; i < x->size(); ++i)
    out->values[i] = x->values[i] > 0.0 ? x->values[i] : 0.0;
  record(out, [x, out] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < x->size(); ++i)
      if (x->values[i] > 0.0) x->grad[i] += out->grad[i];
  });
  return out;
}

TensorPtr Tape::sigmoid(const TensorPtr& x) {
  auto out = zeros(x->shape, x->requires_grad);
  for (std::size_t i = 0; i < x->size(); ++i) {
    const double v = x->values[i];
    // Evaluate via exp of a negative argument on both branches for stability.
    out->values[i] =
        v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                 : std::exp(v) / (1.0 + std::exp(v));
  }
  record(out, [x, out] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < x->size(); ++i) {
      const double s = out->values[i];
      x->grad[i] += out->grad[i] * s * (1.0 - s);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
  require(a->rank() == 2 && b->rank() == 2,
          two_shapes("matmul (rank-2 required)", a->shape, b->shape));
  if (a->cols() != b->rows())
    fail(two_shapes("matmul: inner dimensions differ", a->shape, b->shape));
  const std::size_t m = a->rows(), k = a->cols(), n = b->cols();
  auto out = zeros({m, n}, any_grad(a, b));
  const double* av = a->values.data();
  const double* bv = b->values.data();
  double* ov = out->values.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aik = av[i * k + p];
      const double* brow = bv + p * n;
      double* orow = ov + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  record(out, [a, b, out, m, k, n] {
    if (out->grad.empty()) return;
    const double* g = out->grad.data();
    if (a->requires_grad) {
      a->ensure_grad();
      double* ga = a->grad.data();
      const double* bv = b->values.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = g + i * n;
          const double* brow = bv + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      double* gb = b->grad.data();
      const double* av = a->values.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aik = av[i * k + p];
          double* gbrow = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
        }
      }
    }
  });
  return out;
}

TensorPtr Tape::matvec(const TensorPtr& w, const TensorPtr& x) {
  require(w->rank() == 2 && x->rank() == 1,
          two_shapes("matvec", w->shape, x->shape));
  if (w->cols() != x->size())
    fail(two_shapes("matvec: inner dimensions differ", w->shape, x->shape));
  const std::size_t m = w->rows(), k = w->cols();
  auto out = zeros({m}, any_grad(w, x));
  const double* wv = w->values.data();
  const double* xv = x->values.data();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double* wrow = wv + i * k;
    for (std::size_t j = 0; j < k; ++j) acc += wrow[j] * xv[j];
    out->values[i] = acc;
  }
  record(out, [w, x, out, m, k] {
    if (out->grad.empty()) return;
    const double* g = out->grad.data();
    if (w->requires_grad) {
      w->ensure_grad();
      double* gw = w->grad.data();
      const double* xv = x->values.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        double* grow = gw + i * k;
        for (std::size_t j = 0; j < k; ++j) grow[j] += gi * xv[j];
      }
    }
    if (x->requires_grad) {
      x->ensure_grad();
      double* gx = x->grad.data();
      const double* wv = w->values.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        const double* wrow = wv + i * k;
        for (std::size_t j = 0; j < k; ++j) gx[j] += gi * wrow[j];
      }
    }
  });
  return out;
}

TensorPtr Tape::vecmat(const TensorPtr& w, const TensorPtr& x) {
  require(w->rank() == 1 && x->rank() == 2,
          two_shapes("vecmat", w->shape, x->shape));
  if (w->size() != x->rows())
    fail(two_shapes("vecmat: row counts differ", w->shape, x->shape));
  const std::size_t n = x->rows(), d = x->cols();
  auto out = zeros({d}, any_grad(w, x));
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w->values[i];
    const double* xrow = x->values.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) out->values[j] += wi * xrow[j];
  }
  record(out, [w, x, out, n, d] {
    if (out->grad.empty()) return;
    const double* g = out->grad.data();
    if (w->requires_grad) {
      w->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* xrow = x->values.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) acc += g[j] * xrow[j];
        w->grad[i] += acc;
      }
    }
    if (x->requires_grad) {
      x->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double wi = w->values[i];
        double* grow = x->grad.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) grow[j] += wi * g[j];
      }
    }
  });
  return out;
}

TensorPtr Tape::add_row_bias(const TensorPtr& x, const TensorPtr& b) {
  require(x->rank() == 2 && b->rank() == 1,
          two_shapes("add_row_bias", x->shape, b->shape));
  if (x->cols() != b->size())
    fail(two_shapes("add_row_bias: width mismatch", x->shape, b->shape));
  const std::size_t n = x->rows(), d = x->cols();
  auto out = zeros({n, d}, any_grad(x, b));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out->values[i * d + j] = x->values[i * d + j] + b->values[j];
  record(out, [x, b, out, n, d] {
    if (out->grad.empty()) return;
    const double* g = out->grad.data();
    if (x->requires_grad) {
      x->ensure_grad();
      for (std::size_t i = 0; i < n * d; ++i) x->grad[i] += g[i];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) b->grad[j] += g[i * d + j];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Structure

TensorPtr Tape::concat(const std::vector<TensorPtr>& parts) {
  require(!parts.empty(), "concat: empty input list");
  std::size_t total = 0;
  bool rg = false;
  for (const auto& p : parts) {
    require(p->rank() == 1, "concat expects rank-1 parts, got " +
                                shape_str(p->shape));
    total += p->size();
    rg = rg || p->requires_grad;
  }
  auto out = zeros({total}, rg);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->values.begin(), p->values.end(), out->values.begin() + off);
    off += p->size();
  }
  record(out, [parts, out] {
    if (out->grad.empty()) return;
    std::size_t off = 0;
    for (const auto& p : parts) {
      if (p->requires_grad) {
        p->ensure_grad();
        for (std::size_t i = 0; i < p->size(); ++i)
          p->grad[i] += out->grad[off + i];
      }
      off += p->size();
    }
  });
  return out;
}

TensorPtr Tape::concat_cols(const TensorPtr& a, const TensorPtr& b) {
  require(a->rank() == 2 && b->rank() == 2 && a->rows() == b->rows(),
          two_shapes("concat_cols", a->shape, b->shape));
  const std::size_t n = a->rows(), p = a->cols(), q = b->cols();
  auto out = zeros({n, p + q}, any_grad(a, b));
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a->values.data() + i * p, p, out->values.data() + i * (p + q));
    std::copy_n(b->values.data() + i * q, q,
                out->values.data() + i * (p + q) + p);
  }
  record(out, [a, b, out, n, p, q] {
    if (out->grad.empty()) return;
    const double* g = out->grad.data();
    if (a->requires_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
          a->grad[i * p + j] += g[i * (p + q) + j];
    }
    if (b->requires_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j)
          b->grad[i * q + j] += g[i * (p + q) + p + j];
    }
  });
  return out;
}

TensorPtr Tape::stack_rows(const std::vector<TensorPtr>& rows) {
  require(!rows.empty(), "stack_rows: empty input list");
  const std::size_t d = rows.front()->size();
  bool rg = false;
  for (const auto& r : rows) {
    require(r->rank() == 1 && r->size() == d,
            "stack_rows: all rows must be rank-1 of equal length, got " +
                shape_str(r->shape));
    rg = rg || r->requires_grad;
  }
  auto out = zeros({rows.size(), d}, rg);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i]->values.begin(), rows[i]->values.end(),
              out->values.begin() + i * d);
  record(out, [rows, out, d] {
    if (out->grad.empty()) return;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i]->requires_grad) continue;
      rows[i]->ensure_grad();
      for (std::size_t j = 0; j < d; ++j)
        rows[i]->grad[j] += out->grad[i * d + j];
    }
  });
  return out;
}

TensorPtr Tape::row(const TensorPtr& x, std::size_t i) {
  require(x->rank() == 2, "row expects rank-2, got " + shape_str(x->shape));
  require(i < x->rows(), "row index " + std::to_string(i) +
                             " out of range for " + shape_str(x->shape));
  const std::size_t d = x->cols();
  auto out = zeros({d}, x->requires_grad);
  std::copy_n(x->values.data() + i * d, d, out->values.data());
  record(out, [x, out, i, d] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    for (std::size_t j = 0; j < d; ++j) x->grad[i * d + j] += out->grad[j];
  });
  return out;
}

TensorPtr Tape::gather_rows(const TensorPtr& x,
                            const std::vector<std::size_t>& indices) {
  require(x->rank() == 2, "gather_rows expects rank-2, got " +
                              shape_str(x->shape));
  require(!indices.empty(), "gather_rows: empty index list");
  const std::size_t d = x->cols();
  for (std::size_t i : indices)
    require(i < x->rows(), "gather_rows: index out of range");
  auto out = zeros({indices.size(), d}, x->requires_grad);
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy_n(x->values.data() + indices[r] * d, d,
                out->values.data() + r * d);
  auto idx = std::make_shared<std::vector<std::size_t>>(indices);
  record(out, [x, out, idx, d] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    for (std::size_t r = 0; r < idx->size(); ++r) {
      double* xrow = x->grad.data() + (*idx)[r] * d;
      const double* grow = out->grad.data() + r * d;
      for (std::size_t j = 0; j < d; ++j) xrow[j] += grow[j];
    }
  });
  return out;
}

TensorPtr Tape::reshape(const TensorPtr& x, Shape shape) {
  require(shape_numel(shape) == x->size(),
          "reshape: element count mismatch, " + shape_str(x->shape) + " -> " +
              shape_str(shape));
  auto out = make_tensor(std::move(shape), x->values, x->requires_grad);
  record(out, [x, out] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reductions

TensorPtr Tape::mean_rows(const TensorPtr& x) {
  require(x->rank() == 2, "mean_rows expects rank-2, got " +
                              shape_str(x->shape));
  const std::size_t n = x->rows(), d = x->cols();
  auto out = zeros({d}, x->requires_grad);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out->values[j] += x->values[i * d + j];
  for (std::size_t j = 0; j < d; ++j) out->values[j] /= static_cast<double>(n);
  record(out, [x, out, n, d] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        x->grad[i * d + j] += inv * out->grad[j];
  });
  return out;
}

TensorPtr Tape::max_rows(const TensorPtr& x) {
  require(x->rank() == 2, "max_rows expects rank-2, got " +
                              shape_str(x->shape));
  const std::size_t n = x->rows(), d = x->cols();
  auto out = zeros({d}, x->requires_grad);
  auto argmax = std::make_shared<std::vector<std::size_t>>(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    double best = x->values[j];
    std::size_t bi = 0;
    for (std::size_t i = 1; i < n; ++i) {
      const double v = x->values[i * d + j];
      if (v > best) {
        best = v;
        bi = i;
      }
    }
    out->values[j] = best;
    (*argmax)[j] = bi;
  }
  record(out, [x, out, argmax, d] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    for (std::size_t j = 0; j < d; ++j)
      x->grad[(*argmax)[j] * d + j] += out->grad[j];
  });
  return out;
}

TensorPtr Tape::sum_grouped_rows(const TensorPtr& x,
                                 const std::vector<std::size_t>& group,
                                 std::size_t n) {
  require(x->rank() == 2, "sum_grouped_rows expects rank-2, got " +
                              shape_str(x->shape));
  require(group.size() == x->rows(),
          "sum_grouped_rows: group list length " +
              std::to_string(group.size()) + " != row count " +
              std::to_string(x->rows()));
  require(n > 0, "sum_grouped_rows: group count must be positive");
  const std::size_t m = x->rows(), d = x->cols();
  for (std::size_t g : group)
    require(g < n, "sum_grouped_rows: group index out of range");
  auto out = zeros({n, d}, x->requires_grad);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out->values.data() + group[i] * d;
    const double* xrow = x->values.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) orow[j] += xrow[j];
  }
  auto groups = std::make_shared<std::vector<std::size_t>>(group);
  record(out, [x, out, groups, d] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < groups->size(); ++i) {
      const double* grow = out->grad.data() + (*groups)[i] * d;
      double* xrow = x->grad.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) xrow[j] += grow[j];
    }
  });
  return out;
}

TensorPtr Tape::sum(const TensorPtr& x) {
  auto out = zeros({1}, x->requires_grad);
  out->values[0] = std::accumulate(x->values.begin(), x->values.end(), 0.0);
  record(out, [x, out] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    const double g = out->grad[0];
    for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] += g;
  });
  return out;
}

TensorPtr Tape::softmax(const TensorPtr& x) {
  require(x->rank() == 1, "softmax expects rank-1, got " +
                              shape_str(x->shape));
  const std::size_t n = x->size();
  auto out = zeros({n}, x->requires_grad);
  const double mx = *std::max_element(x->values.begin(), x->values.end());
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out->values[i] = std::exp(x->values[i] - mx);
    z += out->values[i];
  }
  for (std::size_t i = 0; i < n; ++i) out->values[i] /= z;
  record(out, [x, out, n] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += out->grad[i] * out->values[i];
    for (std::size_t i = 0; i < n; ++i)
      x->grad[i] += out->values[i] * (out->grad[i] - dot);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Convolution

TensorPtr Tape::conv1d_max(const TensorPtr& x, const TensorPtr& w,
                           const TensorPtr& b, std::size_t kernel) {
  require(kernel >= 1, "conv1d_max: kernel size must be positive");
  require(x->rank() == 2, "conv1d_max input must be rank-2, got " +
                              shape_str(x->shape));
  require(w->rank() == 2 && b->rank() == 1,
          two_shapes("conv1d_max params", w->shape, b->shape));
  const std::size_t len = x->rows(), dim = x->cols(), ch = w->rows();
  require(w->cols() == kernel * dim,
          "conv1d_max: weight shape " + shape_str(w->shape) +
              " incompatible with kernel " + std::to_string(kernel) +
              " and input " + shape_str(x->shape));
  require(b->size() == ch, two_shapes("conv1d_max bias", w->shape, b->shape));

  const std::size_t padded = std::max(len, kernel);
  const std::size_t positions = padded - kernel + 1;
  auto out = zeros({ch}, any_grad(x, w) || b->requires_grad);
  auto argmax = std::make_shared<std::vector<std::size_t>>(ch, 0);

  for (std::size_t c = 0; c < ch; ++c) {
    const double* wrow = w->values.data() + c * kernel * dim;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bp = 0;
    for (std::size_t p = 0; p < positions; ++p) {
      double acc = b->values[c];
      // Rows at or beyond `len` are zero padding.
      const std::size_t klim = std::min(kernel, len > p ? len - p : 0);
      const double* xrow = x->values.data() + p * dim;
      for (std::size_t t = 0; t < klim * dim; ++t) acc += wrow[t] * xrow[t];
      if (acc > best) {
        best = acc;
        bp = p;
      }
    }
    out->values[c] = best;
    (*argmax)[c] = bp;
  }

  record(out, [x, w, b, out, argmax, kernel, len, dim, ch] {
    if (out->grad.empty()) return;
    for (std::size_t c = 0; c < ch; ++c) {
      const double g = out->grad[c];
      if (g == 0.0) continue;
      const std::size_t p = (*argmax)[c];
      const std::size_t klim = std::min(kernel, len > p ? len - p : 0);
      if (b->requires_grad) {
        b->ensure_grad();
        b->grad[c] += g;
      }
      if (w->requires_grad) {
        w->ensure_grad();
        double* gw = w->grad.data() + c * kernel * dim;
        const double* xrow = x->values.data() + p * dim;
        for (std::size_t t = 0; t < klim * dim; ++t) gw[t] += g * xrow[t];
      }
      if (x->requires_grad) {
        x->ensure_grad();
        const double* wrow = w->values.data() + c * kernel * dim;
        double* gx = x->grad.data() + p * dim;
        for (std::size_t t = 0; t < klim * dim; ++t) gx[t] += g * wrow[t];
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Dropout and losses

TensorPtr Tape::dropout(const TensorPtr& x, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must be in [0,1)");
  if (rate == 0.0) return x;
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(x->size());
  for (std::size_t i = 0; i < x->size(); ++i)
    (*mask)[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  auto out = zeros(x->shape, x->requires_grad);
  for (std::size_t i = 0; i < x->size(); ++i)
    out->values[i] = x->values[i] * (*mask)[i];
  record(out, [x, out, mask] {
    if (out->grad.empty()) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < x->size(); ++i)
      x->grad[i] += out->grad[i] * (*mask)[i];
  });
  return out;
}

TensorPtr Tape::bce_loss(const TensorPtr& y_hat, double y) {
  require(y_hat->is_scalar(),
          "bce_loss expects a scalar prediction, got " +
              shape_str(y_hat->shape));
  require(y == 0.0 || y == 1.0,
          "bce_loss label must be 0 or 1, got " + std::to_string(y));
  const double p =
      std::min(1.0 - kBceClamp, std::max(kBceClamp, y_hat->values[0]));
  auto out = zeros({1}, y_hat->requires_grad);
  out->values[0] = -y * std::log(p) - (1.0 - y) * std::log(1.0 - p);
  record(out, [y_hat, out, y, p] {
    if (out->grad.empty()) return;
    y_hat->ensure_grad();
    // Gradient evaluated at the clamped probability and passed straight
    // through; the clamp exists purely to keep log() finite.
    y_hat->grad[0] += out->grad[0] * (p - y) / (p * (1.0 - p));
  });
  return out;
}

TensorPtr Tape::mse_loss(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape("mse_loss", a, b);
  auto out = zeros({1}, any_grad(a, b));
  double acc = 0.0;
  for (std::size_t i = 0; i < a->size(); ++i) {
    const double d = a->values[i] - b->values[i];
    acc += d * d;
  }
  out->values[0] = acc;
  record(out, [a, b, out] {
    if (out->grad.empty()) return;
    const double g = out->grad[0];
    for (std::size_t i = 0; i < a->size(); ++i) {
      const double d = a->values[i] - b->values[i];
      if (a->requires_grad) {
        a->ensure_grad();
        a->grad[i] += 2.0 * g * d;
      }
      if (b->requires_grad) {
        b->ensure_grad();
        b->grad[i] -= 2.0 * g * d;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference checking

GradCheckReport grad_check(
    const std::function<TensorPtr(Tape&, const std::vector<TensorPtr>&)>& f,
    const std::vector<TensorPtr>& inputs, double eps,
    std::size_t max_coords_per_input, std::uint64_t sample_seed) {
  require(eps >= 1e-7 && eps <= 1e-3, "grad_check eps must be in [1e-7,1e-3]");

  for (const auto& in : inputs) in->zero_grad();
  Tape tape;
  TensorPtr out = f(tape, inputs);
  require(out->is_scalar(), "grad_check requires a scalar-valued function");
  tape.backward(out);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& in : inputs) {
    analytic.push_back(in->grad.empty() ? std::vector<double>(in->size(), 0.0)
                                        : in->grad);
    in->zero_grad();
  }

  const auto eval = [&](void) -> double {
    Tape t;
    TensorPtr o = f(t, inputs);
    double v = o->scalar();
    for (const auto& in : inputs) in->zero_grad();
    return v;
  };

  GradCheckReport report;
  Rng rng(sample_seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto& in = inputs[k];
    if (!in->requires_grad) continue;
    std::vector<std::size_t> coords;
    if (in->size() <= max_coords_per_input) {
      coords.resize(in->size());
      for (std::size_t i = 0; i < in->size(); ++i) coords[i] = i;
    } else {
      for (std::size_t i = 0; i < max_coords_per_input; ++i)
        coords.push_back(rng.below(in->size()));
    }
    for (std::size_t c : coords) {
      const double saved = in->values[c];
      in->values[c] = saved + eps;
      const double fp = eval();
      in->values[c] = saved - eps;
      const double fm = eval();
      in->values[c] = saved;
      const double fd = (fp - fm) / (2.0 * eps);
      const double a = analytic[k][c];
      const double denom = std::max({std::fabs(a), std::fabs(fd), 1e-3});
      report.max_rel_error =
          std::max(report.max_rel_error, std::fabs(a - fd) / denom);
      ++report.coords_checked;
    }
  }
  return report;
}

}  // namespace trialnet
