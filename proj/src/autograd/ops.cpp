// Copyright 2026 The Prefix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prefix/autograd/ops.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "prefix/common/error.hpp"

namespace prefix::ag {

namespace {

std::string shape_str(const Tensor& t) {
  return "(" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ")";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

Node& in(Node& n, std::size_t i) { return *n.inputs[i]; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix out = a.value() * b.value();
  return Tensor::from_op(std::move(out), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate(x.value.transpose() * n.grad);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_str(a) + " * " + shape_str(b) + "^T");
  }
  Matrix out = a.value() * b.value().transpose();
  return Tensor::from_op(std::move(out), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * y.value);
    if (y.requires_grad) y.accumulate(n.grad.transpose() * x.value);
  });
}

Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  return Tensor::from_op(std::move(out), {a},
                         [](Node& n) { in(n, 0).accumulate(n.grad.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  return Tensor::from_op(std::move(out), {a, b}, [](Node& n) {
    in(n, 0).accumulate(n.grad);
    in(n, 1).accumulate(n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  return Tensor::from_op(std::move(out), {a, b}, [](Node& n) {
    in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(-n.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return Tensor::from_op(std::move(out), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.accumulate(n.grad.cwiseProduct(x.value));
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: " + shape_str(a) + " + " + shape_str(row));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return Tensor::from_op(std::move(out), {a, row}, [](Node& n) {
    in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(n.grad.colwise().sum());
  });
}

Tensor scale(const Tensor& a, double s) {
  Matrix out = a.value() * s;
  return Tensor::from_op(std::move(out), {a}, [s](Node& n) { in(n, 0).accumulate(n.grad * s); });
}

Tensor relu(const Tensor& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return Tensor::from_op(std::move(out), {a}, [](Node& n) {
    Node& x = in(n, 0);
    x.accumulate((x.value.array() > 0.0).cast<double>().matrix().cwiseProduct(n.grad));
  });
}

Tensor gelu(const Tensor& a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v)));
  }
  return Tensor::from_op(std::move(out), {a}, [](Node& n) {
    Node& xn = in(n, 0);
    Matrix g(xn.value.rows(), xn.value.cols());
    for (Index i = 0; i < g.size(); ++i) {
      const double v = xn.value.data()[i];
      const double t = std::tanh(kC * (v + kA * v * v * v));
      const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * v * v);
      g.data()[i] = d * n.grad.data()[i];
    }
    xn.accumulate(g);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Index d = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
    throw ShapeError("layer_norm: affine parameters do not match width " + std::to_string(d));
  }
  const Matrix& xv = x.value();
  Matrix xhat(xv.rows(), d);
  RowVector inv_std(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const auto centered = xv.row(r).array() - mu;
    const double var = centered.square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (centered * inv_std(r)).matrix();
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  return Tensor::from_op(std::move(out), {x, gamma, beta},
                         [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
                           Node& xn = in(n, 0);
                           Node& gn = in(n, 1);
                           Node& bn = in(n, 2);
                           const Index d = xhat.cols();
                           if (gn.requires_grad) {
                             gn.accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
                           }
                           if (bn.requires_grad) bn.accumulate(n.grad.colwise().sum());
                           if (xn.requires_grad) {
                             Matrix dxhat = (n.grad.array().rowwise() * gn.value.row(0).array()).matrix();
                             Matrix dx(xhat.rows(), d);
                             for (Index r = 0; r < xhat.rows(); ++r) {
                               const double s1 = dxhat.row(r).sum();
                               const double s2 = dxhat.row(r).dot(xhat.row(r));
                               dx.row(r) = (inv_std(r) / static_cast<double>(d)) *
                                           (static_cast<double>(d) * dxhat.row(r).array() - s1 -
                                            xhat.row(r).array() * s2)
                                               .matrix();
                             }
                             xn.accumulate(dx);
                           }
                         });
}

namespace {

Matrix softmax_values(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    if (!std::isfinite(mx)) throw LossError("softmax: row without a finite entry");
    auto e = (logits.row(r).array() - mx).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

Tensor softmax_from_logits(const Tensor& x, Matrix logits) {
  Matrix out = softmax_values(logits);
  return Tensor::from_op(out, {x}, [y = out](Node& n) {
    Matrix g(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const double dot = n.grad.row(r).dot(y.row(r));
      g.row(r) = y.row(r).cwiseProduct((n.grad.row(r).array() - dot).matrix());
    }
    in(n, 0).accumulate(g);
  });
}

}  // namespace

Tensor softmax_rows(const Tensor& x) { return softmax_from_logits(x, x.value()); }

Tensor softmax_rows(const Tensor& x, const Matrix& additive_mask) {
  if (additive_mask.rows() != x.rows() || additive_mask.cols() != x.cols()) {
    throw ShapeError("softmax_rows: mask shape mismatch");
  }
  return softmax_from_logits(x, x.value() + additive_mask);
}

Tensor slice_rows(const Tensor& x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.rows()) {
    throw ShapeError("slice_rows: range out of bounds for " + shape_str(x));
  }
  Matrix out = x.value().middleRows(start, count);
  return Tensor::from_op(std::move(out), {x}, [start, count](Node& n) {
    Node& xn = in(n, 0);
    Matrix g = Matrix::Zero(xn.value.rows(), xn.value.cols());
    g.middleRows(start, count) = n.grad;
    xn.accumulate(g);
  });
}

Tensor slice_cols(const Tensor& x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw ShapeError("slice_cols: range out of bounds for " + shape_str(x));
  }
  Matrix out = x.value().middleCols(start, count);
  return Tensor::from_op(std::move(out), {x}, [start, count](Node& n) {
    Node& xn = in(n, 0);
    Matrix g = Matrix::Zero(xn.value.rows(), xn.value.cols());
    g.middleCols(start, count) = n.grad;
    xn.accumulate(g);
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return Tensor::from_op(std::move(out), parts, [](Node& n) {
    Index at = 0;
    for (auto& p : n.inputs) {
      const Index r = p->value.rows();
      if (p->requires_grad) p->accumulate(n.grad.middleRows(at, r));
      at += r;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return Tensor::from_op(std::move(out), parts, [](Node& n) {
    Index at = 0;
    for (auto& p : n.inputs) {
      const Index c = p->value.cols();
      if (p->requires_grad) p->accumulate(n.grad.middleCols(at, c));
      at += c;
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  const Index vocab = table.rows();
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab) {
      throw IndexError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(vocab) + " rows");
    }
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  return Tensor::from_op(std::move(out), {table},
                         [ids = std::vector<int>(ids.begin(), ids.end())](Node& n) {
                           Node& t = in(n, 0);
                           Matrix g = Matrix::Zero(t.value.rows(), t.value.cols());
                           for (std::size_t i = 0; i < ids.size(); ++i) {
                             g.row(ids[i]) += n.grad.row(static_cast<Index>(i));
                           }
                           t.accumulate(g);
                         });
}

Tensor im2col(const Tensor& x, int h, int w, int kernel, int stride, int pad) {
  if (x.rows() != static_cast<Index>(h) * w) {
    throw ShapeError("im2col: " + shape_str(x) + " is not a " + std::to_string(h) + "x" +
                     std::to_string(w) + " grid");
  }
  const int ho = (h + 2 * pad - kernel) / stride + 1;
  const int wo = (w + 2 * pad - kernel) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ShapeError("im2col: kernel larger than padded grid");
  const Index c = x.cols();
  // src[out_row * k*k + tap] = input row or -1 for padding
  std::vector<int> src(static_cast<std::size_t>(ho) * wo * kernel * kernel, -1);
  Matrix out = Matrix::Zero(static_cast<Index>(ho) * wo, kernel * kernel * c);
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const int orow = oy * wo + ox;
      for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
          const int iy = oy * stride - pad + ky;
          const int ix = ox * stride - pad + kx;
          if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
          const int tap = ky * kernel + kx;
          src[static_cast<std::size_t>(orow) * kernel * kernel + tap] = iy * w + ix;
          out.block(orow, tap * c, 1, c) = x.value().row(iy * w + ix);
        }
      }
    }
  }
  const int taps = kernel * kernel;
  return Tensor::from_op(std::move(out), {x}, [src = std::move(src), taps, c](Node& n) {
    Node& xn = in(n, 0);
    Matrix g = Matrix::Zero(xn.value.rows(), c);
    for (Index orow = 0; orow < n.grad.rows(); ++orow) {
      for (int tap = 0; tap < taps; ++tap) {
        const int s = src[static_cast<std::size_t>(orow) * taps + tap];
        if (s >= 0) g.row(s) += n.grad.block(orow, tap * c, 1, c);
      }
    }
    xn.accumulate(g);
  });
}

Tensor upsample_nearest(const Tensor& x, int h, int w, int factor) {
  if (x.rows() != static_cast<Index>(h) * w) throw ShapeError("upsample_nearest: grid mismatch");
  const int ho = h * factor;
  const int wo = w * factor;
  std::vector<int> src(static_cast<std::size_t>(ho) * wo);
  Matrix out(static_cast<Index>(ho) * wo, x.cols());
  for (int y = 0; y < ho; ++y) {
    for (int xx = 0; xx < wo; ++xx) {
      const int s = (y / factor) * w + (xx / factor);
      src[static_cast<std::size_t>(y) * wo + xx] = s;
      out.row(y * wo + xx) = x.value().row(s);
    }
  }
  return Tensor::from_op(std::move(out), {x}, [src = std::move(src)](Node& n) {
    Node& xn = in(n, 0);
    Matrix g = Matrix::Zero(xn.value.rows(), xn.value.cols());
    for (std::size_t r = 0; r < src.size(); ++r) g.row(src[r]) += n.grad.row(static_cast<Index>(r));
    xn.accumulate(g);
  });
}

Tensor mean_rows(const Tensor& x) {
  if (x.rows() == 0) throw ShapeError("mean_rows: no rows");
  Matrix out = x.value().colwise().mean();
  const double inv = 1.0 / static_cast<double>(x.rows());
  return Tensor::from_op(std::move(out), {x}, [inv](Node& n) {
    Node& xn = in(n, 0);
    Matrix g = n.grad.replicate(xn.value.rows(), 1) * inv;
    xn.accumulate(g);
  });
}

Tensor sum(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return Tensor::from_op(std::move(out), {x}, [](Node& n) {
    Node& xn = in(n, 0);
    xn.accumulate(Matrix::Constant(xn.value.rows(), xn.value.cols(), n.grad(0, 0)));
  });
}

Tensor mean(const Tensor& x) {
  if (x.value().size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  if (a.value().size() == 0) throw ShapeError("mse: empty tensors");
  Matrix diff = a.value() - b.value();
  const double inv = 1.0 / static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() * inv;
  return Tensor::from_op(std::move(out), {a, b}, [diff = std::move(diff), inv](Node& n) {
    const double g = n.grad(0, 0) * 2.0 * inv;
    if (in(n, 0).requires_grad) in(n, 0).accumulate(diff * g);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(diff * -g);
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  const Index rows = logits.rows();
  if (rows == 0) throw LossError("cross_entropy: no positions");
  if (static_cast<Index>(targets.size()) != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  }
  Matrix probs = softmax_values(logits.value());
  double total = 0.0;
  for (Index r = 0; r < rows; ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= logits.cols()) throw IndexError("cross_entropy: target out of range");
    const auto& row = logits.value().row(r);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    total += lse - row(t);
  }
  const double inv = 1.0 / static_cast<double>(rows);
  Matrix out(1, 1);
  out(0, 0) = total * inv;
  return Tensor::from_op(
      std::move(out), {logits},
      [probs = std::move(probs), t = std::vector<int>(targets.begin(), targets.end()), inv](Node& n) {
        Matrix g = probs;
        for (std::size_t r = 0; r < t.size(); ++r) g(static_cast<Index>(r), t[r]) -= 1.0;
        in(n, 0).accumulate(g * (inv * n.grad(0, 0)));
      });
}

Tensor l2_normalize_rows(const Tensor& x) {
  const Matrix& v = x.value();
  RowVector norms(v.rows());
  Matrix out(v.rows(), v.cols());
  for (Index r = 0; r < v.rows(); ++r) {
    norms(r) = v.row(r).norm();
    if (!(norms(r) > 0.0) || !std::isfinite(norms(r))) {
      throw LossError("cosine undefined: row " + std::to_string(r) + " has zero norm");
    }
    out.row(r) = v.row(r) / norms(r);
  }
  return Tensor::from_op(out, {x}, [y = out, norms = std::move(norms)](Node& n) {
    Matrix g(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const double d = y.row(r).dot(n.grad.row(r));
      g.row(r) = (n.grad.row(r) - y.row(r) * d) / norms(r);
    }
    in(n, 0).accumulate(g);
  });
}

}  // namespace prefix::ag
