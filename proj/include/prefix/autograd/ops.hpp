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

#ifndef PREFIX_AUTOGRAD_OPS_HPP_
#define PREFIX_AUTOGRAD_OPS_HPP_

#include <span>
#include <vector>

#include "prefix/autograd/tensor.hpp"

namespace prefix::ag {

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Adds a 1 x c row to every row of a.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double s);

Tensor relu(const Tensor& a);
// tanh approximation
Tensor gelu(const Tensor& a);

// Row-wise layer normalization with affine 1 x d gamma and beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Row-wise softmax. The optional mask is added to x before normalization;
// use -infinity to exclude entries. Every row needs one finite entry.
Tensor softmax_rows(const Tensor& x);
Tensor softmax_rows(const Tensor& x, const Matrix& additive_mask);

Tensor slice_rows(const Tensor& x, Index start, Index count);
Tensor slice_cols(const Tensor& x, Index start, Index count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

// out.row(i) = table.row(ids[i]); gradient scatter-adds into the table.
Tensor gather_rows(const Tensor& table, std::span<const int> ids);

// Unfolds an (h*w x c) grid, row-major positions, into patches of
// k*k*c columns ordered (ky, kx, channel). Out-of-bounds taps read zero.
Tensor im2col(const Tensor& x, int h, int w, int kernel, int stride, int pad);
// Nearest-neighbour upsampling of an (h*w x c) grid by an integer factor.
Tensor upsample_nearest(const Tensor& x, int h, int w, int factor);

// Column means, 1 x c.
Tensor mean_rows(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Mean over elements of (a - b)^2.
Tensor mse(const Tensor& a, const Tensor& b);

// Mean over rows of -log softmax(logits.row(i))[targets[i]].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

// Rows scaled to unit L2 norm. Throws LossError on a zero row.
Tensor l2_normalize_rows(const Tensor& x);

}  // namespace prefix::ag

#endif  // PREFIX_AUTOGRAD_OPS_HPP_
