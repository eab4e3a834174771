/*
 * Copyright (c) 2026 The Sparseflow Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>

#include "sparseflow/graphmodel/dataset.hpp"
#include "sparseflow/numerics/layers.hpp"
#include "sparseflow/norm_stats.hpp"

namespace sparseflow::tvae {

using graphmodel::Mat;
using numerics::Index;
using numerics::Rng;
using Tape = numerics::Tape<double>;
using Var = numerics::Var<double>;
using ParameterStore = numerics::ParameterStore<double>;

/// How a |V| x 4 counter matrix is cut into samples.
///
/// transposed: the 4 time bins are the samples, each |V| wide. A missing
///   node's output depends on every observed node of the same frame.
/// per_node: every node is a 4-wide sample (a plain VAE). Nodes with equal
///   (filled) inputs necessarily get equal outputs.
enum class Layout { transposed, per_node };

struct VaeShape {
  Index hidden = 0;  // 0 selects min(256, |V|)
  Index latent = 32;
  double slope = 0.2;
};

/// Two-layer encoder to (mu, log variance), two-layer decoder.
class CounterVae {
 public:
  CounterVae() = default;
  CounterVae(ParameterStore& store, const std::string& prefix, Layout layout, Index num_nodes, VaeShape shape,
             Rng& rng);

  struct Output {
    Var recon;   // |V| x 4, unit scale
    Var mu;      // samples x latent
    Var logvar;  // samples x latent
    Var kl;      // 1 x 1, summed over samples
  };

  /// `unit_input` is |V| x 4 in unit scale. Training draws
  /// zeta = mu + exp(logvar / 2) * eps; eval uses zeta = mu.
  Output forward(Tape& tape, const Mat& unit_input, bool training, Rng& rng) const;

  Layout layout() const { return layout_; }
  Index num_nodes() const { return num_nodes_; }
  const VaeShape& shape() const { return shape_; }

 private:
  Layout layout_ = Layout::transposed;
  Index num_nodes_ = 0;
  VaeShape shape_;
  numerics::Affine<double> enc1_, enc2_, dec1_, dec2_;
};

/// Scales the whole sample by one factor drawn from U[0.8, 1.2] when training.
Mat noise_augment(const Mat& unit_input, bool training, Rng& rng);

/// M * X + (1 - M) * recon, on plain matrices. Exact: observed cells are
/// copied, not recomputed.
Mat masked_merge(const Mat& x, const Mat& mask, const Mat& recon);

/// Differentiable masked merge; gradient flows only into `recon` at missing cells.
Var masked_merge(const Mat& x, const Mat& mask, const Var& recon);

/// Mean squared error over observed cells (mask == 1) between the decoder
/// output and the true values. Throws DataError when no cell is observed.
Var loss_reconstruction(const Var& recon, const Mat& target, const Mat& mask);

struct ReconOptions {
  bool training = false;
  bool global_normalization = true;
  bool noise = false;
};

struct ReconOutput {
  Var u_d;          // merged counters, |V| x 4, normalised scale
  Var recon;        // decoder output restored to normalised scale (pre-merge)
  Var kl;
  Mat recon_input;  // unit-scale tensor actually fed to the VAE (post-noise)
};

/// Full reconstruction path for one frame: normalised counters -> unit range
/// -> optional noise -> VAE -> restore -> masked merge.
ReconOutput reconstruct(Tape& tape, const CounterVae& vae, const Mat& normalized, const Mat& mask,
                        const NormStats& stats, const ReconOptions& options, Rng& rng);

}  // namespace sparseflow::tvae
