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

#include "sparseflow/tvae.hpp"

#include <algorithm>
#include <random>

#include "sparseflow/errors.hpp"
#include "sparseflow/preprocess.hpp"

namespace sparseflow::tvae {

namespace nx = numerics;

CounterVae::CounterVae(ParameterStore& store, const std::string& prefix, Layout layout, Index num_nodes,
                       VaeShape shape, Rng& rng)
    : layout_(layout), num_nodes_(num_nodes), shape_(shape) {
  if (num_nodes <= 0) throw ContractError("CounterVae: need at least one node");
  if (shape_.hidden <= 0) shape_.hidden = std::min<Index>(256, num_nodes);
  if (shape_.latent <= 0) throw ContractError("CounterVae: latent width must be positive");
  const Index width = layout == Layout::transposed ? num_nodes : graphmodel::kBinsPerSample;
  enc1_ = nx::Affine<double>(store, prefix + ".enc1", width, shape_.hidden, rng);
  enc2_ = nx::Affine<double>(store, prefix + ".enc2", shape_.hidden, 2 * shape_.latent, rng);
  dec1_ = nx::Affine<double>(store, prefix + ".dec1", shape_.latent, shape_.hidden, rng);
  dec2_ = nx::Affine<double>(store, prefix + ".dec2", shape_.hidden, width, rng);
}

CounterVae::Output CounterVae::forward(Tape& tape, const Mat& unit_input, bool training, Rng& rng) const {
  if (unit_input.rows() != num_nodes_ || unit_input.cols() != graphmodel::kBinsPerSample) {
    throw ShapeError("CounterVae: expected " + std::to_string(num_nodes_) + "x4 input");
  }
  const bool transposed = layout_ == Layout::transposed;
  Var x = tape.constant(transposed ? Mat(unit_input.transpose()) : unit_input);
  Var h = nx::leaky_relu(enc1_(tape, x), shape_.slope);
  Var stats = nx::ensure_finite(enc2_(tape, h), "vae.encoder");
  Var mu = nx::slice_cols(stats, 0, shape_.latent);
  Var logvar = nx::slice_cols(stats, shape_.latent, shape_.latent);

  Var zeta = mu;
  if (training) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat eps(mu.rows(), mu.cols());
    for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
    Var sigma = nx::exp(nx::scale(logvar, 0.5));
    zeta = nx::add(mu, nx::hadamard_const(sigma, eps));
  }
  Var d = nx::leaky_relu(dec1_(tape, zeta), shape_.slope);
  Var out = nx::ensure_finite(dec2_(tape, d), "vae.decoder");
  if (transposed) out = nx::transpose(out);

  // -1/2 * sum(1 + logvar - mu^2 - exp(logvar))
  Var inner = nx::sub(nx::sub(nx::affine_scalar(logvar, 1.0, 1.0), nx::square(mu)), nx::exp(logvar));
  Var kl = nx::scale(nx::sum(inner), -0.5);
  return {out, mu, logvar, kl};
}

Mat noise_augment(const Mat& unit_input, bool training, Rng& rng) {
  if (!training) return unit_input;
  const double s = std::uniform_real_distribution<double>(0.8, 1.2)(rng);
  return unit_input * s;
}

Mat masked_merge(const Mat& x, const Mat& mask, const Mat& recon) {
  if (x.rows() != mask.rows() || x.cols() != mask.cols() || recon.rows() != x.rows() || recon.cols() != x.cols()) {
    throw ShapeError("masked_merge: shape mismatch");
  }
  return (mask.array() != 0.0).select(x, recon);
}

Var masked_merge(const Mat& x, const Mat& mask, const Var& recon) {
  if (x.rows() != mask.rows() || x.cols() != mask.cols() || recon.rows() != x.rows() || recon.cols() != x.cols()) {
    throw ShapeError("masked_merge: shape mismatch");
  }
  Tape& tape = *recon.tape();
  const Mat missing = (1.0 - mask.array()).matrix();
  Mat value = masked_merge(x, mask, recon.value());
  const int ir = recon.id();
  // Value is built by selection so observed cells are bit-exact copies of x.
  return tape.record(std::move(value), {recon}, [ir, missing](Tape& tp, const Mat& g) {
    tp.accumulate(ir, g.cwiseProduct(missing));
  });
}

Var loss_reconstruction(const Var& recon, const Mat& target, const Mat& mask) {
  if (recon.rows() != target.rows() || recon.cols() != target.cols() || mask.rows() != target.rows() ||
      mask.cols() != target.cols()) {
    throw ShapeError("loss_reconstruction: shape mismatch");
  }
  const double observed = mask.sum();
  if (observed <= 0.0) throw DataError("loss_reconstruction: no observed cells");
  Mat clean = (mask.array() != 0.0).select(target, Mat::Zero(target.rows(), target.cols()));
  Tape& tape = *recon.tape();
  Var diff = nx::hadamard_const(nx::sub(recon, tape.constant(std::move(clean))), mask);
  return nx::scale(nx::sum(nx::square(diff)), 1.0 / observed);
}

ReconOutput reconstruct(Tape& tape, const CounterVae& vae, const Mat& normalized, const Mat& mask,
                        const NormStats& stats, const ReconOptions& options, Rng& rng) {
  auto [lo, hi] = preprocess::unit_range(normalized, stats, options.global_normalization);
  if (!(hi > lo)) {
    // A constant input carries no scale; widen the range so scaling is defined.
    hi = lo + 1.0;
  }
  Mat unit = preprocess::minmax_to_unit(normalized, lo, hi);
  if (options.noise) unit = noise_augment(unit, options.training, rng);
  auto out = vae.forward(tape, unit, options.training, rng);
  Var recon = nx::affine_scalar(out.recon, hi - lo, lo);
  Var u_d = masked_merge(normalized, mask, recon);
  return {u_d, recon, out.kl, std::move(unit)};
}

}  // namespace sparseflow::tvae
