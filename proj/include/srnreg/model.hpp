#pragma once

// Simple Recurrent Network with a tanh hidden layer:
//
//   a(k) = u(k) w_in + z(k-1) w_rec + b
//   z(k) = tanh(a(k))
//   y    = g(z(T) w_out)            g = identity or softmax
//
// The readout is sequence-to-one: y is produced from the final state only.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "srnreg/linalg.hpp"

namespace srnreg {

/// Non-finite value encountered during forward/backward/update.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutputActivation { Linear, Softmax };
enum class LossKind { Mse, CrossEntropy };

/// How the `sigma` init parameter maps to the Gaussian.
enum class SigmaKind {
  StdDev,    ///< weights ~ N(0, sigma^2)
  Variance,  ///< weights ~ N(0, sigma)
};

std::string to_string(OutputActivation a);
std::string to_string(SigmaKind k);
OutputActivation parse_output_activation(std::string_view s);
SigmaKind parse_sigma_kind(std::string_view s);

struct SrnParams {
  Mat w_in;   // n_in x n_hid
  Mat w_rec;  // n_hid x n_hid
  Mat w_out;  // n_hid x n_out
  Vec b;      // n_hid
  OutputActivation output = OutputActivation::Linear;
  std::uint64_t seed = 0;  // init seed, carried for provenance

  std::size_t n_in() const { return w_in.rows(); }
  std::size_t n_hid() const { return w_rec.rows(); }
  std::size_t n_out() const { return w_out.cols(); }

  /// Throws DimensionError if the blocks are inconsistent.
  void validate() const;

  bool operator==(const SrnParams&) const = default;
};

SrnParams make_zero_params(std::size_t n_in, std::size_t n_hid, std::size_t n_out,
                           OutputActivation output);

/// All weights i.i.d. Gaussian with zero mean, biases zero.
SrnParams init_gaussian(std::size_t n_in, std::size_t n_hid, std::size_t n_out, double sigma,
                        std::uint64_t seed, OutputActivation output = OutputActivation::Linear,
                        SigmaKind kind = SigmaKind::StdDev);

using Sequence = std::vector<Vec>;

/// Everything recorded by a forward pass. Index k runs over 0..T; entry 0
/// holds the initial state z(0), with a(0) = atanh(z(0)) and
/// fprime(0) = 1 - z(0)^2 so that the delta recursion can be extended one step
/// past the first input. u[0] is a zero vector.
struct ForwardTrace {
  std::vector<Vec> u;
  std::vector<Vec> a;
  std::vector<Vec> z;
  std::vector<Vec> fprime;
  Vec out_pre;  // z(T) w_out
  Vec y;
  OutputActivation output = OutputActivation::Linear;

  std::size_t steps() const { return z.size() - 1; }
};

ForwardTrace forward(const SrnParams& params, const Sequence& seq);
ForwardTrace forward(const SrnParams& params, const Sequence& seq, const Vec& z0);

Vec softmax(const Vec& x);

/// Either a regression target vector or a class index.
using Target = std::variant<Vec, std::size_t>;

struct LossResult {
  double loss = 0.0;
  Vec output_delta;  // dE / d out_pre
  bool correct = false;
};

/// `tolerance` is the max-abs success threshold for MSE; unused for cross-entropy.
LossResult output_loss(const ForwardTrace& trace, const Target& target, LossKind kind,
                       double tolerance);

LossKind loss_for(OutputActivation a);

// Model file (text, see docs/FORMATS.md).
std::string serialize(const SrnParams& params);
SrnParams deserialize(std::string_view text);
void save_model(const SrnParams& params, const std::filesystem::path& path);
SrnParams load_model(const std::filesystem::path& path);

}  // namespace srnreg
