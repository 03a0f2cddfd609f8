#pragma once

// Shared fixtures for the unit and acceptance tests: random tiny networks,
// reference losses for finite differences, and scratch directories.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "srnreg/bptt.hpp"
#include "srnreg/linalg.hpp"
#include "srnreg/model.hpp"
#include "srnreg/rng.hpp"

namespace srnreg::testing {

inline Mat random_mat(Rng& rng, std::size_t r, std::size_t c, double scale) {
  Mat m(r, c);
  for (double& x : m.span()) x = scale * rng.normal();
  return m;
}

inline Vec random_vec(Rng& rng, std::size_t n, double scale) {
  Vec v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline SrnParams random_params(Rng& rng, std::size_t n_in, std::size_t n_hid, std::size_t n_out,
                               double scale, OutputActivation out) {
  SrnParams p = make_zero_params(n_in, n_hid, n_out, out);
  p.w_in = random_mat(rng, n_in, n_hid, scale);
  p.w_rec = random_mat(rng, n_hid, n_hid, scale);
  p.w_out = random_mat(rng, n_hid, n_out, scale);
  p.b = random_vec(rng, n_hid, 0.3 * scale);
  return p;
}

inline Sequence random_seq(Rng& rng, std::size_t T, std::size_t n_in) {
  Sequence s;
  for (std::size_t k = 0; k < T; ++k) s.push_back(random_vec(rng, n_in, 1.0));
  return s;
}

inline Target random_target(Rng& rng, const SrnParams& p) {
  if (p.output == OutputActivation::Softmax) {
    return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(p.n_out()) - 1));
  }
  return random_vec(rng, p.n_out(), 1.0);
}

inline double loss_of(const SrnParams& p, const Sequence& s, const Target& t) {
  return output_loss(forward(p, s), t, loss_for(p.output), 0.04).loss;
}

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("srnreg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace srnreg::testing
