#pragma once

// Synthetic long-term-dependency benchmarks.
//
// Positions are 1-based time steps. Every task is sequence-to-one.
//
// Adding / Multiplication: two input channels, channel 0 i.i.d. U[0,1),
//   channel 1 is 1.0 at exactly two marked steps and 0.0 elsewhere. The first
//   mark is uniform in [1, T/10], the second in [T/10 + 1, T/2] (integer
//   division). Target (v1 + v2) / 2 or v1 * v2. Linear output, MSE; a sequence
//   counts as solved when |y - t| < tolerance (default 0.04).
//
// Temporal order (2 or 3 specials): one-hot over 6 symbols, indices 0..3 are
//   distractors, 4 = X, 5 = Y. One special is placed uniformly inside each
//   window; windows are [ceil(lo*T), floor(hi*T)] with (lo, hi) =
//   (0.1, 0.2), (0.5, 0.6) for two specials and (0.1, 0.2), (0.3, 0.4),
//   (0.6, 0.7) for three. Class = the special tuple read as a binary number
//   with X = 0, Y = 1, first special most significant: (X,X) = 0, (Y,Y,Y) = 7.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "srnreg/model.hpp"

namespace srnreg {

enum class TaskKind { Adding, Multiplication, TemporalOrder, TemporalOrder3 };

std::string to_string(TaskKind k);
TaskKind parse_task_kind(std::string_view s);

/// Window of admissible 1-based positions, inclusive.
struct Window {
  std::size_t lo = 0;
  std::size_t hi = 0;
  bool operator==(const Window&) const = default;
};

struct TaskSpec {
  TaskKind kind = TaskKind::Adding;
  std::size_t T = 0;
  std::vector<Window> windows;
  std::size_t alphabet = 0;  // symbolic tasks only: distractors + specials
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  OutputActivation output = OutputActivation::Linear;
  LossKind loss = LossKind::Mse;
  double success_tolerance = 0.04;

  bool classification() const { return loss == LossKind::CrossEntropy; }
};

/// Builds and validates a spec; throws std::invalid_argument naming the
/// violated window constraint when T is too short.
TaskSpec make_task_spec(TaskKind kind, std::size_t T, double success_tolerance = 0.04);

struct SequenceBatch {
  TaskSpec spec;
  std::vector<Sequence> inputs;
  std::vector<Target> targets;

  std::size_t size() const { return inputs.size(); }
  /// Sub-batch with the given sequence indices.
  SequenceBatch select(const std::vector<std::size_t>& idx) const;
};

constexpr std::size_t kDistractors = 4;
constexpr std::size_t kSymbolX = 4;
constexpr std::size_t kSymbolY = 5;

SequenceBatch generate(const TaskSpec& spec, std::size_t n, std::uint64_t seed);

SequenceBatch gen_adding(std::size_t T, std::size_t n, std::uint64_t seed);
SequenceBatch gen_multiplication(std::size_t T, std::size_t n, std::uint64_t seed);
SequenceBatch gen_temporal_order(std::size_t T, std::size_t n, std::uint64_t seed,
                                 std::size_t special_count);

/// Class index of an ordered tuple of specials (false = X, true = Y).
std::size_t temporal_order_class(const std::vector<bool>& is_y);

struct SplitSizes {
  std::size_t train = 20000;
  std::size_t valid = 1000;
  std::size_t test = 10000;
};

struct Splits {
  SequenceBatch train;
  SequenceBatch valid;
  SequenceBatch test;
};

/// Independent seeded splits; sub-seeds derived from `seed` per split.
Splits make_splits(const TaskSpec& spec, std::uint64_t seed, SplitSizes sizes = {});

// Dataset file: one ASCII header line followed by little-endian doubles
// (see docs/FORMATS.md).
void save_dataset(const SequenceBatch& batch, std::uint64_t seed, const std::filesystem::path& path);
struct LoadedDataset {
  SequenceBatch batch;
  std::uint64_t seed = 0;
};
LoadedDataset load_dataset(const std::filesystem::path& path);

}  // namespace srnreg
