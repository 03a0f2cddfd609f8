#include "srnreg/tasks.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "srnreg/io.hpp"
#include "srnreg/rng.hpp"

namespace srnreg {

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Adding: return "adding";
    case TaskKind::Multiplication: return "multiplication";
    case TaskKind::TemporalOrder: return "temporal_order";
    case TaskKind::TemporalOrder3: return "temporal_order3";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view s) {
  if (s == "adding") return TaskKind::Adding;
  if (s == "multiplication") return TaskKind::Multiplication;
  if (s == "temporal_order") return TaskKind::TemporalOrder;
  if (s == "temporal_order3") return TaskKind::TemporalOrder3;
  throw ParseError("unknown task '" + std::string(s) +
                   "' (expected adding|multiplication|temporal_order|temporal_order3)");
}

namespace {

// [ceil(lo_tenths * T / 10), floor(hi_tenths * T / 10)] in exact integer arithmetic.
Window tenths_window(std::size_t T, std::size_t lo_tenths, std::size_t hi_tenths) {
  return Window{(lo_tenths * T + 9) / 10, hi_tenths * T / 10};
}

std::string window_str(const Window& w) {
  return "[" + std::to_string(w.lo) + ", " + std::to_string(w.hi) + "]";
}

}  // namespace

TaskSpec make_task_spec(TaskKind kind, std::size_t T, double success_tolerance) {
  if (!(success_tolerance > 0.0)) throw std::invalid_argument("success tolerance must be > 0");
  TaskSpec s;
  s.kind = kind;
  s.T = T;
  s.success_tolerance = success_tolerance;
  const std::string name = to_string(kind);
  switch (kind) {
    case TaskKind::Adding:
    case TaskKind::Multiplication: {
      if (T < 10) {
        throw std::invalid_argument(name + ": T=" + std::to_string(T) +
                                    " too small; marker window [1, T/10] must be non-empty (T >= 10)");
      }
      s.windows = {Window{1, T / 10}, Window{T / 10 + 1, T / 2}};
      s.n_in = 2;
      s.n_out = 1;
      s.output = OutputActivation::Linear;
      s.loss = LossKind::Mse;
      break;
    }
    case TaskKind::TemporalOrder:
    case TaskKind::TemporalOrder3: {
      if (kind == TaskKind::TemporalOrder) {
        s.windows = {tenths_window(T, 1, 2), tenths_window(T, 5, 6)};
      } else {
        s.windows = {tenths_window(T, 1, 2), tenths_window(T, 3, 4), tenths_window(T, 6, 7)};
      }
      s.alphabet = kDistractors + 2;
      s.n_in = s.alphabet;
      s.n_out = std::size_t{1} << s.windows.size();
      s.output = OutputActivation::Softmax;
      s.loss = LossKind::CrossEntropy;
      break;
    }
  }
  for (std::size_t i = 0; i < s.windows.size(); ++i) {
    const Window& w = s.windows[i];
    // symbol windows need room for the special's position to actually vary
    const std::size_t min_width = s.classification() ? 2 : 1;
    if (w.lo < 1 || w.hi > T || w.lo > w.hi || w.hi - w.lo + 1 < min_width) {
      throw std::invalid_argument(name + ": T=" + std::to_string(T) + " too small; window " +
                                  std::to_string(i + 1) + " " + window_str(w) + " must hold at least " +
                                  std::to_string(min_width) + " position(s) within [1, T]");
    }
    if (i > 0 && s.windows[i - 1].hi >= w.lo) {
      throw std::invalid_argument(name + ": T=" + std::to_string(T) + " windows " +
                                  window_str(s.windows[i - 1]) + " and " + window_str(w) +
                                  " collide");
    }
  }
  return s;
}

SequenceBatch SequenceBatch::select(const std::vector<std::size_t>& idx) const {
  SequenceBatch out;
  out.spec = spec;
  out.inputs.reserve(idx.size());
  out.targets.reserve(idx.size());
  for (std::size_t i : idx) {
    out.inputs.push_back(inputs.at(i));
    out.targets.push_back(targets.at(i));
  }
  return out;
}

std::size_t temporal_order_class(const std::vector<bool>& is_y) {
  std::size_t c = 0;
  for (bool y : is_y) c = (c << 1) | (y ? 1u : 0u);
  return c;
}

namespace {

std::size_t pick(Rng& rng, const Window& w) {
  return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(w.lo),
                                                  static_cast<std::int64_t>(w.hi)));
}

void gen_marker_sequence(const TaskSpec& spec, Rng& rng, Sequence& seq, Target& target) {
  const std::size_t T = spec.T;
  seq.assign(T, Vec(2));
  for (std::size_t k = 0; k < T; ++k) seq[k][0] = rng.uniform();
  const std::size_t p1 = pick(rng, spec.windows[0]);
  const std::size_t p2 = pick(rng, spec.windows[1]);
  seq[p1 - 1][1] = 1.0;
  seq[p2 - 1][1] = 1.0;
  const double v1 = seq[p1 - 1][0];
  const double v2 = seq[p2 - 1][0];
  const double t = spec.kind == TaskKind::Adding ? 0.5 * (v1 + v2) : v1 * v2;
  target = Vec{t};
}

void gen_symbol_sequence(const TaskSpec& spec, Rng& rng, Sequence& seq, Target& target) {
  const std::size_t T = spec.T;
  seq.assign(T, Vec(spec.alphabet));
  for (std::size_t k = 0; k < T; ++k) {
    seq[k][static_cast<std::size_t>(rng.uniform_int(0, kDistractors - 1))] = 1.0;
  }
  std::vector<bool> is_y;
  for (const Window& w : spec.windows) {
    const std::size_t p = pick(rng, w);
    const bool y = rng.uniform_int(0, 1) == 1;
    Vec& row = seq[p - 1];
    for (double& x : row) x = 0.0;
    row[y ? kSymbolY : kSymbolX] = 1.0;
    is_y.push_back(y);
  }
  target = temporal_order_class(is_y);
}

}  // namespace

SequenceBatch generate(const TaskSpec& spec, std::size_t n, std::uint64_t seed) {
  SequenceBatch b;
  b.spec = spec;
  b.inputs.resize(n);
  b.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    if (spec.classification()) {
      gen_symbol_sequence(spec, rng, b.inputs[i], b.targets[i]);
    } else {
      gen_marker_sequence(spec, rng, b.inputs[i], b.targets[i]);
    }
  }
  return b;
}

SequenceBatch gen_adding(std::size_t T, std::size_t n, std::uint64_t seed) {
  return generate(make_task_spec(TaskKind::Adding, T), n, seed);
}

SequenceBatch gen_multiplication(std::size_t T, std::size_t n, std::uint64_t seed) {
  return generate(make_task_spec(TaskKind::Multiplication, T), n, seed);
}

SequenceBatch gen_temporal_order(std::size_t T, std::size_t n, std::uint64_t seed,
                                 std::size_t special_count) {
  if (special_count != 2 && special_count != 3) {
    throw std::invalid_argument("temporal order: special_count must be 2 or 3");
  }
  const TaskKind k = special_count == 2 ? TaskKind::TemporalOrder : TaskKind::TemporalOrder3;
  return generate(make_task_spec(k, T), n, seed);
}

Splits make_splits(const TaskSpec& spec, std::uint64_t seed, SplitSizes sizes) {
  // one sub-seed per split
  return Splits{generate(spec, sizes.train, derive_seed(seed, 0xA11CE000ULL + 1)),
                generate(spec, sizes.valid, derive_seed(seed, 0xA11CE000ULL + 2)),
                generate(spec, sizes.test, derive_seed(seed, 0xA11CE000ULL + 3))};
}

namespace {

constexpr std::string_view kDatasetMagic = "srnreg-dataset 1";

void put_le(std::ostream& out, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(buf, 8);
}

double get_le(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw ParseError("dataset: truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_dataset(const SequenceBatch& batch, std::uint64_t seed, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  const TaskSpec& s = batch.spec;
  out << kDatasetMagic << " task=" << to_string(s.kind) << " T=" << s.T << " n=" << batch.size()
      << " seed=" << seed << " n_in=" << s.n_in << " n_out=" << s.n_out
      << " tolerance=" << format_double(s.success_tolerance) << '\n';
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (s.classification()) {
      put_le(out, static_cast<double>(std::get<std::size_t>(batch.targets[i])));
    } else {
      for (double t : std::get<Vec>(batch.targets[i])) put_le(out, t);
    }
    for (const Vec& u : batch.inputs[i])
      for (double x : u) put_le(out, x);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open dataset file " + path.string());
  std::string header;
  std::getline(in, header);
  if (header.rfind(kDatasetMagic, 0) != 0) {
    throw ParseError(path.string() + ": not a dataset file (missing '" + std::string(kDatasetMagic) + "')");
  }
  std::map<std::string, std::string, std::less<>> kv;
  const std::string fields = header.substr(kDatasetMagic.size());
  for (auto tok : split(fields, ' ')) {
    if (tok.empty()) continue;
    auto eq = tok.find('=');
    if (eq == std::string_view::npos) throw ParseError("dataset header: bad token '" + std::string(tok) + "'");
    kv[std::string(tok.substr(0, eq))] = std::string(tok.substr(eq + 1));
  }
  auto get = [&](const char* k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw ParseError(std::string("dataset header: missing '") + k + "'");
    return it->second;
  };
  LoadedDataset d;
  const TaskKind kind = parse_task_kind(get("task"));
  const auto T = static_cast<std::size_t>(parse_int(get("T")));
  const auto n = static_cast<std::size_t>(parse_int(get("n")));
  d.seed = std::stoull(get("seed"));
  d.batch.spec = make_task_spec(kind, T, parse_double(get("tolerance")));
  const TaskSpec& s = d.batch.spec;
  if (static_cast<std::size_t>(parse_int(get("n_in"))) != s.n_in ||
      static_cast<std::size_t>(parse_int(get("n_out"))) != s.n_out) {
    throw ParseError("dataset header: n_in/n_out inconsistent with task " + to_string(kind));
  }
  d.batch.inputs.resize(n);
  d.batch.targets.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (s.classification()) {
      const double c = get_le(in);
      if (!(c >= 0.0) || c >= static_cast<double>(s.n_out) || c != static_cast<double>(static_cast<std::size_t>(c))) {
        throw ParseError("dataset: bad class label at sequence " + std::to_string(i));
      }
      d.batch.targets[i] = static_cast<std::size_t>(c);
    } else {
      Vec t(s.n_out);
      for (double& x : t) x = get_le(in);
      d.batch.targets[i] = std::move(t);
    }
    Sequence seq(T, Vec(s.n_in));
    for (Vec& u : seq)
      for (double& x : u) x = get_le(in);
    d.batch.inputs[i] = std::move(seq);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("dataset: trailing bytes");
  return d;
}

}  // namespace srnreg
